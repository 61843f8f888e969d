//! Acceptance criteria 1–8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::thread;
use std::time::Instant;

use membrane_gne::builder::{build_gne_system, build_mult_system, mult_step_bound, GameSpec};
use membrane_gne::harness::{
    compare_trajectories, conservation_failures, run_gne, run_mult, run_psystem,
    sample_experiment, EngineChoice, ExperimentConfig, Preset, PsystemRun, Sampler,
};
use membrane_gne::oracle::{
    bnn_rate, count_residual, excess_payoff, gram_identity_gap, simulate, Trajectory,
};
use membrane_gne::pspec;

/// Seeds of the agreement and loop-bound runs.
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Seed of the convergence instance, fixed before looking at any run.
const CONVERGENCE_SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn parallel<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = items.len().div_ceil(workers).max(1);
    let mut items = items;
    let mut groups = Vec::new();
    while !items.is_empty() {
        let rest = items.split_off(chunk.min(items.len()));
        groups.push(std::mem::replace(&mut items, rest));
    }
    thread::scope(|s| {
        let handles: Vec<_> = groups
            .into_iter()
            .map(|g| {
                let f = &f;
                s.spawn(move || g.into_iter().map(f).collect::<Vec<_>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn criterion1() -> Outcome {
    let pairs: Vec<(u64, u64)> = (0..=100).flat_map(|m| (0..=100).map(move |n| (m, n))).collect();
    let total = pairs.len();
    let wrong: Vec<String> = parallel(pairs, |(m, n)| {
        let r = run_mult(m, n).expect("multiplier builds");
        (!r.halted || r.d_count != m * n).then(|| format!("{m}x{n} gave {}", r.d_count))
    })
    .into_iter()
    .flatten()
    .collect();
    outcome(
        wrong.is_empty(),
        format!("{} of {total} products exact {:?}", total - wrong.len(), &wrong[..wrong.len().min(5)]),
    )
}

fn criterion2() -> Outcome {
    let mut violations = Vec::new();
    for m in 0..=100u64 {
        // steps do not depend on n
        let r = run_mult(m, 3).expect("multiplier builds");
        let ok = match m {
            0 => r.steps == 5,
            1 => r.steps == 7,
            _ => r.steps as u64 <= mult_step_bound(m).expect("m >= 2"),
        };
        if !ok {
            violations.push(format!("m={} steps={} bound={:?}", m, r.steps, r.bound));
        }
    }
    outcome(
        violations.is_empty(),
        if violations.is_empty() {
            "m=0: 5 steps, m=1: 7 steps, every m in 2..=100 within 1+6*ceil(log2 m)".into()
        } else {
            format!("{} violations: {}", violations.len(), violations.join(", "))
        },
    )
}

struct Instance {
    seed: u64,
    spec: GameSpec,
    run: PsystemRun,
    oracle: Trajectory,
}

fn instances() -> Vec<Instance> {
    parallel(SEEDS.to_vec(), |seed| {
        let spec = sample_experiment(seed, &Preset::experiment(10));
        let run = run_psystem(&spec, true).expect("GNE system runs");
        let oracle = simulate(&spec).expect("oracle runs");
        Instance {
            seed,
            spec,
            run,
            oracle,
        }
    })
}

fn criterion3(inst: &[Instance]) -> Outcome {
    let mut problems = Vec::new();
    let mut longest = 0;
    for i in inst {
        problems.extend(i.run.stages.failures.iter().map(|f| format!("seed {}: {f}", i.seed)));
        for l in &i.run.stages.loops {
            longest = longest.max(l.total_steps);
            if l.total_steps > 136 {
                problems.push(format!("seed {} loop {}: {} steps", i.seed, l.loop_index, l.total_steps));
            }
            if l.payoff_ready != Some(8) {
                problems.push(format!(
                    "seed {} loop {}: payoff objects at {:?}",
                    i.seed, l.loop_index, l.payoff_ready
                ));
            }
        }
    }
    let loops: usize = inst.iter().map(|i| i.run.stages.loops.len()).sum();
    outcome(
        problems.is_empty() && loops == inst.len() * 10,
        format!(
            "{} instances, {loops} loops, longest loop {longest} steps, payoff at step 8 {}",
            inst.len(),
            if problems.is_empty() { "everywhere".to_string() } else { problems.join("; ") }
        ),
    )
}

fn criterion4(inst: &[Instance]) -> Outcome {
    let mut detail = String::new();
    let mut pass = true;
    for i in inst {
        let d = compare_trajectories(&i.run.trajectory, &i.oracle);
        pass &= d.agrees() && d.loops_compared == 10;
        if !d.agrees() {
            let _ = write!(detail, "seed {}: {}", i.seed, d);
        }
    }
    if pass {
        detail = format!("seeds {SEEDS:?}, N=3, L=10: exact agreement");
    }
    outcome(pass, detail.trim_end().to_string())
}

fn criterion5(inst: &[Instance]) -> Outcome {
    let mut bad = Vec::new();
    let mut states = 0;
    for i in inst {
        for t in [&i.run.trajectory, &i.oracle] {
            states += t.states.len();
            bad.extend(
                conservation_failures(t, i.spec.r_disc)
                    .into_iter()
                    .map(|(l, k, s)| format!("seed {} loop {l} player {k}: {s}", i.seed)),
            );
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{states} states, every population sums to 100")
        } else {
            bad.join("; ")
        },
    )
}

fn criterion6() -> Outcome {
    let spec = sample_experiment(CONVERGENCE_SEED, &Preset::experiment(20));
    let t = simulate(&spec).expect("oracle runs");
    let res: Vec<u64> = t
        .states
        .iter()
        .map(|s| count_residual(&spec, &s.counts).expect("shapes match"))
        .collect();
    let t_star = res.iter().position(|&r| r == 0);
    let pass = t_star.is_some_and(|t0| res[t0..].iter().all(|&r| r == 0));
    outcome(
        pass,
        format!("seed {CONVERGENCE_SEED}, L=20: residuals {res:?}, zero from loop {t_star:?}"),
    )
}

fn criterion7() -> Outcome {
    let spec = sample_experiment(7, &Preset::experiment(1));
    let index = spec.index();
    let mut s = Sampler::new(0x5eed);
    let mut worst_rate = 0.0f64;
    let mut worst_mean = 0.0f64;
    for _ in 0..1000 {
        let mut z = vec![0.0; index.len()];
        let p: Vec<f64> = (0..index.len()).map(|_| -10.0 + 20.0 * s.uniform()).collect();
        for k in 1..=index.players() {
            let block: Vec<usize> = (0..index.len()).filter(|&l| index.entries[l].k == k).collect();
            let w: Vec<f64> = block.iter().map(|_| s.uniform() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            for (&l, wi) in block.iter().zip(&w) {
                z[l] = wi / total;
            }
        }
        let phat = excess_payoff(&p, &z, &spec).expect("shapes match");
        let rate = bnn_rate(&phat, &z, &spec).expect("shapes match");
        for k in 1..=index.players() {
            let ls = (0..index.len()).filter(|&l| index.entries[l].k == k);
            let sum_rate: f64 = ls.clone().map(|l| rate[l]).sum();
            let sum_mean: f64 = ls.map(|l| z[l] * phat[l]).sum();
            worst_rate = worst_rate.max(sum_rate.abs());
            worst_mean = worst_mean.max(sum_mean.abs());
        }
    }
    let mut worst_gram = 0.0f64;
    for seed in 0..100 {
        let preset = if seed % 2 == 0 { Preset::experiment(1) } else { Preset::duopoly(1) };
        let g = sample_experiment(1000 + seed, &preset);
        worst_gram = worst_gram.max(gram_identity_gap(&g).expect("valid spec"));
    }
    outcome(
        worst_rate <= 1e-12 && worst_mean <= 1e-12 && worst_gram <= 1e-9,
        format!("max |sum zdot| {worst_rate:.1e}, max |sum z*phat| {worst_mean:.1e}, max gram gap {worst_gram:.1e}"),
    )
}

fn criterion8() -> Outcome {
    let mut problems = Vec::new();
    let base = std::env::temp_dir().join(format!("mgne-acceptance-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let mut cfg = ExperimentConfig::preset(42, 4);
        cfg.engine = EngineChoice::Both;
        cfg.out = Some(base.join(format!("run{run}")));
        run_gne(&cfg).expect("experiment runs");
        let dir = cfg.out.expect("set above");
        let files: Vec<Vec<u8>> = ["psystem.csv", "oracle.csv", "report.txt", "spec.toml", "diff.txt"]
            .iter()
            .map(|f| std::fs::read(dir.join(f)).expect("output written"))
            .collect();
        outputs.push(files);
    }
    let _ = std::fs::remove_dir_all(&base);
    if outputs[0] != outputs[1] {
        problems.push("repeated seed produced different files".to_string());
    }

    let mult = build_mult_system(13, 29);
    if pspec::parse(&pspec::serialize(&mult)).as_ref() != Ok(&mult) {
        problems.push("mult system does not round-trip".into());
    }
    let mut s = Sampler::new(8);
    for seed in 0..20 {
        let preset = if seed % 3 == 2 { Preset::duopoly(1) } else { Preset::experiment(1) };
        let mut spec = sample_experiment(s.next_u64(), &preset);
        spec.loops = 1 + (s.next_u64() % 4) as usize;
        let sys = build_gne_system(&spec).expect("builds");
        let text = pspec::serialize(&sys);
        match pspec::parse(&text) {
            Ok(back) if back == sys => {}
            Ok(_) => problems.push(format!("GNE system {seed} parsed to a different system")),
            Err(e) => problems.push(format!("GNE system {seed}: {e}")),
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "byte-identical outputs for a repeated seed; mult + 20 GNE systems round-trip".into()
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, start: Instant, o: Outcome| {
        println!(
            "criterion {n} ({name}): {} [{:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(n);
        }
    };

    let t = Instant::now();
    report(1, "multiplication correctness", t, criterion1());
    let t = Instant::now();
    report(2, "multiplication step counts", t, criterion2());
    let t = Instant::now();
    let inst = instances();
    report(3, "loop bound", t, criterion3(&inst));
    let t = Instant::now();
    report(4, "engine-oracle agreement", t, criterion4(&inst));
    let t = Instant::now();
    report(5, "conservation", t, criterion5(&inst));
    let t = Instant::now();
    report(6, "convergence", t, criterion6());
    let t = Instant::now();
    report(7, "numerical identities", t, criterion7());
    let t = Instant::now();
    report(8, "determinism and round-trip", t, criterion8());

    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
