//! Orchestration: build systems, run either engine, compare them and write
//! trajectories and reports.

mod compare;
mod sample;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{compare_trajectories, psystem_trajectory, DiffReport, Divergence};
pub use sample::{quantize, sample_experiment, Preset, SampleRanges, Sampler};

use crate::builder::{
    build_gne_system, build_mult_system, mult_step_bound, GameSpec, StageReport,
};
use crate::engine::{Engine, Halting, RunOptions, Trace};
use crate::error::{BuildError, EngineError, OracleError, SpecFileError};
use crate::oracle::{simulate, simulate_with, Rounding, StateZ, Trajectory};
use crate::symbol::Symbol;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Spec(#[from] SpecFileError),
    #[error("step budget of {budget} exhausted after {loops_done} complete loops")]
    BudgetExhausted { budget: usize, loops_done: usize },
    #[error("stage failure: {}", .0.join("; "))]
    StageFailure(Vec<String>),
    #[error("io on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineChoice {
    PSystem,
    Oracle,
    #[default]
    Both,
}

impl std::str::FromStr for EngineChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "psystem" => Ok(EngineChoice::PSystem),
            "oracle" => Ok(EngineChoice::Oracle),
            "both" => Ok(EngineChoice::Both),
            _ => Err(format!("unknown engine '{s}' (psystem, oracle, both)")),
        }
    }
}

/// What to run and where to put the results.
///
/// With `spec_path` unset the instance is sampled from `preset` with `seed`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec_path: Option<PathBuf>,
    pub seed: u64,
    pub preset: Preset,
    /// Overrides the loop count of the spec or preset.
    pub loops: Option<usize>,
    pub engine: EngineChoice,
    /// Output directory for CSVs and reports.
    pub out: Option<PathBuf>,
    /// Where to write the P system's step records.
    pub trace: Option<PathBuf>,
    pub strict: bool,
}

impl ExperimentConfig {
    pub fn preset(seed: u64, loops: usize) -> ExperimentConfig {
        ExperimentConfig {
            spec_path: None,
            seed,
            preset: Preset::experiment(loops),
            loops: None,
            engine: EngineChoice::Both,
            out: None,
            trace: None,
            strict: false,
        }
    }

    pub fn resolve_spec(&self) -> Result<GameSpec, HarnessError> {
        let mut spec = match &self.spec_path {
            Some(p) => GameSpec::load(p)?,
            None => sample_experiment(self.seed, &self.preset),
        };
        if let Some(l) = self.loops {
            spec.loops = l;
        }
        Ok(spec)
    }
}

/// Step budget for a GNE run of `loops` loops.
pub fn step_budget(loops: usize) -> usize {
    200 * (loops + 1)
}

pub struct PsystemRun {
    pub trajectory: Trajectory,
    pub stages: StageReport,
    /// `None` when `L = 0` and nothing was executed.
    pub trace: Option<Trace>,
}

impl PsystemRun {
    pub fn steps(&self) -> usize {
        self.trace.as_ref().map_or(0, |t| t.steps_executed())
    }
}

fn initial_only(spec: &GameSpec) -> Result<Trajectory, HarnessError> {
    Ok(simulate(&GameSpec {
        loops: 0,
        ..spec.clone()
    })?)
}

/// Builds and runs the GNE P system, then reads its trajectory back.
pub fn run_psystem(spec: &GameSpec, strict: bool) -> Result<PsystemRun, HarnessError> {
    if spec.loops == 0 {
        let diags = crate::builder::validate_game(spec);
        if !diags.is_empty() {
            return Err(BuildError::InvalidGame(diags).into());
        }
        return Ok(PsystemRun {
            trajectory: initial_only(spec)?,
            stages: StageReport::default(),
            trace: None,
        });
    }
    let sys = build_gne_system(spec)?;
    let engine = Engine::new(sys)?;
    let budget = step_budget(spec.loops);
    let trace = engine.run(RunOptions::new(budget).strict(strict))?;
    let (trajectory, stages) = psystem_trajectory(spec, &trace);
    if trace.halting == Halting::BudgetExhausted {
        return Err(HarnessError::BudgetExhausted {
            budget,
            loops_done: stages.loops.iter().filter(|l| l.exit_done.is_some()).count(),
        });
    }
    if !stages.failures.is_empty() {
        return Err(HarnessError::StageFailure(stages.failures));
    }
    Ok(PsystemRun {
        trajectory,
        stages,
        trace: Some(trace),
    })
}

/// Runs both engines and locates the first disagreement.
pub fn compare_engines(spec: &GameSpec, strict: bool) -> Result<DiffReport, HarnessError> {
    compare_with_rounding(spec, &Rounding::for_spec(spec), strict)
}

/// As [`compare_engines`] but with the oracle's rounding thresholds
/// overridden, for fault injection.
pub fn compare_with_rounding(
    spec: &GameSpec,
    rounding: &Rounding,
    strict: bool,
) -> Result<DiffReport, HarnessError> {
    let ps = run_psystem(spec, strict)?;
    let oracle = simulate_with(spec, rounding)?;
    Ok(compare_trajectories(&ps.trajectory, &oracle))
}

/// Loop index and player of every nonzero err tally.
pub fn err_reports(t: &Trajectory) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for (loop_index, st) in t.states.iter().enumerate() {
        for (k, &e) in st.err.iter().enumerate() {
            if e > 0 {
                out.push((loop_index, k + 1, e));
            }
        }
    }
    out
}

/// Players whose counts do not sum to `R` in a state without err objects.
pub fn conservation_failures(t: &Trajectory, r: u64) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for (loop_index, st) in t.states.iter().enumerate() {
        for k in 1..=t.index.players() {
            if st.err[k - 1] > 0 {
                continue;
            }
            let total = population_total(t, st, k);
            if total != r {
                out.push((loop_index, k, total));
            }
        }
    }
    out
}

fn population_total(t: &Trajectory, st: &StateZ, k: usize) -> u64 {
    t.index
        .entries
        .iter()
        .zip(&st.counts)
        .filter(|(e, _)| e.k == k)
        .map(|(_, &c)| c)
        .sum()
}

pub struct GneOutcome {
    pub spec: GameSpec,
    pub psystem: Option<PsystemRun>,
    pub oracle: Option<Trajectory>,
    pub diff: Option<DiffReport>,
    pub report: String,
}

impl GneOutcome {
    /// True when nothing the report lists counts as a failure.
    pub fn ok(&self) -> bool {
        self.diff.as_ref().is_none_or(|d| d.agrees())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn describe(out: &mut String, name: &str, t: &Trajectory, r: u64) {
    let final_counts: Vec<String> = t.final_state().counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(
        out,
        "{name}: {} loops, final counts {}",
        t.loops.len(),
        final_counts.join(" ")
    );
    for (loop_index, k, e) in err_reports(t) {
        let _ = writeln!(out, "{name}: loop {loop_index} player {k}: {e} err objects");
    }
    for (loop_index, k, total) in conservation_failures(t, r) {
        let _ = writeln!(out, "{name}: loop {loop_index} player {k}: counts sum to {total}");
    }
}

/// Runs the selected engines on the configured instance and writes
/// `spec.toml`, `psystem.csv`, `oracle.csv`, `diff.txt` and `report.txt`
/// (whichever apply) to the output directory.
pub fn run_gne(config: &ExperimentConfig) -> Result<GneOutcome, HarnessError> {
    let spec = config.resolve_spec()?;
    let mut report = String::new();
    let _ = writeln!(
        report,
        "instance: N={} T={} L={} R={}",
        spec.players, spec.slots, spec.loops, spec.r_disc
    );

    let psystem = match config.engine {
        EngineChoice::PSystem | EngineChoice::Both => Some(run_psystem(&spec, config.strict)?),
        EngineChoice::Oracle => None,
    };
    let oracle = match config.engine {
        EngineChoice::Oracle | EngineChoice::Both => Some(simulate(&spec)?),
        EngineChoice::PSystem => None,
    };
    if let Some(ps) = &psystem {
        let _ = writeln!(report, "psystem: {} steps", ps.steps());
        if !ps.stages.loops.is_empty() {
            let _ = write!(report, "{}", ps.stages);
        }
        describe(&mut report, "psystem", &ps.trajectory, spec.r_disc);
    }
    if let Some(t) = &oracle {
        describe(&mut report, "oracle", t, spec.r_disc);
    }
    let diff = match (&psystem, &oracle) {
        (Some(ps), Some(o)) => {
            let d = compare_trajectories(&ps.trajectory, o);
            let _ = write!(report, "{d}");
            Some(d)
        }
        _ => None,
    };

    if let Some(dir) = &config.out {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        write_file(&dir.join("spec.toml"), &spec.to_toml()?)?;
        if let Some(ps) = &psystem {
            write_file(&dir.join("psystem.csv"), &ps.trajectory.to_csv())?;
        }
        if let Some(t) = &oracle {
            write_file(&dir.join("oracle.csv"), &t.to_csv())?;
        }
        if let Some(d) = &diff {
            // empty on agreement
            let body = if d.agrees() { String::new() } else { d.to_string() };
            write_file(&dir.join("diff.txt"), &body)?;
        }
        write_file(&dir.join("report.txt"), &report)?;
    }
    if let (Some(path), Some(trace)) = (&config.trace, psystem.as_ref().and_then(|p| p.trace.as_ref())) {
        write_file(path, &trace.export_steps())?;
    }

    Ok(GneOutcome {
        spec,
        psystem,
        oracle,
        diff,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultReport {
    pub m: u64,
    pub n: u64,
    pub d_count: u64,
    pub f_count: u64,
    pub steps: usize,
    pub halted: bool,
    /// `1 + 6⌈log₂ m⌉` for `m ≥ 2`.
    pub bound: Option<u64>,
    pub failures: Vec<String>,
}

impl MultReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for MultReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} x {} = {} in {} steps",
            self.m, self.n, self.d_count, self.steps
        )?;
        if let Some(b) = self.bound {
            write!(f, " (bound {b})")?;
        }
        writeln!(f)?;
        for msg in &self.failures {
            writeln!(f, "FAIL {msg}")?;
        }
        Ok(())
    }
}

/// Builds and runs the multiplier for `m · n` and checks product and step
/// count.
pub fn run_mult(m: u64, n: u64) -> Result<MultReport, HarnessError> {
    let engine = Engine::new(build_mult_system(m, n))?;
    let budget = 16 + 6 * 64;
    let trace = engine.run(RunOptions::new(budget).strict(true))?;
    let env = trace.final_config().environment();
    let d_count = env.count(Symbol::plain("d"));
    let f_count = env.count(Symbol::plain("f"));
    let steps = trace.steps_executed();
    let halted = trace.halting == Halting::Quiescent;
    let bound = mult_step_bound(m);

    let mut failures = Vec::new();
    if !halted {
        failures.push(format!("did not halt within {budget} steps"));
    }
    if d_count != m * n {
        failures.push(format!("product {d_count}, expected {}", m * n));
    }
    match (m, bound) {
        (0, _) if steps != 5 => failures.push(format!("{steps} steps, expected 5")),
        (1, _) if steps != 7 => failures.push(format!("{steps} steps, expected 7")),
        (_, Some(b)) if steps as u64 > b => {
            failures.push(format!("{steps} steps exceeds the bound {b}"))
        }
        _ => {}
    }
    Ok(MultReport {
        m,
        n,
        d_count,
        f_count,
        steps,
        halted,
        bound,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mult_examples() {
        let r = run_mult(0, 9).unwrap();
        assert_eq!((r.d_count, r.steps), (0, 5));
        assert!(r.ok());
        let r = run_mult(1, 9).unwrap();
        assert_eq!((r.d_count, r.steps), (9, 7));
        let r = run_mult(37, 21).unwrap();
        assert_eq!(r.d_count, 777);
        assert!(r.steps <= 37);
        assert!(r.ok());
    }

    #[test]
    fn mult_bound_violation_is_reported() {
        // powers of two take one halving round more than the bound allows
        let r = run_mult(4, 3).unwrap();
        assert_eq!(r.d_count, 12);
        assert_eq!(r.steps, 19);
        assert!(!r.ok());
    }

    #[test]
    fn zero_loops_gives_initial_distribution() {
        let mut cfg = ExperimentConfig::preset(5, 0);
        cfg.engine = EngineChoice::Both;
        let out = run_gne(&cfg).unwrap();
        let ps = out.psystem.unwrap();
        assert_eq!(ps.steps(), 0);
        assert_eq!(ps.trajectory.states.len(), 1);
        assert_eq!(ps.trajectory.to_csv().lines().count(), 9);
        assert!(out.diff.unwrap().agrees());
    }

    #[test]
    fn duopoly_agrees() {
        let mut spec = sample_experiment(11, &Preset::duopoly(10));
        spec.loops = 10;
        let d = compare_engines(&spec, true).unwrap();
        assert!(d.agrees(), "{d}");
        assert_eq!(d.loops_compared, 10);
    }

    #[test]
    fn perturbed_threshold_localizes_to_stage_two() {
        let spec = sample_experiment(2, &Preset::experiment(2));
        let mut r = Rounding::for_spec(&spec);
        r.sums = 50;
        let d = compare_with_rounding(&spec, &r, false).unwrap();
        let first = d.first.expect("perturbed oracle must diverge");
        assert_eq!((first.loop_index, first.stage, first.quantity), (1, 2, "sum"));
        assert_eq!(first.psystem + 1, first.oracle);
    }

    #[test]
    fn engine_choice_parses() {
        assert_eq!("both".parse::<EngineChoice>().unwrap(), EngineChoice::Both);
        assert!("x".parse::<EngineChoice>().is_err());
    }
}
