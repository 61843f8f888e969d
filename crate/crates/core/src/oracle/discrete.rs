use super::block;
use crate::builder::{initial_distribution, payoff_coefficients, GameSpec, PayoffCoefficients, StrategyIndex};
use crate::error::OracleError;

pub const CSV_HEADER: &str = "loop,k,i,l,count,err_k";

/// Round-half-up thresholds used by the count pipeline, one per stage that
/// rounds. The defaults mirror the P system (`⌊R/2⌋ + 1` everywhere).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rounding {
    pub r: u64,
    /// Weighted payoff sums (stage 2).
    pub sums: u64,
    /// Products `z̃_i · Σq` (stage 4).
    pub products: u64,
    /// Euler increments (stage 5).
    pub update: u64,
}

impl Rounding {
    pub fn for_spec(spec: &GameSpec) -> Rounding {
        let h = spec.threshold();
        Rounding {
            r: spec.r_disc,
            sums: h,
            products: h,
            update: h,
        }
    }

    /// `x^R → 1` as often as possible, then `x^h → 1` on the remainder.
    fn div(&self, x: u64, h: u64) -> u64 {
        x / self.r + (x % self.r) / h
    }
}

/// Strategy counts `z̃` (global order) plus the err tally of the last update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateZ {
    pub counts: Vec<u64>,
    pub err: Vec<u64>,
}

/// Intermediate quantities of one loop, in the order the stages compute them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopRecord {
    /// Stage 1: payoff magnitudes `p̃_l`.
    pub payoff: Vec<u64>,
    /// Stage 2: rounded `Σ_i z̃_i p̃_i` per player.
    pub sums: Vec<u64>,
    /// Stage 3: `q_l = [s̃_k − p̃_l]_+`.
    pub q: Vec<u64>,
    /// Stage 4: `ż̃_l = q_l − ρ(z̃_l Σq)`.
    pub zdot: Vec<i64>,
    /// Stage 5: rounded Euler increments.
    pub delta: Vec<i64>,
    pub state: StateZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub index: StrategyIndex,
    /// `L + 1` states, the initial distribution first.
    pub states: Vec<StateZ>,
    pub loops: Vec<LoopRecord>,
}

impl Trajectory {
    /// `loop,k,i,l,count,err_k`, one row per strategy per recorded state.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(','))
            .expect("writing to memory");
        for (t, st) in self.states.iter().enumerate() {
            for (e, count) in self.index.entries.iter().zip(&st.counts) {
                w.serialize((t, e.k, e.slot, e.l, count, st.err[e.k - 1]))
                    .expect("writing to memory");
            }
        }
        let bytes = w.into_inner().expect("writing to memory");
        String::from_utf8(bytes).expect("csv output is ascii")
    }

    pub fn final_state(&self) -> &StateZ {
        self.states.last().expect("initial state is always present")
    }
}

fn initial_state(index: &StrategyIndex, r: u64) -> StateZ {
    let mut counts = Vec::with_capacity(index.len());
    for k in 1..=index.players() {
        counts.extend(initial_distribution(index.player(k).len(), r));
    }
    StateZ {
        counts,
        err: vec![0; index.players()],
    }
}

/// Stage 5 for one population: Euler step, clamping to `[0, R]`, pooling of
/// overflow and deficit, then renormalization to exactly `R`.
///
/// `z` and `delta` hold the population's strategies in ascending slot order.
/// Returns the new counts and the number of `err` objects.
pub fn discrete_update(z: &[u64], delta: &[i64], r: u64) -> (Vec<u64>, u64) {
    let r_i = r as i64;
    let mut w = vec![0i64; z.len()];
    let mut compw = vec![0i64; z.len()];
    let mut excess = 0i64;
    let mut deficit = 0i64;
    for (idx, (&zi, &d)) in z.iter().zip(delta).enumerate() {
        let m = zi as i64 + d;
        if m < 0 {
            deficit += -m;
            compw[idx] = r_i;
            continue;
        }
        // p^R -> over w^R fires ⌊m/R⌋ times; only one comp^R set exists.
        let full = m / r_i;
        let rest = m % r_i;
        if full >= 1 {
            w[idx] = full * r_i;
            excess += rest;
        } else {
            w[idx] = rest;
            compw[idx] = r_i - rest;
        }
    }
    let cancel = excess.min(deficit);
    excess -= cancel;
    deficit -= cancel;
    for (wi, ci) in w.iter_mut().zip(compw.iter_mut()) {
        let x = excess.min(*ci);
        *wi += x;
        *ci -= x;
        excess -= x;
    }
    for (wi, ci) in w.iter_mut().zip(compw.iter_mut()) {
        let x = deficit.min(*wi);
        *wi -= x;
        *ci += x;
        deficit -= x;
    }
    let err = (excess + deficit) as u64;

    let mut v = r_i;
    let mut out: Vec<u64> = w
        .iter()
        .map(|&wi| {
            let take = wi.min(v);
            v -= take;
            take as u64
        })
        .collect();
    if let Some(first) = out.first_mut() {
        *first += v as u64;
    }
    (out, err)
}

/// One pass of stages 1–5 from `state`.
pub fn loop_step(
    coeffs: &PayoffCoefficients,
    rounding: &Rounding,
    state: &StateZ,
) -> LoopRecord {
    let n = coeffs.n;
    let index = &coeffs.index;
    let z: Vec<u128> = state.counts.iter().map(|&c| c as u128).collect();

    let payoff: Vec<u64> = (0..n)
        .map(|j| {
            let mut p = coeffs.kappa_mag[j] as u128 + coeffs.b[j] as u128 * z[j];
            for (l, (&a, &zl)) in coeffs.a[j].iter().zip(&z).enumerate() {
                if l != j {
                    p += a as u128 * zl;
                }
            }
            p as u64
        })
        .collect();

    let mut sums = Vec::with_capacity(index.players());
    let mut q = vec![0u64; n];
    let mut zdot = vec![0i64; n];
    let mut delta = vec![0i64; n];
    let mut counts = vec![0u64; n];
    let mut err = Vec::with_capacity(index.players());
    for k in 1..=index.players() {
        let range = block(index, k);
        let weighted: u128 = range.clone().map(|l| z[l] * payoff[l] as u128).sum();
        let s = rounding.div(weighted as u64, rounding.sums);
        sums.push(s);
        for l in range.clone() {
            q[l] = s.saturating_sub(payoff[l]);
        }
        let total_q: u64 = range.clone().map(|l| q[l]).sum();
        for l in range.clone() {
            let zneg = rounding.div(state.counts[l] * total_q, rounding.products);
            zdot[l] = q[l] as i64 - zneg as i64;
            let mag = rounding.div(zdot[l].unsigned_abs(), rounding.update) as i64;
            delta[l] = if zdot[l] < 0 { -mag } else { mag };
        }
        let (next, e) = discrete_update(&state.counts[range.clone()], &delta[range.clone()], rounding.r);
        counts[range].copy_from_slice(&next);
        err.push(e);
    }
    LoopRecord {
        payoff,
        sums,
        q,
        zdot,
        delta,
        state: StateZ { counts, err },
    }
}

/// Runs `spec.loops` loops with the P system's rounding.
pub fn simulate(spec: &GameSpec) -> Result<Trajectory, OracleError> {
    simulate_with(spec, &Rounding::for_spec(spec))
}

pub fn simulate_with(spec: &GameSpec, rounding: &Rounding) -> Result<Trajectory, OracleError> {
    let diags = crate::builder::validate_game(spec);
    if !diags.is_empty() {
        return Err(crate::error::BuildError::InvalidGame(diags).into());
    }
    let coeffs = payoff_coefficients(spec)?;
    let mut states = vec![initial_state(&coeffs.index, spec.r_disc)];
    let mut loops = Vec::with_capacity(spec.loops);
    for _ in 0..spec.loops {
        let rec = loop_step(&coeffs, rounding, states.last().expect("nonempty"));
        states.push(rec.state.clone());
        loops.push(rec);
    }
    Ok(Trajectory {
        index: coeffs.index,
        states,
        loops,
    })
}

/// Largest rounded Euler increment `|Δ_l|` the pipeline would apply at
/// `counts`; zero exactly when the state is a fixed point of the loop.
pub fn count_residual(spec: &GameSpec, counts: &[u64]) -> Result<u64, OracleError> {
    let coeffs = payoff_coefficients(spec)?;
    if counts.len() != coeffs.n {
        return Err(OracleError::Shape {
            what: "counts",
            expected: coeffs.n,
            got: counts.len(),
        });
    }
    let state = StateZ {
        counts: counts.to_vec(),
        err: vec![0; coeffs.index.players()],
    };
    let rec = loop_step(&coeffs, &Rounding::for_spec(spec), &state);
    Ok(rec.delta.iter().map(|d| d.unsigned_abs()).max().unwrap_or(0))
}
