//! Direct numerical reference for the dynamics the P system computes.
//!
//! The continuous side uses dense matrices built straight from the game
//! definition (`C`, `D`, `M`, `R = √D C`), independent of the builder's
//! index arithmetic. The discrete side ([`simulate`]) reproduces the rule
//! pipeline count for count.

mod discrete;

use nalgebra::{DMatrix, DVector};

use crate::builder::{GameSpec, StrategyIndex};
use crate::error::{BuildError, OracleError};

pub use discrete::{
    count_residual, discrete_update, loop_step, simulate, simulate_with, LoopRecord, Rounding,
    StateZ, Trajectory, CSV_HEADER,
};

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), OracleError> {
    if v.len() != expected {
        return Err(OracleError::Shape {
            what,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

/// Dense matrices of one game instance.
#[derive(Debug, Clone)]
pub struct DenseGame {
    pub index: StrategyIndex,
    /// `T × n` slot assignment `[C¹ … Cᴺ]`.
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// `diag(m^k 𝟙)`.
    pub m: DMatrix<f64>,
    /// `√D C`.
    pub r: DMatrix<f64>,
    pub jbar: DVector<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl DenseGame {
    pub fn new(spec: &GameSpec) -> Result<DenseGame, OracleError> {
        let shape = crate::builder::validate_game(spec);
        if shape.iter().any(|d| !d.contains("at least 2 are required")) {
            return Err(BuildError::InvalidGame(shape).into());
        }
        let index = spec.index();
        let n = index.len();
        let t = spec.slots;
        let mut c = DMatrix::zeros(t, n);
        for (col, e) in index.entries.iter().enumerate() {
            c[(e.slot - 1, col)] = 1.0;
        }
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.d_diag));
        let sqrt_d = d.map(f64::sqrt);
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            index.entries.iter().map(|e| e.mass),
        ));
        Ok(DenseGame {
            r: &sqrt_d * &c,
            jbar: DVector::from_column_slice(&spec.jbar),
            alpha: DVector::from_iterator(n, index.entries.iter().map(|e| e.alpha)),
            beta: DVector::from_iterator(n, index.entries.iter().map(|e| e.beta)),
            index,
            c,
            d,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.index.len()
    }

    /// `RᵀR`.
    pub fn rtr(&self) -> DMatrix<f64> {
        self.r.transpose() * &self.r
    }

    /// `CᵀDC`.
    pub fn ctdc(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.d * &self.c
    }

    /// `blockdiag(C^kᵀ D C^k)`.
    pub fn own_block(&self) -> DMatrix<f64> {
        let full = self.ctdc();
        let n = self.n();
        DMatrix::from_fn(n, n, |a, b| {
            if self.index.entries[a].k == self.index.entries[b].k {
                full[(a, b)]
            } else {
                0.0
            }
        })
    }

    /// `S = blockdiag(C^kᵀ D C^k) + RᵀR`.
    pub fn s(&self) -> DMatrix<f64> {
        self.own_block() + self.rtr()
    }
}

/// Largest entrywise relative gap between `RᵀR` and `CᵀDC`.
pub fn gram_identity_gap(spec: &GameSpec) -> Result<f64, OracleError> {
    let g = DenseGame::new(spec)?;
    let (a, b) = (g.rtr(), g.ctdc());
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max))
}

/// `J(x) = DCx + J̄` for a per-strategy energy vector `x`.
pub fn pricing(spec: &GameSpec, x: &[f64]) -> Result<Vec<f64>, OracleError> {
    let g = DenseGame::new(spec)?;
    check_len("x", x, g.n())?;
    let j = &g.d * &g.c * DVector::from_column_slice(x) + &g.jbar;
    Ok(j.iter().copied().collect())
}

/// `Q^k(x^k) = Σ_i (α_i/2) x_i² + β_i x_i`, with `xk` in the player's
/// strategy order (ascending slot).
pub fn individual_cost(spec: &GameSpec, k: usize, xk: &[f64]) -> Result<f64, OracleError> {
    if k == 0 || k > spec.players {
        return Err(OracleError::NoSuchPlayer(k));
    }
    let entries = spec.index();
    let entries = entries.player(k);
    check_len("xk", xk, entries.len())?;
    Ok(entries
        .iter()
        .zip(xk)
        .map(|(e, x)| 0.5 * e.alpha * x * x + e.beta * x)
        .sum())
}

/// `p(z) = −S M z − CᵀJ̄ − α⊙Mz − β`.
pub fn payoff(spec: &GameSpec, z: &[f64]) -> Result<Vec<f64>, OracleError> {
    let g = DenseGame::new(spec)?;
    check_len("z", z, g.n())?;
    let mz = &g.m * DVector::from_column_slice(z);
    let p = -(g.s() * &mz) - g.c.transpose() * &g.jbar - g.alpha.component_mul(&mz) - &g.beta;
    Ok(p.iter().copied().collect())
}

/// The same payoff through the market price:
/// `−Cᵀ J(Mz) − blockdiag(C^kᵀDC^k) Mz − α⊙Mz − β`.
pub fn payoff_decomposed(spec: &GameSpec, z: &[f64]) -> Result<Vec<f64>, OracleError> {
    let g = DenseGame::new(spec)?;
    check_len("z", z, g.n())?;
    let mz = &g.m * DVector::from_column_slice(z);
    let price = DVector::from_vec(pricing(spec, mz.as_slice())?);
    let p = -(g.c.transpose() * price) - g.own_block() * &mz - g.alpha.component_mul(&mz) - &g.beta;
    Ok(p.iter().copied().collect())
}

/// `(kappa_mag, a, b)` as plain integer tables.
pub type DenseCoefficients = (Vec<i64>, Vec<Vec<i64>>, Vec<i64>);

/// Floored integer coefficients from the dense route, as
/// `(kappa_mag, a, b)`; must agree with the builder's.
pub fn dense_coefficients(spec: &GameSpec) -> Result<DenseCoefficients, OracleError> {
    let g = DenseGame::new(spec)?;
    let n = g.n();
    let r = spec.r_disc as f64;
    let fl = |x: f64| (x + 1e-9).floor() as i64;
    let sm = g.s() * &g.m;
    let constant = g.c.transpose() * &g.jbar + &g.beta;
    let kappa = constant.iter().map(|x| fl(r * x)).collect();
    let a = (0..n)
        .map(|j| (0..n).map(|l| if j == l { 0 } else { fl(sm[(j, l)]) }).collect())
        .collect();
    let b = (0..n).map(|l| fl(sm[(l, l)] + g.alpha[l] * g.m[(l, l)])).collect();
    Ok((kappa, a, b))
}

/// `p̂_j = p_j − Σ_l z_l p_l` within each population.
pub fn excess_payoff(p: &[f64], z: &[f64], spec: &GameSpec) -> Result<Vec<f64>, OracleError> {
    let index = spec.index();
    check_len("p", p, index.len())?;
    check_len("z", z, index.len())?;
    let mut out = vec![0.0; p.len()];
    for k in 1..=index.players() {
        let range = block(&index, k);
        let mean: f64 = range.clone().map(|l| z[l] * p[l]).sum();
        for l in range {
            out[l] = p[l] - mean;
        }
    }
    Ok(out)
}

/// `ż_i = [p̂_i]_+ − z_i Σ_j [p̂_j]_+`.
pub fn bnn_rate(phat: &[f64], z: &[f64], spec: &GameSpec) -> Result<Vec<f64>, OracleError> {
    let index = spec.index();
    check_len("phat", phat, index.len())?;
    check_len("z", z, index.len())?;
    let mut out = vec![0.0; z.len()];
    for k in 1..=index.players() {
        let range = block(&index, k);
        let total: f64 = range.clone().map(|l| phat[l].max(0.0)).sum();
        for l in range {
            out[l] = phat[l].max(0.0) - z[l] * total;
        }
    }
    Ok(out)
}

/// `max_{k,i} |[p̂_i]_+ − z_i Σ_j [p̂_j]_+|` at `z = z̃ / R`.
pub fn gne_residual(state: &[u64], spec: &GameSpec) -> Result<f64, OracleError> {
    let z: Vec<f64> = state.iter().map(|&c| c as f64 / spec.r_disc as f64).collect();
    let p = payoff(spec, &z)?;
    let phat = excess_payoff(&p, &z, spec)?;
    let rate = bnn_rate(&phat, &z, spec)?;
    Ok(rate.iter().fold(0.0, |acc, x| acc.max(x.abs())))
}

pub(crate) fn block(index: &StrategyIndex, k: usize) -> std::ops::Range<usize> {
    let start = index.offsets[k - 1];
    start..start + index.player(k).len()
}
