use super::game::{shape_errors, GameSpec, StrategyIndex};
use crate::error::BuildError;

/// Integer payoff coefficients in units of `1/R_disc`.
///
/// The payoff of strategy `l` is `-(kappa_mag[l] + Σ_{j≠l} a[l][j] z̃_j + b[l] z̃_l) / R`
/// with `z̃` the strategy counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffCoefficients {
    pub n: usize,
    pub index: StrategyIndex,
    pub kappa_mag: Vec<i64>,
    /// Off-diagonal couplings; the diagonal is always zero.
    pub a: Vec<Vec<i64>>,
    pub b: Vec<i64>,
}

// Absorbs decimal representation error, e.g. 0.29 * 100 = 28.999999999999996.
const FLOOR_SLACK: f64 = 1e-9;

pub(crate) fn floor_coeff(name: impl FnOnce() -> String, x: f64) -> Result<i64, BuildError> {
    if x < -FLOOR_SLACK {
        return Err(BuildError::NegativeCoefficient {
            name: name(),
            value: x,
        });
    }
    let f = (x + FLOOR_SLACK).floor();
    if !f.is_finite() || f >= i64::MAX as f64 {
        return Err(BuildError::Overflow {
            name: name(),
            value: x,
        });
    }
    Ok(f.max(0.0) as i64)
}

/// Entry `(j, l)` of `S = diag(C^kᵀ D C^k) + CᵀDC`, by index.
pub fn s_entry(spec: &GameSpec, index: &StrategyIndex, j: usize, l: usize) -> f64 {
    let ej = &index.entries[j];
    let el = &index.entries[l];
    let mut s = 0.0;
    if ej.slot == el.slot {
        s += spec.d_diag[ej.slot - 1];
    }
    if j == l {
        s += spec.d_diag[ej.slot - 1];
    }
    s
}

/// Floors the real coefficients of the payoff map into integer multiplicities.
/// Accepts single-strategy players so hand fixtures stay small; the shape
/// checks still apply.
pub fn payoff_coefficients(spec: &GameSpec) -> Result<PayoffCoefficients, BuildError> {
    let diags = shape_errors(spec);
    if !diags.is_empty() {
        return Err(BuildError::InvalidGame(diags));
    }
    let index = spec.index();
    let n = index.len();
    let r = spec.r_disc as f64;
    let mut kappa_mag = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut a = vec![vec![0i64; n]; n];
    for (l, e) in index.entries.iter().enumerate() {
        let kappa = r * (spec.jbar[e.slot - 1] + e.beta);
        kappa_mag.push(floor_coeff(|| format!("kappa[{}]", l + 1), kappa)?);
        let diag = s_entry(spec, &index, l, l) * e.mass + e.alpha * e.mass;
        b.push(floor_coeff(|| format!("b[{}]", l + 1), diag)?);
        for (j, row) in a.iter_mut().enumerate() {
            if j != l {
                let v = s_entry(spec, &index, j, l) * e.mass;
                row[l] = floor_coeff(|| format!("a[{},{}]", j + 1, l + 1), v)?;
            }
        }
    }
    Ok(PayoffCoefficients {
        n,
        index,
        kappa_mag,
        a,
        b,
    })
}

/// `(⌊R/n⌋, …, R − (n−1)⌊R/n⌋)`.
pub fn initial_distribution(nk: usize, r_disc: u64) -> Vec<u64> {
    if nk == 0 {
        return Vec::new();
    }
    let share = r_disc / nk as u64;
    let mut out = vec![share; nk];
    out[nk - 1] = r_disc - share * (nk as u64 - 1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::game::experiment_strategy_sets;

    fn zeros() -> GameSpec {
        GameSpec {
            players: 3,
            slots: 5,
            strategies: experiment_strategy_sets(),
            d_diag: vec![0.0; 5],
            jbar: vec![0.0; 5],
            alpha: vec![vec![0.0; 2], vec![0.0; 3], vec![0.0; 3]],
            beta: vec![vec![0.0; 2], vec![0.0; 3], vec![0.0; 3]],
            mass: vec![3.0; 3],
            r_disc: 100,
            loops: 1,
        }
    }

    #[test]
    fn zero_cost_gives_zero_coefficients() {
        let c = payoff_coefficients(&zeros()).unwrap();
        assert_eq!(c.n, 8);
        assert!(c.kappa_mag.iter().all(|&x| x == 0));
        assert!(c.b.iter().all(|&x| x == 0));
        assert!(c.a.iter().flatten().all(|&x| x == 0));
    }

    #[test]
    fn single_slot_fixture() {
        let g = GameSpec {
            players: 1,
            slots: 1,
            strategies: vec![vec![1]],
            d_diag: vec![1.0],
            jbar: vec![0.0],
            alpha: vec![vec![0.5]],
            beta: vec![vec![0.0]],
            mass: vec![1.0],
            r_disc: 100,
            loops: 1,
        };
        let c = payoff_coefficients(&g).unwrap();
        assert_eq!(c.b, vec![2]);
        assert_eq!(c.kappa_mag, vec![0]);
        assert_eq!(c.a, vec![vec![0]]);
        let idx = g.index();
        assert_eq!(s_entry(&g, &idx, 0, 0), 2.0);
    }

    #[test]
    fn shared_slot_couples_players() {
        let mut g = zeros();
        g.d_diag = vec![0.5; 5];
        g.jbar = vec![2.29; 5];
        let c = payoff_coefficients(&g).unwrap();
        // slot 3 is used by l=1 (player 1) and l=4 (player 2)
        assert_eq!(c.a[0][3], 1);
        assert_eq!(c.a[3][0], 1);
        // slot 5 vs slot 3: no coupling
        assert_eq!(c.a[1][0], 0);
        assert_eq!(c.kappa_mag[0], 229);
        assert_eq!(c.b[0], 3);
    }

    #[test]
    fn negative_input_is_sign_error() {
        let mut g = zeros();
        g.beta[0][0] = -1.0;
        // shape validation catches it first
        assert!(matches!(payoff_coefficients(&g), Err(BuildError::InvalidGame(_))));
        assert!(matches!(
            floor_coeff(|| "x".into(), -0.5),
            Err(BuildError::NegativeCoefficient { .. })
        ));
        assert!(matches!(
            floor_coeff(|| "x".into(), 1e30),
            Err(BuildError::Overflow { .. })
        ));
    }

    #[test]
    fn distribution_examples() {
        assert_eq!(initial_distribution(3, 100), vec![33, 33, 34]);
        assert_eq!(initial_distribution(2, 100), vec![50, 50]);
        assert_eq!(initial_distribution(4, 100), vec![25, 25, 25, 25]);
        for nk in 2..=50 {
            assert_eq!(initial_distribution(nk, 100).iter().sum::<u64>(), 100);
        }
    }
}
