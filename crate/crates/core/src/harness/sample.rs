use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::builder::{experiment_strategy_sets, GameSpec};

/// Deterministic uniform sampler.
///
/// The generator is SplitMix64: the state advances by `0x9E3779B97F4A7C15`
/// and each output is the state mixed by
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
/// `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`,
/// `z ^ (z >> 31)`.
/// A uniform real in `[0, 1)` is `(x >> 11) · 2⁻⁵³`, and samples in `[lo, hi]`
/// are rounded to four decimals.
pub struct Sampler {
    rng: SplitMix64,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            rng: SplitMix64::from_seed(seed.to_le_bytes()),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self, (lo, hi): (f64, f64)) -> f64 {
        quantize(lo + (hi - lo) * self.uniform())
    }
}

/// Rounds to four decimal places.
pub fn quantize(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRanges {
    pub d_diag: (f64, f64),
    pub jbar: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub mass: (f64, f64),
}

impl SampleRanges {
    /// Ranges of the reference experiment.
    pub const EXPERIMENT: SampleRanges = SampleRanges {
        d_diag: (0.0, 1.0),
        jbar: (2.0, 4.0),
        alpha: (1.0, 10.0),
        beta: (0.0, 1.0),
        mass: (3.0, 4.0),
    };
}

/// Shape of a sampled instance; the numbers come from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub slots: usize,
    pub strategies: Vec<Vec<usize>>,
    pub ranges: SampleRanges,
    pub r_disc: u64,
    pub loops: usize,
}

impl Preset {
    /// Three players over five slots with strategy sets {3,5}, {1,3,5}, {1,2,4}.
    pub fn experiment(loops: usize) -> Preset {
        Preset {
            slots: 5,
            strategies: experiment_strategy_sets(),
            ranges: SampleRanges::EXPERIMENT,
            r_disc: 100,
            loops,
        }
    }

    /// Two players with two strategies each over three slots.
    pub fn duopoly(loops: usize) -> Preset {
        Preset {
            slots: 3,
            strategies: vec![vec![1, 2], vec![2, 3]],
            ranges: SampleRanges::EXPERIMENT,
            r_disc: 100,
            loops,
        }
    }
}

/// Draws every real parameter of `preset` from its range. Order of draws:
/// `D_diag`, `Jbar`, then per player `alpha`, then per player `beta`, then
/// `mass`.
pub fn sample_experiment(seed: u64, preset: &Preset) -> GameSpec {
    let mut s = Sampler::new(seed);
    let r = preset.ranges;
    let players = preset.strategies.len();
    let d_diag = (0..preset.slots).map(|_| s.sample(r.d_diag)).collect();
    let jbar = (0..preset.slots).map(|_| s.sample(r.jbar)).collect();
    let alpha = preset
        .strategies
        .iter()
        .map(|st| st.iter().map(|_| s.sample(r.alpha)).collect())
        .collect();
    let beta = preset
        .strategies
        .iter()
        .map(|st| st.iter().map(|_| s.sample(r.beta)).collect())
        .collect();
    let mass = (0..players).map(|_| s.sample(r.mass)).collect();
    GameSpec {
        players,
        slots: preset.slots,
        strategies: preset.strategies.clone(),
        d_diag,
        jbar,
        alpha,
        beta,
        mass,
        r_disc: preset.r_disc,
        loops: preset.loops,
    }
}
