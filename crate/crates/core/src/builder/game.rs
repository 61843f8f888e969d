use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SpecFileError;

fn default_r_disc() -> u64 {
    100
}

/// An energy-market game instance.
///
/// `alpha[k][j]` and `beta[k][j]` belong to the strategy `strategies[k][j]`
/// (a time slot in `1..=T`). Strategies are ranked by ascending slot when
/// assigning the global index `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(rename = "N")]
    pub players: usize,
    #[serde(rename = "T")]
    pub slots: usize,
    pub strategies: Vec<Vec<usize>>,
    #[serde(rename = "D_diag")]
    pub d_diag: Vec<f64>,
    #[serde(rename = "Jbar")]
    pub jbar: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    #[serde(rename = "R_disc", default = "default_r_disc")]
    pub r_disc: u64,
    #[serde(rename = "L")]
    pub loops: usize,
}

/// One strategy of one player, with its global position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyEntry {
    /// Player, 1-based.
    pub k: usize,
    /// Time slot, 1-based.
    pub slot: usize,
    /// Global index, 1-based.
    pub l: usize,
    /// Rank within the player's strategy set, 0-based.
    pub rank: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mass: f64,
}

/// The bijection (k, i) <-> l.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyIndex {
    pub entries: Vec<StrategyEntry>,
    /// `offsets[k-1]` = number of strategies of players before k.
    pub offsets: Vec<usize>,
}

impl StrategyIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of player `k` (1-based), ascending by slot.
    pub fn player(&self, k: usize) -> &[StrategyEntry] {
        let start = self.offsets[k - 1];
        let end = self
            .offsets
            .get(k)
            .copied()
            .unwrap_or(self.entries.len());
        &self.entries[start..end]
    }

    pub fn players(&self) -> usize {
        self.offsets.len()
    }

    pub fn lookup(&self, k: usize, slot: usize) -> Option<&StrategyEntry> {
        self.player(k).iter().find(|e| e.slot == slot)
    }
}

impl GameSpec {
    pub fn threshold(&self) -> u64 {
        self.r_disc / 2 + 1
    }

    /// Builds the strategy index. Assumes shapes are consistent.
    pub fn index(&self) -> StrategyIndex {
        let mut entries = Vec::new();
        let mut offsets = Vec::with_capacity(self.players);
        for (kk, strat) in self.strategies.iter().enumerate() {
            offsets.push(entries.len());
            let mut order: Vec<usize> = (0..strat.len()).collect();
            order.sort_by_key(|&j| strat[j]);
            for (rank, &j) in order.iter().enumerate() {
                entries.push(StrategyEntry {
                    k: kk + 1,
                    slot: strat[j],
                    l: entries.len() + 1,
                    rank,
                    alpha: self.alpha[kk][j],
                    beta: self.beta[kk][j],
                    mass: self.mass[kk],
                });
            }
        }
        StrategyIndex { entries, offsets }
    }

    pub fn load(path: &Path) -> Result<GameSpec, SpecFileError> {
        let text = std::fs::read_to_string(path)?;
        GameSpec::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<GameSpec, SpecFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, SpecFileError> {
        Ok(toml::to_string(self)?)
    }
}

/// Lists every violated game invariant; empty when the instance is valid.
pub fn validate_game(spec: &GameSpec) -> Vec<String> {
    let mut diags = Vec::new();
    if spec.players < 1 {
        diags.push("N must be at least 1".to_string());
    }
    if spec.slots < 1 {
        diags.push("T must be at least 1".to_string());
    }
    if spec.r_disc < 2 {
        diags.push(format!("R_disc = {} must be at least 2", spec.r_disc));
    }
    let check_vec = |name: &str, v: &[f64], len: usize, diags: &mut Vec<String>| {
        if v.len() != len {
            diags.push(format!("{name} has length {} but expected {len}", v.len()));
        }
        for (idx, x) in v.iter().enumerate() {
            if !x.is_finite() || *x < 0.0 {
                diags.push(format!("{name}[{idx}] = {x} must be finite and nonnegative"));
            }
        }
    };
    check_vec("D_diag", &spec.d_diag, spec.slots, &mut diags);
    check_vec("Jbar", &spec.jbar, spec.slots, &mut diags);
    if spec.mass.len() != spec.players {
        diags.push(format!(
            "mass has length {} but expected {}",
            spec.mass.len(),
            spec.players
        ));
    }
    for (k, m) in spec.mass.iter().enumerate() {
        if !m.is_finite() || *m <= 0.0 {
            diags.push(format!("mass of player {} = {m} must be positive", k + 1));
        }
    }
    if spec.strategies.len() != spec.players {
        diags.push(format!(
            "strategies lists {} players but N = {}",
            spec.strategies.len(),
            spec.players
        ));
    }
    for (k, strat) in spec.strategies.iter().enumerate() {
        let player = k + 1;
        if strat.len() < 2 {
            diags.push(format!(
                "player {player} has {} strategies; at least 2 are required",
                strat.len()
            ));
        }
        for &slot in strat {
            if slot < 1 || slot > spec.slots {
                diags.push(format!(
                    "player {player}: strategy slot {slot} outside 1..={}",
                    spec.slots
                ));
            }
        }
        let mut sorted = strat.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                diags.push(format!(
                    "player {player}: two strategies use time slot {} (row of C^k with more than one 1)",
                    w[0]
                ));
            }
        }
        for (name, table) in [("alpha", &spec.alpha), ("beta", &spec.beta)] {
            match table.get(k) {
                Some(v) => check_vec(&format!("{name}[{player}]"), v, strat.len(), &mut diags),
                None => diags.push(format!("{name} has no entry for player {player}")),
            }
        }
    }
    for (name, table) in [("alpha", &spec.alpha), ("beta", &spec.beta)] {
        if table.len() > spec.strategies.len() {
            diags.push(format!("{name} has more rows than players"));
        }
    }
    diags
}

/// Shape-only checks needed before any matrix arithmetic; strategy-count
/// requirements are not enforced here.
pub(crate) fn shape_errors(spec: &GameSpec) -> Vec<String> {
    validate_game(spec)
        .into_iter()
        .filter(|d| !d.contains("at least 2 are required"))
        .collect()
}

/// Strategy sets of the reference experiment: three players over five slots.
pub fn experiment_strategy_sets() -> Vec<Vec<usize>> {
    vec![vec![3, 5], vec![1, 3, 5], vec![1, 2, 4]]
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example() -> GameSpec {
        GameSpec {
            players: 3,
            slots: 5,
            strategies: experiment_strategy_sets(),
            d_diag: vec![0.5; 5],
            jbar: vec![3.0; 5],
            alpha: vec![vec![2.0; 2], vec![2.0; 3], vec![2.0; 3]],
            beta: vec![vec![0.5; 2], vec![0.5; 3], vec![0.5; 3]],
            mass: vec![3.5; 3],
            r_disc: 100,
            loops: 5,
        }
    }

    #[test]
    fn experiment_instance_is_valid() {
        assert!(validate_game(&example()).is_empty());
    }

    #[test]
    fn single_strategy_rejected() {
        let mut g = example();
        g.strategies[0] = vec![3];
        g.alpha[0] = vec![1.0];
        g.beta[0] = vec![1.0];
        let d = validate_game(&g);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("at least 2"));
    }

    #[test]
    fn shared_slot_rejected() {
        let mut g = example();
        g.strategies[1] = vec![1, 3, 3];
        let d = validate_game(&g);
        assert!(d.iter().any(|m| m.contains("time slot 3")), "{d:?}");
    }

    #[test]
    fn index_is_ascending_by_slot() {
        let mut g = example();
        g.strategies[1] = vec![5, 1, 3];
        g.alpha[1] = vec![5.0, 1.0, 3.0];
        let idx = g.index();
        let p2: Vec<_> = idx.player(2).iter().map(|e| (e.slot, e.l, e.alpha)).collect();
        assert_eq!(p2, vec![(1, 3, 1.0), (3, 4, 3.0), (5, 5, 5.0)]);
        assert_eq!(idx.len(), 8);
        assert_eq!(idx.lookup(3, 4).unwrap().l, 8);
    }

    #[test]
    fn toml_round_trip() {
        let g = example();
        let text = g.to_toml().unwrap();
        assert!(text.contains("D_diag"));
        assert_eq!(GameSpec::from_toml(&text).unwrap(), g);
    }
}
