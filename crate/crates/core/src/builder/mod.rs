//! Compilation of game instances into P systems.

mod coeffs;
mod game;
mod gne;
mod mult;
mod stages;

pub use coeffs::{initial_distribution, payoff_coefficients, s_entry, PayoffCoefficients};
pub use game::{experiment_strategy_sets, validate_game, GameSpec, StrategyEntry, StrategyIndex};
pub use mult::{build_mult_system, mult_step_bound, mult_step_count};
pub use gne::{
    agent, build_gne_system, exit_symbol, parse_rule_id, player_label, strategy_label, RuleTag,
};
pub use stages::{stage_boundaries, LoopTiming, StageReport};
