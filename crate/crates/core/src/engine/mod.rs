//! Execution of transition P systems with membrane polarization.
//!
//! Semantics implemented by [`Engine::step`]:
//!
//! * rules are visited in a fixed total order extending the priority
//!   relation (ties broken by declaration order) and each is applied as many
//!   times as the residual pre-step objects allow;
//! * a rule is skipped while any strictly higher-priority rule is still
//!   applicable at its membrane (strong priority);
//! * charges are matched against the pre-step configuration and all charge
//!   changes are committed after object rewriting, with at most one
//!   charge-changing application per membrane per step;
//! * objects produced in a step become visible in the next one.
//!
//! Objects sent out of the skin land in the environment region.

mod config;
mod step;
mod types;

pub use config::{read_region, Configuration, Structure};
pub use step::{
    maximal_step, rule_applicable, run, Application, Engine, Halting, RunOptions, StepRecord,
    Trace, TraceMode,
};
pub use types::{Charge, ChildPattern, MembraneNode, PSystem, Rule};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EngineError;
    use crate::multiset::Multiset;
    use crate::symbol::{Label, Symbol};

    fn ms(items: &[(&str, u64)]) -> Multiset {
        items.iter().map(|&(s, n)| (Symbol::plain(s), n)).collect()
    }

    fn two_level(skin: &[(&str, u64)], inner: &[(&str, u64)]) -> MembraneNode {
        MembraneNode::new("0")
            .with_contents(ms(skin))
            .with_child(MembraneNode::new("1").with_contents(ms(inner)))
    }

    #[test]
    fn charge_change_is_staged_after_rewriting() {
        // A rewrites at charge 0 while B flips the same membrane to minus.
        let mut sys = PSystem::new(two_level(&[], &[("a", 3), ("b", 1)]));
        sys.rules.push(
            Rule::evolve("A", "1", Charge::Neutral)
                .consume_in(ms(&[("a", 1)]))
                .produce_in(ms(&[("c", 1)])),
        );
        sys.rules.push(
            Rule::evolve("B", "1", Charge::Neutral)
                .to_charge(Charge::Minus)
                .consume_in(ms(&[("b", 1)])),
        );
        let cfg = Configuration::from_tree(&sys.tree).unwrap();
        let (next, rec) = maximal_step(&cfg, &sys).unwrap();
        assert_eq!(rec.applications.len(), 2);
        assert_eq!(next.charge(Label::new("1")).unwrap(), Charge::Minus);
        assert_eq!(next.contents(Label::new("1")).unwrap(), &ms(&[("c", 3)]));
    }

    #[test]
    fn produced_objects_wait_one_step() {
        let mut sys = PSystem::new(two_level(&[], &[("a", 1)]));
        sys.rules.push(
            Rule::evolve("A", "1", Charge::Neutral)
                .consume_in(ms(&[("a", 1)]))
                .produce_in(ms(&[("b", 1)])),
        );
        sys.rules.push(
            Rule::evolve("B", "1", Charge::Neutral)
                .consume_in(ms(&[("b", 1)]))
                .produce_in(ms(&[("c", 1)])),
        );
        let trace = run(&sys, 10, TraceMode::Full).unwrap();
        assert_eq!(trace.steps_executed(), 2);
        assert_eq!(trace.halting, Halting::Quiescent);
        assert_eq!(trace.snapshots.len(), 3);
    }

    #[test]
    fn one_charge_change_per_membrane() {
        let mut sys = PSystem::new(two_level(&[], &[("a", 2)]));
        sys.rules.push(
            Rule::evolve("A", "1", Charge::Neutral)
                .to_charge(Charge::Plus)
                .consume_in(ms(&[("a", 1)])),
        );
        let cfg = Configuration::from_tree(&sys.tree).unwrap();
        let (next, rec) = maximal_step(&cfg, &sys).unwrap();
        assert_eq!(rec.applications[0].count, 1);
        assert_eq!(next.contents(Label::new("1")).unwrap().count(Symbol::plain("a")), 1);
    }

    #[test]
    fn strong_priority_against_residual() {
        // hi needs a^2; lo takes a. With a^5: hi fires twice, lo once.
        let mut sys = PSystem::new(two_level(&[], &[("a", 5)]));
        sys.rules.push(
            Rule::evolve("lo", "1", Charge::Neutral)
                .consume_in(ms(&[("a", 1)]))
                .produce_in(ms(&[("l", 1)])),
        );
        sys.rules.push(
            Rule::evolve("hi", "1", Charge::Neutral)
                .consume_in(ms(&[("a", 2)]))
                .produce_in(ms(&[("h", 1)])),
        );
        sys.add_priority("hi", "lo");
        let cfg = Configuration::from_tree(&sys.tree).unwrap();
        let (next, _) = maximal_step(&cfg, &sys).unwrap();
        assert_eq!(next.contents(Label::new("1")).unwrap(), &ms(&[("h", 2), ("l", 1)]));
    }

    #[test]
    fn strict_mode_flags_competition() {
        let mut sys = PSystem::new(two_level(&[], &[("a", 1)]));
        for id in ["X", "Y"] {
            sys.rules.push(
                Rule::evolve(id, "1", Charge::Neutral)
                    .consume_in(ms(&[("a", 1)]))
                    .produce_in(ms(&[(id, 1)])),
            );
        }
        let engine = Engine::new(sys.clone()).unwrap();
        let err = engine.run(RunOptions::new(5).strict(true)).unwrap_err();
        assert!(matches!(err, EngineError::Ambiguity { .. }));
        // default mode resolves by declaration order
        let trace = engine.run(RunOptions::new(5)).unwrap();
        assert_eq!(trace.final_config().contents(Label::new("1")).unwrap(), &ms(&[("X", 1)]));
    }

    #[test]
    fn cyclic_priority_rejected() {
        let mut sys = PSystem::new(two_level(&[], &[]));
        for id in ["A", "B"] {
            sys.rules.push(Rule::evolve(id, "1", Charge::Neutral).consume_in(ms(&[("a", 1)])));
        }
        sys.add_priority("A", "B");
        sys.add_priority("B", "A");
        assert!(Engine::new(sys).is_err());
    }

    #[test]
    fn no_applicable_rule_is_a_fixpoint() {
        let mut sys = PSystem::new(two_level(&[("z", 1)], &[]));
        sys.rules.push(Rule::evolve("A", "1", Charge::Neutral).consume_in(ms(&[("a", 1)])));
        let cfg = Configuration::from_tree(&sys.tree).unwrap();
        let (next, rec) = maximal_step(&cfg, &sys).unwrap();
        assert!(rec.is_empty());
        assert_eq!(next, cfg);
    }

    #[test]
    fn applicability_predicate() {
        let rule = Rule::evolve("A", "1", Charge::Neutral).consume_in(ms(&[("a", 1)]));
        let cfg = Configuration::from_tree(&two_level(&[], &[])).unwrap();
        assert!(!rule_applicable(&rule, &cfg, Label::new("1")).unwrap());
        let cfg = Configuration::from_tree(&two_level(&[], &[("a", 1)])).unwrap();
        assert!(rule_applicable(&rule, &cfg, Label::new("1")).unwrap());
        assert!(rule_applicable(&rule, &cfg, Label::new("nope")).is_err());
    }
}
