//! Cross-module properties over randomly shaped instances.

use std::collections::HashSet;

use crate::builder::{
    build_gne_system, initial_distribution, payoff_coefficients, GameSpec,
};
use crate::harness::{compare_engines, sample_experiment, Preset, SampleRanges};
use crate::oracle::{dense_coefficients, discrete_update};
use crate::pspec;
use proptest::prelude::*;

/// Random instance shape: 2..=3 players over 2..=4 slots, each with 2..=3
/// strategies.
fn arb_spec(max_loops: usize) -> impl Strategy<Value = GameSpec> {
    (2..=4usize, 2..=3usize)
        .prop_flat_map(move |(slots, players)| {
            let set = prop::sample::subsequence((1..=slots).collect::<Vec<_>>(), 2..=slots.min(3));
            (
                Just(slots),
                prop::collection::vec(set, players),
                any::<u64>(),
                1..=max_loops,
            )
        })
        .prop_map(|(slots, strategies, seed, loops)| {
            let preset = Preset {
                slots,
                strategies,
                ranges: SampleRanges::EXPERIMENT,
                r_disc: 100,
                loops,
            };
            sample_experiment(seed, &preset)
        })
}

proptest! {
    #[test]
    fn built_system_is_well_formed(spec in arb_spec(3)) {
        let sys = build_gne_system(&spec).unwrap();
        prop_assert_eq!(pspec::validate(&sys), Vec::<String>::new());
        let n: usize = spec.strategies.iter().map(Vec::len).sum();
        // skin, P, then per player its membrane and accumulator, nine per strategy
        prop_assert_eq!(sys.tree.count(), 2 + 2 * spec.players + 9 * n);
    }

    #[test]
    fn strategy_index_is_a_bijection(spec in arb_spec(1)) {
        let index = spec.index();
        let n: usize = spec.strategies.iter().map(Vec::len).sum();
        prop_assert_eq!(index.len(), n);
        let mut seen = HashSet::new();
        for (pos, e) in index.entries.iter().enumerate() {
            prop_assert_eq!(e.l, pos + 1);
            prop_assert!(seen.insert((e.k, e.slot)));
            prop_assert_eq!(index.lookup(e.k, e.slot).map(|x| x.l), Some(e.l));
        }
        for k in 1..=spec.players {
            let slots: Vec<usize> = index.player(k).iter().map(|e| e.slot).collect();
            let mut sorted = spec.strategies[k - 1].clone();
            sorted.sort_unstable();
            prop_assert_eq!(slots, sorted);
        }
    }

    #[test]
    fn dense_and_builder_coefficients_agree(spec in arb_spec(1)) {
        let c = payoff_coefficients(&spec).unwrap();
        let (kappa, a, b) = dense_coefficients(&spec).unwrap();
        prop_assert_eq!(c.kappa_mag, kappa);
        prop_assert_eq!(c.a, a);
        prop_assert_eq!(c.b, b);
    }

    #[test]
    fn initial_distribution_floors_then_fills_last(nk in 1..10usize, r in 1..1000u64) {
        let d = initial_distribution(nk, r);
        prop_assert_eq!(d.iter().sum::<u64>(), r);
        let share = r / nk as u64;
        prop_assert!(d[..nk - 1].iter().all(|&c| c == share));
        prop_assert!(d[nk - 1] >= share);
    }

    #[test]
    fn update_always_renormalizes(
        raw in prop::collection::vec(0..100u64, 2..=3),
        delta in prop::collection::vec(-150..150i64, 3),
    ) {
        // any split of R = 100 into raw.len() parts
        let total: u64 = raw.iter().sum::<u64>().max(1);
        let mut z: Vec<u64> = raw.iter().map(|x| x * 100 / total).collect();
        let short = 100 - z.iter().sum::<u64>();
        z[0] += short;
        let (out, _err) = discrete_update(&z, &delta[..z.len()], 100);
        prop_assert_eq!(out.iter().sum::<u64>(), 100);
        prop_assert!(out.iter().all(|&c| c <= 100));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_instances_match_the_oracle(spec in arb_spec(2)) {
        let d = compare_engines(&spec, true).unwrap();
        prop_assert!(d.agrees(), "{}", d);
    }
}
