use crate::engine::{Charge, ChildPattern, MembraneNode, PSystem, Rule};
use crate::multiset::Multiset;
use crate::symbol::{Label, Symbol};

use Charge::{Minus as M, Neutral as Z, Plus as P};

pub(crate) fn one(name: &str) -> Multiset {
    Multiset::from_pairs([(Symbol::plain(name), 1)])
}

pub(crate) fn many(items: &[(&str, u64)]) -> Multiset {
    Multiset::from_pairs(items.iter().map(|&(s, n)| (Symbol::plain(s), n)))
}

/// Where a multiplier lives and how its outputs are named.
pub(crate) struct MultLayout<'a> {
    /// Membrane playing the role of the skin `0`.
    pub outer: &'a str,
    /// Inner membrane `1` (halving side).
    pub halver: &'a str,
    /// Inner membrane `2` (collector).
    pub collector: &'a str,
    /// Object expelled by RS41, once per unit of the product.
    pub product: Multiset,
    /// Object expelled by RS39 when the run finishes.
    pub done: Multiset,
}

/// The 44 rules of the peasant multiplier plus its priorities, with rule
/// ids produced by `id(n)` for `n` in `1..=44`.
pub(crate) fn mult_rules(
    layout: &MultLayout<'_>,
    id: impl Fn(usize) -> String,
) -> (Vec<Rule>, Vec<(String, String)>) {
    let (o, h, c) = (layout.outer, layout.halver, layout.collector);
    let inner = |n: usize, target: &str, charge: Charge, from: &str, to: Multiset| {
        Rule::evolve(id(n), target, charge)
            .consume_in(one(from))
            .produce_in(to)
    };
    let child = |label: &str, pre: Charge, post: Charge, produce: Multiset| ChildPattern {
        label: Label::new(label),
        pre_charge: pre,
        post_charge: post,
        consume: Multiset::new(),
        produce,
    };

    let rules = vec![
        inner(1, h, Z, "k1", many(&[("k2", 1), ("y0", 1)])),
        inner(2, h, Z, "k2", one("k3")),
        inner(3, h, Z, "k3", one("k4")),
        inner(4, h, Z, "k4", one("k5")),
        inner(5, h, Z, "k5", one("k6")),
        inner(6, h, Z, "k6", one("k1")),
        Rule::evolve(id(7), h, Z)
            .consume_in(many(&[("a", 2)]))
            .produce_in(many(&[("a1", 1), ("y1", 2)])),
        inner(8, h, Z, "a", many(&[("m", 1), ("y1", 1)])),
        inner(9, h, Z, "a1", one("a2")),
        inner(10, h, Z, "a2", one("a3")),
        inner(11, h, Z, "a3", one("a4")),
        inner(12, h, Z, "a4", one("a5")),
        inner(13, h, Z, "a5", one("a")),
        Rule::evolve(id(14), h, Z).consume_in(many(&[("y1", 2), ("y0", 1)])),
        Rule::evolve(id(15), h, Z)
            .consume_in(many(&[("y1", 1), ("y0", 1), ("m", 1)]))
            .produce_in(one("f"))
            .produce_out(one("f")),
        Rule::evolve(id(16), h, Z).consume_in(one("y1")),
        Rule::evolve(id(17), h, Z)
            .consume_in(one("m"))
            .produce_out(one("m")),
        Rule::evolve(id(18), h, Z)
            .consume_in(many(&[("k2", 1), ("y0", 1)]))
            .produce_out(one("y0")),
        inner(19, o, Z, "b", one("b1")),
        inner(20, o, Z, "b1", one("b2")),
        inner(21, o, Z, "b2", one("b3")),
        inner(22, o, Z, "b3", one("b4")),
        inner(23, o, Z, "b4", many(&[("c", 2)])),
        inner(24, o, Z, "c", one("b")),
        Rule::evolve(id(25), o, P)
            .consume_in(one("b3"))
            .produce_in(many(&[("c", 2)]))
            .with_child(child(c, Z, Z, one("d"))),
        inner(26, o, P, "c", one("b")),
        Rule::evolve(id(27), o, Z)
            .to_charge(P)
            .consume_in(one("m"))
            .produce_in(one("m1"))
            .produce_out(one("rem")),
        inner(28, o, P, "m1", one("m2")),
        inner(29, o, P, "m2", one("m3")),
        Rule::evolve(id(30), o, P)
            .to_charge(Z)
            .consume_in(one("m3"))
            .produce_out(one("rem")),
        Rule::evolve(id(31), h, Z).consume_in(many(&[("f", 1), ("k3", 1)])),
        Rule::evolve(id(32), c, Z)
            .consume_out(one("f"))
            .produce_out(one("f1"))
            .produce_in(one("f1")),
        Rule::evolve(id(33), c, Z)
            .to_charge(M)
            .consume_in(one("f1"))
            .produce_out(one("rem")),
        Rule::evolve(id(34), o, Z)
            .to_charge(M)
            .consume_in(one("f1"))
            .produce_in(one("f2"))
            .produce_out(one("rem")),
        Rule::evolve(id(35), c, M)
            .consume_out(one("f2"))
            .produce_out(one("f3"))
            .produce_in(one("f3")),
        inner(36, c, M, "f3", one("f4")),
        inner(37, o, M, "f3", one("f4")),
        Rule::evolve(id(38), c, M)
            .to_charge(Z)
            .consume_in(one("f4"))
            .produce_out(one("rem")),
        Rule::evolve(id(39), o, M)
            .to_charge(Z)
            .consume_in(one("f4"))
            .produce_out(layout.done.clone()),
        Rule::evolve(id(40), c, M)
            .consume_in(one("d"))
            .produce_out(one("d")),
        Rule::evolve(id(41), o, M)
            .consume_in(one("d"))
            .produce_out(layout.product.clone()),
        inner(42, o, M, "b4", one("d")),
        Rule::evolve(id(43), o, Z)
            .to_charge(M)
            .consume_in(one("y0"))
            .produce_in(one("f3"))
            .produce_out(one("rem")),
        Rule::evolve(id(44), o, M).consume_in(one("b3")),
    ];
    debug_assert_eq!(rules.len(), 44);
    let priorities = [(7, 8), (14, 15), (15, 16), (15, 17), (15, 18), (18, 2), (31, 3)]
        .iter()
        .map(|&(hi, lo)| (id(hi), id(lo)))
        .collect();
    (rules, priorities)
}

/// The stand-alone multiplier `[[a^m k1]_1 [ ]_2 b^n]_0`. The product leaves
/// the skin as `d^{m·n}`, followed by a single `f`.
pub fn build_mult_system(m: u64, n: u64) -> PSystem {
    let tree = MembraneNode::new("0")
        .with_contents(many(&[("b", n)]))
        .with_child(MembraneNode::new("1").with_contents(many(&[("a", m), ("k1", 1)])))
        .with_child(MembraneNode::new("2"));
    let mut sys = PSystem::new(tree);
    let layout = MultLayout {
        outer: "0",
        halver: "1",
        collector: "2",
        product: one("d"),
        done: one("f"),
    };
    let (rules, priorities) = mult_rules(&layout, |n| format!("RS{n}"));
    sys.rules = rules;
    for (hi, lo) in priorities {
        sys.add_priority(&hi, &lo);
    }
    sys.infer_alphabet();
    sys
}

/// Step bound claimed for the multiplier: `1 + 6⌈log₂ m⌉` for `m ≥ 2`.
pub fn mult_step_bound(m: u64) -> Option<u64> {
    if m < 2 {
        return None;
    }
    let ceil_log2 = 64 - (m - 1).leading_zeros() as u64;
    Some(1 + 6 * ceil_log2)
}

/// Steps actually taken: 5 for `m = 0`, otherwise `7 + 6⌊log₂ m⌋`.
pub fn mult_step_count(m: u64) -> u64 {
    if m == 0 {
        5
    } else {
        7 + 6 * (63 - m.leading_zeros() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Halting, TraceMode};

    fn outputs(m: u64, n: u64) -> (u64, u64, usize) {
        let sys = build_mult_system(m, n);
        let trace = run(&sys, 200, TraceMode::Light).unwrap();
        assert_eq!(trace.halting, Halting::Quiescent);
        let env = trace.final_config().environment();
        (
            env.count(Symbol::plain("d")),
            env.count(Symbol::plain("f")),
            trace.steps_executed(),
        )
    }

    #[test]
    fn zero_multiplier() {
        assert_eq!(outputs(0, 3), (0, 1, 5));
    }

    #[test]
    fn unit_multiplier() {
        assert_eq!(outputs(1, 4), (4, 1, 7));
    }

    #[test]
    fn small_products() {
        assert_eq!(outputs(6, 7), (42, 1, 19));
        assert_eq!(outputs(37, 21), (777, 1, 37));
        assert_eq!(outputs(2, 5), (10, 1, 13));
    }

    #[test]
    fn step_formulas() {
        assert_eq!(mult_step_bound(2), Some(7));
        assert_eq!(mult_step_bound(37), Some(37));
        assert_eq!(mult_step_bound(100), Some(43));
        assert_eq!(mult_step_count(1), 7);
        assert_eq!(mult_step_count(37), 37);
        assert_eq!(mult_step_count(64), 43);
    }

    #[test]
    fn rule_count_and_alphabet() {
        let sys = build_mult_system(3, 3);
        assert_eq!(sys.rules.len(), 44);
        assert_eq!(sys.priorities.len(), 7);
        assert_eq!(sys.alphabet.get("d"), Some(&0));
    }
}
