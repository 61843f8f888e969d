use super::coeffs::{initial_distribution, payoff_coefficients, PayoffCoefficients};
use super::game::{validate_game, GameSpec, StrategyEntry};
use super::mult::{mult_rules, MultLayout};
use crate::engine::{Charge, ChildPattern, MembraneNode, PSystem, Rule};
use crate::error::BuildError;
use crate::multiset::Multiset;
use crate::symbol::{Label, Symbol};

use Charge::{Minus as M, Neutral as Z, Plus as P};

pub(crate) const SKIN: &str = "0";
pub(crate) const PAY: &str = "P";

pub fn player_label(k: usize) -> String {
    k.to_string()
}

pub fn strategy_label(i: usize, k: usize) -> String {
    format!("S_{i}_{k}")
}

fn lab(kind: &str, i: usize, k: usize) -> String {
    format!("{kind}_{i}_{k}")
}

fn acum(k: usize) -> String {
    format!("ACUM_{k}")
}

fn s(base: &str) -> Symbol {
    Symbol::plain(base)
}

fn sp(base: &str, params: &[usize]) -> Symbol {
    let p: Vec<i64> = params.iter().map(|&x| x as i64).collect();
    Symbol::new(base, &p)
}

/// `⟨k,i,l⟩`: one agent of player k on strategy (slot) i.
pub fn agent(e: &StrategyEntry) -> Symbol {
    sp("agent", &[e.k, e.slot, e.l])
}

/// `⟨EXIT,k,i,l,n⟩`: the count of strategy l after loop n.
pub fn exit_symbol(e: &StrategyEntry, n: usize) -> Symbol {
    sp("EXIT", &[e.k, e.slot, e.l, n])
}

fn ms(items: impl IntoIterator<Item = (Symbol, u64)>) -> Multiset {
    Multiset::from_pairs(items)
}

fn one(sym: Symbol) -> Multiset {
    ms([(sym, 1)])
}

fn child(label: &str, pre: Charge, post: Charge, produce: Multiset) -> ChildPattern {
    ChildPattern {
        label: Label::new(label),
        pre_charge: pre,
        post_charge: post,
        consume: Multiset::new(),
        produce,
    }
}

/// Decoded rule id of a built GNE system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTag {
    /// `RS{stage}_{number}`, or `MUL{n}` / `MULB{n}` for multiplier rules.
    pub family: String,
    /// 1..=5 for stage rules, 0 for multiplier rules.
    pub stage: u8,
    pub number: u32,
    pub k: Option<usize>,
    pub i: Option<usize>,
    pub n: Option<usize>,
}

/// Parses ids of the form `RS{s}_{r}[_k{k}][_i{i}][_n{n}]` or
/// `MUL{r}_k{k}_i{i}` / `MULB{r}_k{k}_i{i}`.
pub fn parse_rule_id(id: &str) -> Option<RuleTag> {
    let parts: Vec<&str> = id.split('_').collect();
    let (family, stage, number, rest) = if let Some(st) = parts[0].strip_prefix("RS") {
        let stage: u8 = st.parse().ok()?;
        let number: u32 = parts.get(1)?.parse().ok()?;
        (format!("{}_{}", parts[0], parts[1]), stage, number, &parts[2..])
    } else {
        let digits = parts[0].trim_start_matches(|c: char| c.is_ascii_alphabetic());
        let number: u32 = digits.parse().ok()?;
        (parts[0].to_string(), 0, number, &parts[1..])
    };
    let mut tag = RuleTag {
        family,
        stage,
        number,
        k: None,
        i: None,
        n: None,
    };
    for p in rest {
        let mut chars = p.chars();
        let slot = match chars.next() {
            Some('k') => &mut tag.k,
            Some('i') => &mut tag.i,
            Some('n') => &mut tag.n,
            _ => continue,
        };
        if let Ok(v) = chars.as_str().parse() {
            *slot = Some(v);
        }
    }
    Some(tag)
}

struct Gen {
    rules: Vec<Rule>,
    priorities: Vec<(String, String)>,
}

impl Gen {
    fn push(&mut self, r: Rule) {
        self.rules.push(r);
    }

    fn prio(&mut self, hi: &str, lo: &str) {
        self.priorities.push((hi.to_string(), lo.to_string()));
    }

    /// Every rule in `hi` above every rule in `lo`.
    fn prio_all(&mut self, hi: &[String], lo: &[String]) {
        for h in hi {
            for l in lo {
                self.prio(h, l);
            }
        }
    }

    /// `ids[0] > ids[1] > …`.
    fn chain(&mut self, ids: &[String]) {
        for w in ids.windows(2) {
            self.prio(&w[0], &w[1]);
        }
    }
}

fn id(stage: u8, num: u32) -> String {
    format!("RS{stage}_{num}")
}

fn idk(stage: u8, num: u32, k: usize) -> String {
    format!("RS{stage}_{num}_k{k}")
}

fn idki(stage: u8, num: u32, k: usize, i: usize) -> String {
    format!("RS{stage}_{num}_k{k}_i{i}")
}

fn idkin(stage: u8, num: u32, k: usize, i: usize, n: usize) -> String {
    format!("RS{stage}_{num}_k{k}_i{i}_n{n}")
}

fn u(x: i64) -> u64 {
    u64::try_from(x).expect("coefficients are checked nonnegative")
}

/// Compiles a valid game into the full equilibrium-seeking P system.
pub fn build_gne_system(spec: &GameSpec) -> Result<PSystem, BuildError> {
    let diags = validate_game(spec);
    if !diags.is_empty() {
        return Err(BuildError::InvalidGame(diags));
    }
    if spec.loops == 0 {
        return Err(BuildError::ZeroLoops);
    }
    let coeffs = payoff_coefficients(spec)?;
    check_products(spec, &coeffs)?;

    let mut g = Gen {
        rules: Vec::new(),
        priorities: Vec::new(),
    };
    let tree = build_tree(spec, &coeffs);
    stage1(&mut g, spec, &coeffs);
    stage2(&mut g, spec, &coeffs);
    stage3(&mut g, &coeffs);
    stage4(&mut g, spec, &coeffs);
    stage5(&mut g, spec, &coeffs);
    remove_rules(&mut g, &tree);

    let mut sys = PSystem::new(tree);
    sys.rules = g.rules;
    for (hi, lo) in &g.priorities {
        sys.add_priority(hi, lo);
    }
    sys.infer_alphabet();
    Ok(sys)
}

/// Guards the largest multiplicities the run can create against overflow.
fn check_products(spec: &GameSpec, c: &PayoffCoefficients) -> Result<(), BuildError> {
    let r = spec.r_disc as i128;
    for (j, e) in c.index.entries.iter().enumerate() {
        let mut total = c.kappa_mag[j] as i128 + c.b[j] as i128 * r;
        for l in 0..c.n {
            total += c.a[j][l] as i128 * r;
        }
        let worst = total * r * c.index.player(e.k).len() as i128;
        if worst > i64::MAX as i128 {
            return Err(BuildError::Overflow {
                name: format!("payoff units of strategy {}", e.l),
                value: total as f64,
            });
        }
    }
    Ok(())
}

fn build_tree(spec: &GameSpec, c: &PayoffCoefficients) -> MembraneNode {
    let mut skin = MembraneNode::new(SKIN)
        .with_child(MembraneNode::new(PAY).with_contents(one(s("y0"))));
    for k in 1..=spec.players {
        let entries = c.index.player(k);
        let dist = initial_distribution(entries.len(), spec.r_disc);
        let mut player = MembraneNode::new(&player_label(k));
        for (e, &count) in entries.iter().zip(&dist) {
            let i = e.slot;
            let res = MembraneNode::new(&lab("RES", i, k)).with_contents(one(sp("AUX", &[0])));
            let strategy = MembraneNode::new(&strategy_label(i, k))
                .with_contents(ms([(agent(e), count)]))
                .with_child(res);
            let mult = MembraneNode::new(&lab("MULT", i, k))
                .with_child(MembraneNode::new(&lab("M1", i, k)))
                .with_child(MembraneNode::new(&lab("M2", i, k)));
            let mult2 = MembraneNode::new(&lab("MULT2", i, k))
                .with_child(MembraneNode::new(&lab("M1p", i, k)))
                .with_child(MembraneNode::new(&lab("M2p", i, k)));
            player = player
                .with_child(strategy)
                .with_child(mult)
                .with_child(mult2)
                .with_child(MembraneNode::new(&lab("UPD", i, k)));
        }
        skin = skin.with_child(player.with_child(MembraneNode::new(&acum(k))));
    }
    skin
}

/// Payoff computation: every player learns the payoff units of its strategies.
fn stage1(g: &mut Gen, spec: &GameSpec, c: &PayoffCoefficients) {
    let r = spec.r_disc;
    let entries = &c.index.entries;
    for e in entries {
        let (k, i) = (e.k, e.slot);
        g.push(
            Rule::evolve(idki(1, 1, k, i), &strategy_label(i, k), Z)
                .consume_in(one(agent(e)))
                .produce_in(one(s("c")))
                .produce_out(one(agent(e))),
        );
    }
    g.push(
        Rule::evolve(id(1, 2), PAY, Z)
            .consume_in(one(s("y0")))
            .produce_in(ms(entries
                .iter()
                .map(|e| (sp("pl", &[e.l]), u(c.kappa_mag[e.l - 1]))))),
    );
    for e in entries {
        let (k, i, l) = (e.k, e.slot, e.l);
        g.push(
            Rule::evolve(idki(1, 3, k, i), &player_label(k), Z)
                .consume_in(one(agent(e)))
                .produce_in(one(sp("Prod", &[k, i, l])))
                .produce_out(ms([(agent(e), 1), (sp("C", &[k]), 1)])),
        );
        g.push(
            Rule::evolve(idki(1, 4, k, i), PAY, Z)
                .consume_out(one(agent(e)))
                .produce_in(one(agent(e))),
        );
    }
    g.push(
        Rule::evolve(id(1, 5), SKIN, Z)
            .consume_in(ms((1..=spec.players).map(|k| (sp("C", &[k]), r))))
            .produce_in(one(s("y1"))),
    );
    g.push(
        Rule::evolve(id(1, 6), SKIN, Z)
            .consume_in(one(s("y1")))
            .with_child(child(PAY, Z, P, one(s("y2")))),
    );
    for e in entries {
        let l = e.l;
        let units = ms(entries.iter().map(|f| {
            let j = f.l;
            let coef = if j == l { c.b[l - 1] } else { c.a[j - 1][l - 1] };
            (sp("pl", &[j]), u(coef))
        }));
        g.push(
            Rule::evolve(idki(1, 7, e.k, e.slot), PAY, P)
                .consume_in(one(agent(e)))
                .produce_in(units),
        );
    }
    g.push(Rule::evolve(id(1, 8), PAY, P).consume_in(one(s("y2"))).produce_in(one(s("y3"))));
    g.push(
        Rule::evolve(id(1, 9), PAY, P)
            .to_charge(M)
            .consume_in(one(s("y3")))
            .produce_in(one(s("y4")))
            .produce_out(one(s("rem"))),
    );
    for e in entries {
        g.push(
            Rule::evolve(idki(1, 10, e.k, e.slot), PAY, M)
                .consume_in(one(sp("pl", &[e.l])))
                .produce_out(one(sp("pa", &[e.k, e.slot, e.l]))),
        );
    }
    g.push(Rule::evolve(id(1, 11), PAY, M).consume_in(one(s("y4"))).produce_in(one(s("y5"))));
    for e in entries {
        let pa = one(sp("pa", &[e.k, e.slot, e.l]));
        g.push(
            Rule::evolve(idki(1, 12, e.k, e.slot), SKIN, Z)
                .consume_in(pa.clone())
                .with_child(child(&player_label(e.k), Z, Z, pa)),
        );
    }
    g.push(Rule::evolve(id(1, 13), PAY, M).consume_in(one(s("y5"))).produce_in(one(s("y6"))));
    g.push(
        Rule::evolve(id(1, 14), PAY, M)
            .to_charge(Z)
            .consume_in(one(s("y6")))
            .produce_out(ms((1..=spec.players).map(|k| (sp("y7", &[k]), 1)))),
    );
    for k in 1..=spec.players {
        let nk = c.index.player(k).len() as u64;
        g.push(
            Rule::evolve(idk(1, 15, k), SKIN, Z)
                .consume_in(one(sp("y7", &[k])))
                .with_child(child(&player_label(k), Z, M, ms([(s("mult0"), nk)]))),
        );
    }
}

/// Weighted sums `Σ_i z̃_i p̃_i` per player, rounded to payoff units.
fn stage2(g: &mut Gen, spec: &GameSpec, c: &PayoffCoefficients) {
    let r = spec.r_disc;
    let h = spec.threshold();
    for k in 1..=spec.players {
        let pk = player_label(k);
        let entries = c.index.player(k);
        for e in entries {
            let (i, l) = (e.slot, e.l);
            let mult = lab("MULT", i, k);
            let m1 = lab("M1", i, k);
            g.push(
                Rule::evolve(idki(2, 1, k, i), &pk, M)
                    .consume_in(one(sp("Prod", &[k, i, l])))
                    .produce_in(one(sp("Prod2", &[k, i, l])))
                    .with_child(child(&mult, Z, Z, one(s("prod")))),
            );
            g.push(
                Rule::evolve(idki(2, 2, k, i), &pk, M)
                    .consume_in(one(sp("pa", &[k, i, l])))
                    .produce_in(one(sp("neg", &[i])))
                    .with_child(child(&mult, Z, Z, one(s("e")))),
            );
            g.push(
                Rule::evolve(idki(2, 3, k, i), &pk, M)
                    .consume_in(one(s("mult0")))
                    .with_child(child(&mult, Z, P, one(s("mult0")))),
            );
            g.push(
                Rule::evolve(idki(2, 4, k, i), &mult, P)
                    .consume_in(one(s("prod")))
                    .with_child(child(&m1, Z, Z, one(s("a")))),
            );
            g.push(
                Rule::evolve(idki(2, 5, k, i), &mult, P)
                    .consume_in(one(s("e")))
                    .produce_in(one(s("b"))),
            );
            g.push(
                Rule::evolve(idki(2, 6, k, i), &mult, P)
                    .to_charge(Z)
                    .consume_in(one(s("mult0")))
                    .produce_out(one(s("rem")))
                    .with_child(child(&m1, Z, Z, one(s("k1")))),
            );
            g.push(
                Rule::evolve(idki(2, 7, k, i), &pk, M)
                    .consume_in(one(sp("neg", &[i])))
                    .with_child(child(&lab("UPD", i, k), Z, Z, one(sp("neg", &[i])))),
            );
            let layout = MultLayout {
                outer: &mult,
                halver: &m1,
                collector: &lab("M2", i, k),
                product: one(s("d")),
                done: one(s("f")),
            };
            let (rules, prios) = mult_rules(&layout, |n| format!("MUL{n}_k{k}_i{i}"));
            g.rules.extend(rules);
            g.priorities.extend(prios);
        }
        let ac = acum(k);
        g.push(
            Rule::evolve(idk(2, 8, k), &pk, M)
                .consume_in(ms([(s("f"), entries.len() as u64)]))
                .with_child(child(&ac, Z, P, one(s("y2_0")))),
        );
        g.push(
            Rule::evolve(idk(2, 9, k), &pk, M)
                .consume_in(one(s("d")))
                .with_child(child(&ac, Z, Z, one(s("pos")))),
        );
        g.push(
            Rule::evolve(idk(2, 10, k), &ac, P)
                .consume_in(ms([(s("pos"), r)]))
                .produce_out(one(s("pos"))),
        );
        g.push(
            Rule::evolve(idk(2, 11, k), &ac, P)
                .consume_in(ms([(s("pos"), h)]))
                .produce_out(one(s("pos"))),
        );
        g.push(Rule::evolve(idk(2, 12, k), &ac, P).consume_in(one(s("pos"))));
        g.push(
            Rule::evolve(idk(2, 13, k), &ac, P)
                .consume_in(one(s("y2_0")))
                .produce_in(one(s("y2_1"))),
        );
        g.push(
            Rule::evolve(idk(2, 14, k), &ac, P)
                .to_charge(Z)
                .consume_in(one(s("y2_1")))
                .produce_out(one(s("y2_2"))),
        );
        g.push(
            Rule::evolve(idk(2, 15, k), &pk, M)
                .to_charge(Z)
                .consume_in(one(s("y2_2")))
                .produce_in(one(s("y3_0")))
                .produce_out(one(s("rem"))),
        );
        g.chain(&[idk(2, 10, k), idk(2, 11, k), idk(2, 12, k)]);
    }
}

/// Positive parts of the excess payoffs.
fn stage3(g: &mut Gen, c: &PayoffCoefficients) {
    for k in 1..=c.index.players() {
        let pk = player_label(k);
        let entries = c.index.player(k);
        let y3 = |j: usize, i: usize| sp("y3x", &[j, i]);
        g.push(
            Rule::evolve(idk(3, 1, k), &pk, Z)
                .consume_in(one(s("y3_0")))
                .produce_in(ms(entries.iter().map(|e| (y3(1, e.slot), 1)))),
        );
        g.push(
            Rule::evolve(idk(3, 3, k), &pk, Z)
                .consume_in(one(s("pos")))
                .produce_in(ms(entries.iter().map(|e| (sp("posi", &[e.slot]), 1)))),
        );
        for e in entries {
            let i = e.slot;
            let upd = lab("UPD", i, k);
            g.push(
                Rule::evolve(idki(3, 2, k, i), &pk, Z)
                    .consume_in(one(y3(1, i)))
                    .produce_in(one(y3(2, i)))
                    .with_child(child(&upd, Z, P, one(s("rem")))),
            );
            g.push(
                Rule::evolve(idki(3, 4, k, i), &pk, Z)
                    .consume_in(one(sp("posi", &[i])))
                    .with_child(child(&upd, P, P, one(sp("posi", &[i])))),
            );
            g.push(
                Rule::evolve(idki(3, 5, k, i), &pk, Z)
                    .consume_in(one(y3(2, i)))
                    .produce_in(one(y3(3, i))),
            );
            g.push(
                Rule::evolve(idki(3, 6, k, i), &pk, Z)
                    .consume_in(one(y3(3, i)))
                    .with_child(child(&upd, P, M, one(y3(4, i)))),
            );
            g.push(
                Rule::evolve(idki(3, 7, k, i), &upd, M)
                    .consume_in(ms([(sp("neg", &[i]), 1), (sp("posi", &[i]), 1)])),
            );
            g.push(Rule::evolve(idki(3, 8, k, i), &upd, M).consume_in(one(sp("neg", &[i]))));
            g.push(
                Rule::evolve(idki(3, 9, k, i), &upd, M)
                    .consume_in(one(sp("posi", &[i])))
                    .produce_in(one(sp("qi", &[i]))),
            );
            g.push(
                Rule::evolve(idki(3, 10, k, i), &upd, M)
                    .consume_in(one(y3(4, i)))
                    .produce_in(one(y3(5, i))),
            );
            g.push(
                Rule::evolve(idki(3, 11, k, i), &upd, M)
                    .to_charge(Z)
                    .consume_in(one(y3(5, i)))
                    .produce_in(one(y3(6, i)))
                    .produce_out(one(s("rem"))),
            );
            g.push(
                Rule::evolve(idki(3, 12, k, i), &upd, Z)
                    .consume_in(one(sp("qi", &[i])))
                    .produce_out(ms([(s("q"), 1), (sp("qi", &[i]), 1)])),
            );
            g.push(
                Rule::evolve(idki(3, 13, k, i), &upd, Z)
                    .consume_in(one(y3(6, i)))
                    .produce_out(one(y3(7, i))),
            );
            g.prio(&idki(3, 7, k, i), &idki(3, 8, k, i));
            g.prio(&idki(3, 7, k, i), &idki(3, 9, k, i));
        }
    }
}

/// BNN rates `ż̃_i = q_i − ρ(z̃_i Σ_j q_j)`, split into signs.
fn stage4(g: &mut Gen, spec: &GameSpec, c: &PayoffCoefficients) {
    let r = spec.r_disc;
    let h = spec.threshold();
    for k in 1..=spec.players {
        let pk = player_label(k);
        let entries = c.index.player(k);
        let nk = entries.len() as u64;
        g.push(
            Rule::evolve(idk(4, 1, k), &pk, Z)
                .consume_in(ms(entries.iter().map(|e| (sp("y3x", &[7, e.slot]), 1))))
                .produce_in(ms(entries.iter().map(|e| (sp("multz", &[e.slot, 0]), 1)))),
        );
        g.push(
            Rule::evolve(idk(4, 3, k), &pk, Z)
                .consume_in(one(s("q")))
                .produce_in(ms(entries.iter().map(|e| (sp("qq", &[e.slot]), 1)))),
        );
        g.push(
            Rule::evolve(idk(4, 10, k), &pk, Z)
                .consume_in(ms([(s("f1"), nk)]))
                .produce_in(ms([(s("y4_0"), nk)])),
        );
        for e in entries {
            let (i, l) = (e.slot, e.l);
            let mult2 = lab("MULT2", i, k);
            let m1p = lab("M1p", i, k);
            let st = strategy_label(i, k);
            g.push(
                Rule::evolve(idki(4, 2, k, i), &pk, Z)
                    .consume_in(one(sp("multz", &[i, 0])))
                    .produce_in(one(sp("multz", &[i, 1]))),
            );
            g.push(
                Rule::evolve(idki(4, 4, k, i), &pk, Z)
                    .consume_in(one(sp("Prod2", &[k, i, l])))
                    .with_child(child(&mult2, Z, Z, one(s("prod")))),
            );
            g.push(
                Rule::evolve(idki(4, 5, k, i), &pk, Z)
                    .consume_in(one(sp("qq", &[i])))
                    .with_child(child(&mult2, Z, Z, one(s("e")))),
            );
            g.push(
                Rule::evolve(idki(4, 6, k, i), &pk, Z)
                    .consume_in(one(sp("multz", &[i, 1])))
                    .with_child(child(&mult2, Z, P, one(s("mult0")))),
            );
            g.push(
                Rule::evolve(idki(4, 7, k, i), &mult2, P)
                    .consume_in(one(s("prod")))
                    .with_child(child(&m1p, Z, Z, one(s("a")))),
            );
            g.push(
                Rule::evolve(idki(4, 8, k, i), &mult2, P)
                    .consume_in(one(s("e")))
                    .produce_in(one(s("b"))),
            );
            g.push(
                Rule::evolve(idki(4, 9, k, i), &mult2, P)
                    .to_charge(Z)
                    .consume_in(one(s("mult0")))
                    .produce_out(one(s("rem")))
                    .with_child(child(&m1p, Z, Z, one(s("k1")))),
            );
            let layout = MultLayout {
                outer: &mult2,
                halver: &m1p,
                collector: &lab("M2p", i, k),
                product: one(sp("di", &[i])),
                done: one(s("f1")),
            };
            let (rules, prios) = mult_rules(&layout, |n| format!("MULB{n}_k{k}_i{i}"));
            g.rules.extend(rules);
            g.priorities.extend(prios);

            g.push(
                Rule::evolve(idki(4, 11, k, i), &pk, Z)
                    .consume_in(one(s("y4_0")))
                    .with_child(child(&st, Z, P, one(s("y4_1")))),
            );
            g.push(
                Rule::evolve(idki(4, 12, k, i), &pk, Z)
                    .consume_in(one(sp("qi", &[i])))
                    .with_child(child(&st, P, P, one(s("s0")))),
            );
            g.push(
                Rule::evolve(idki(4, 13, k, i), &pk, Z)
                    .consume_in(one(sp("di", &[i])))
                    .with_child(child(&st, P, P, one(sp("di", &[i])))),
            );
            let inside = |num: u32, from: Multiset, to: Multiset| {
                Rule::evolve(idki(4, num, k, i), &st, P)
                    .consume_in(from)
                    .produce_in(to)
            };
            g.push(inside(14, one(s("s0")), one(s("s1"))));
            g.push(inside(15, ms([(sp("di", &[i]), r)]), one(s("zneg"))));
            g.push(inside(16, ms([(sp("di", &[i]), h)]), one(s("zneg"))));
            g.push(inside(17, one(sp("di", &[i])), Multiset::new()));
            g.push(inside(18, ms([(s("s1"), 1), (s("zneg"), 1)]), Multiset::new()));
            g.push(inside(19, one(s("s1")), one(s("zvarp"))));
            g.push(inside(20, one(s("zneg")), one(s("zvarn"))));
            g.push(inside(21, one(s("y4_1")), one(s("y4_2"))));
            g.push(inside(22, one(s("y4_2")), one(s("y4_3"))));
            g.push(
                Rule::evolve(idki(4, 23, k, i), &st, P)
                    .to_charge(M)
                    .consume_in(one(s("y4_3")))
                    .produce_in(one(s("y5_0")))
                    .produce_out(one(s("rem"))),
            );
            g.chain(&[idki(4, 15, k, i), idki(4, 16, k, i), idki(4, 17, k, i)]);
            g.prio(&idki(4, 18, k, i), &idki(4, 19, k, i));
            g.prio(&idki(4, 18, k, i), &idki(4, 20, k, i));
        }
    }
}

/// Euler update with clamping, pooling of overflow, renormalization, output
/// and the loop counter.
fn stage5(g: &mut Gen, spec: &GameSpec, c: &PayoffCoefficients) {
    let r = spec.r_disc;
    let h = spec.threshold();
    let big_l = spec.loops;
    for k in 1..=spec.players {
        let pk = player_label(k);
        let entries = c.index.player(k);
        for e in entries {
            let (i, l) = (e.slot, e.l);
            let st = strategy_label(i, k);
            let res = lab("RES", i, k);
            let rule = |num: u32, target: &str, charge: Charge| {
                Rule::evolve(idki(5, num, k, i), target, charge)
            };
            g.push(rule(1, &st, M).consume_in(one(s("y5_0"))).produce_in(one(s("y5_1"))));
            g.push(rule(2, &st, M).consume_in(ms([(s("zvarn"), r), (s("c"), 1)])));
            g.push(rule(3, &st, M).consume_in(ms([(s("zvarn"), h), (s("c"), 1)])));
            g.push(rule(4, &st, M).consume_in(ms([(s("zvarp"), r)])).produce_in(one(s("p"))));
            g.push(rule(5, &st, M).consume_in(one(s("c"))).produce_in(one(s("p"))));
            g.push(rule(6, &st, M).consume_in(ms([(s("zvarn"), r)])).produce_in(one(s("n"))));
            g.push(rule(7, &st, M).consume_in(ms([(s("zvarn"), h)])).produce_in(one(s("n"))));
            g.push(rule(8, &st, M).consume_in(one(s("zvarn"))));
            g.push(rule(9, &st, M).consume_in(ms([(s("zvarp"), h)])).produce_in(one(s("p"))));
            g.push(rule(10, &st, M).consume_in(one(s("zvarp"))));
            g.push(
                rule(11, &st, M)
                    .consume_in(one(s("y5_1")))
                    .produce_in(ms([(s("y5_2"), 1), (s("comp"), r)])),
            );
            g.push(
                rule(12, &st, M)
                    .consume_in(ms([(s("p"), r)]))
                    .produce_in(one(s("over")))
                    .produce_out(ms([(sp("w", &[i]), r)])),
            );
            g.push(
                rule(13, &st, M)
                    .to_charge(Z)
                    .consume_in(one(s("y5_2")))
                    .produce_in(one(s("y5_3")))
                    .produce_out(one(sp("y53", &[i]))),
            );
            g.push(rule(14, &st, Z).consume_in(one(s("p"))).produce_out(one(s("p"))));
            g.push(rule(15, &st, M).consume_in(ms([(s("over"), 1), (s("comp"), r)])));
            g.push(rule(16, &st, Z).consume_in(one(s("n"))).produce_out(one(s("n"))));
            g.push(
                rule(17, &st, Z)
                    .consume_in(one(s("comp")))
                    .produce_out(one(sp("compw", &[i]))),
            );
            g.push(
                rule(18, &st, M)
                    .consume_in(ms([(s("p"), 1), (s("comp"), 1)]))
                    .produce_in(one(s("p1"))),
            );
            g.push(rule(19, &st, Z).consume_in(one(s("p1"))).produce_out(one(sp("w", &[i]))));
            g.push(rule(25, &st, Z).consume_in(one(s("y5_3"))).produce_in(one(s("y5_4"))));
            g.push(rule(26, &st, Z).consume_in(one(s("y5_4"))).produce_in(one(s("y5_5"))));
            g.push(
                rule(27, &st, Z)
                    .to_charge(P)
                    .consume_in(one(s("y5_5")))
                    .produce_out(one(s("y5_6"))),
            );
            g.push(
                rule(35, &st, P)
                    .consume_out(one(sp("z", &[i])))
                    .produce_in(one(sp("z", &[i]))),
            );
            g.push(
                rule(36, &st, P)
                    .to_charge(Z)
                    .consume_out(one(s("y5_6")))
                    .produce_in(one(s("y5_7"))),
            );
            g.push(
                rule(37, &res, Z)
                    .to_charge(P)
                    .consume_out(one(s("y5_7")))
                    .produce_in(one(s("y5_8"))),
            );
            g.push(
                rule(38, &res, P)
                    .consume_out(one(sp("z", &[i])))
                    .produce_in(one(sp("EXITi", &[i]))),
            );
            for n in 0..=big_l {
                g.push(
                    Rule::evolve(idkin(5, 39, k, i, n), &res, P)
                        .consume_in(one(sp("AUX", &[n])))
                        .produce_in(ms([(sp("CLK", &[n + 1]), r), (sp("AUX1", &[n + 1]), 1)])),
                );
            }
            g.push(
                rule(40, &res, P)
                    .to_charge(M)
                    .consume_in(one(s("y5_8")))
                    .produce_in(one(s("y5_9")))
                    .produce_out(one(s("rem"))),
            );
            for n in 1..=big_l + 1 {
                g.push(
                    Rule::evolve(idkin(5, 41, k, i, n), &res, M)
                        .consume_in(ms([(sp("EXITi", &[i]), 1), (sp("CLK", &[n]), 1)]))
                        .produce_out(one(exit_symbol(e, n))),
                );
                g.push(
                    Rule::evolve(idkin(5, 42, k, i, n), &res, M)
                        .consume_in(one(sp("CLK", &[n]))),
                );
                g.prio(&idkin(5, 41, k, i, n), &idkin(5, 42, k, i, n));
            }
            g.push(
                rule(61, &res, M).consume_in(ms([(sp("AUX1", &[big_l]), 1), (s("y5_9"), 1)])),
            );
            g.push(
                rule(43, &res, M)
                    .to_charge(Z)
                    .consume_in(one(s("y5_9")))
                    .produce_out(one(s("y5_10"))),
            );
            g.prio(&idki(5, 61, k, i), &idki(5, 43, k, i));
            for n in 1..=big_l + 1 {
                g.push(
                    Rule::evolve(idkin(5, 44, k, i, n), &res, Z)
                        .consume_in(one(sp("AUX1", &[n])))
                        .produce_in(one(sp("AUX", &[n]))),
                );
                g.push(
                    Rule::evolve(idkin(5, 45, k, i, n), &st, Z)
                        .consume_in(one(exit_symbol(e, n)))
                        .produce_in(one(sp("INIT", &[k, i, l])))
                        .produce_out(one(exit_symbol(e, n))),
                );
                g.push(
                    Rule::evolve(idkin(5, 47, k, i, n), &pk, Z)
                        .consume_in(one(exit_symbol(e, n)))
                        .produce_out(one(exit_symbol(e, n))),
                );
            }
            g.push(
                rule(46, &st, Z)
                    .consume_in(one(s("y5_10")))
                    .produce_out(one(sp("y511", &[i]))),
            );
            g.push(
                rule(57, &st, Z)
                    .to_charge(P)
                    .consume_out(one(sp("y0i", &[i])))
                    .produce_in(one(s("y0_2"))),
            );
            g.push(
                rule(59, &st, P)
                    .consume_in(one(sp("INIT", &[k, i, l])))
                    .produce_in(one(agent(e))),
            );
            g.push(
                rule(60, &st, P)
                    .to_charge(Z)
                    .consume_in(one(s("y0_2")))
                    .produce_out(one(s("rem"))),
            );
            g.chain(&[idki(5, 2, k, i), idki(5, 3, k, i), idki(5, 5, k, i)]);
            g.prio(&idki(5, 3, k, i), &idki(5, 6, k, i));
            g.chain(&[idki(5, 6, k, i), idki(5, 7, k, i), idki(5, 8, k, i)]);
            g.chain(&[idki(5, 4, k, i), idki(5, 9, k, i), idki(5, 10, k, i)]);
            g.prio(&idki(5, 15, k, i), &idki(5, 18, k, i));
        }

        // Pooling and renormalization inside the player membrane.
        let ids = |num: u32| -> Vec<String> {
            entries.iter().map(|e| idki(5, num, k, e.slot)).collect()
        };
        g.push(Rule::evolve(idk(5, 20, k), &pk, Z).consume_in(ms([(s("p"), 1), (s("n"), 1)])));
        for e in entries {
            let i = e.slot;
            g.push(
                Rule::evolve(idki(5, 21, k, i), &pk, Z)
                    .consume_in(ms([(s("p"), 1), (sp("compw", &[i]), 1)]))
                    .produce_in(one(sp("w", &[i]))),
            );
            g.push(
                Rule::evolve(idki(5, 22, k, i), &pk, Z)
                    .consume_in(ms([(s("n"), 1), (sp("w", &[i]), 1)]))
                    .produce_in(one(sp("compw", &[i]))),
            );
        }
        g.push(Rule::evolve(idk(5, 23, k), &pk, Z).consume_in(one(s("p"))).produce_in(one(s("err"))));
        g.push(Rule::evolve(idk(5, 24, k), &pk, Z).consume_in(one(s("n"))).produce_in(one(s("err"))));
        g.push(
            Rule::evolve(idk(5, 28, k), &pk, Z)
                .consume_in(ms(entries.iter().map(|e| (sp("y53", &[e.slot]), 1))))
                .produce_in(one(s("y5_4"))),
        );
        g.push(
            Rule::evolve(idk(5, 29, k), &pk, Z)
                .to_charge(P)
                .consume_in(one(s("y5_4")))
                .produce_in(ms([(s("y5_5"), 1), (s("v"), r)]))
                .produce_out(one(s("rem"))),
        );
        for e in entries {
            let i = e.slot;
            g.push(
                Rule::evolve(idki(5, 30, k, i), &pk, P)
                    .consume_in(ms([(sp("w", &[i]), 1), (s("v"), 1)]))
                    .produce_in(one(sp("z", &[i]))),
            );
            g.push(Rule::evolve(idki(5, 31, k, i), &pk, P).consume_in(one(sp("w", &[i]))));
            g.push(Rule::evolve(idki(5, 32, k, i), &pk, P).consume_in(one(sp("compw", &[i]))));
            g.push(
                Rule::evolve(idki(5, 33, k, i), &pk, P)
                    .consume_in(one(s("v")))
                    .produce_in(one(sp("z", &[i]))),
            );
        }
        g.push(
            Rule::evolve(idk(5, 34, k), &pk, P)
                .to_charge(Z)
                .consume_in(one(s("y5_5")))
                .produce_out(one(s("rem"))),
        );
        g.push(
            Rule::evolve(idk(5, 48, k), &pk, Z)
                .consume_in(ms(entries.iter().map(|e| (sp("y511", &[e.slot]), 1))))
                .produce_out(one(sp("y512", &[k]))),
        );
        g.push(Rule::evolve(idk(5, 50, k), &pk, Z).consume_in(one(s("err"))).produce_out(one(s("err"))));
        g.push(
            Rule::evolve(idk(5, 53, k), &pk, Z)
                .consume_out(one(sp("y0k", &[k])))
                .produce_in(one(s("y0_0"))),
        );
        g.push(
            Rule::evolve(idk(5, 55, k), &pk, Z)
                .consume_in(one(s("y0_0")))
                .produce_in(ms(entries.iter().map(|e| (sp("y0i", &[e.slot]), 1)))),
        );

        let (r21, r22, r30, r31, r33) = (ids(21), ids(22), ids(30), ids(31), ids(33));
        g.prio_all(&[idk(5, 20, k)], &r21);
        g.prio_all(&[idk(5, 20, k)], &r22);
        g.chain(&r21);
        g.chain(&r22);
        g.prio_all(&r21, &[idk(5, 23, k)]);
        g.prio_all(&r22, &[idk(5, 24, k)]);
        g.chain(&r30);
        g.prio_all(&r30, &r31);
        g.prio_all(&r30, &r33);
        g.chain(&r33);
    }

    g.push(
        Rule::evolve(id(5, 49), SKIN, Z)
            .consume_in(ms((1..=spec.players).map(|k| (sp("y512", &[k]), 1))))
            .produce_in(one(s("y0"))),
    );
    let mut announce = ms([(s("y0_0"), 1)]);
    for k in 1..=spec.players {
        announce.add(sp("y0k", &[k]), 1);
    }
    g.push(Rule::evolve(id(5, 51), SKIN, Z).consume_in(one(s("y0"))).produce_in(announce));
    g.push(
        Rule::evolve(id(5, 52), PAY, Z)
            .consume_out(one(s("y0_0")))
            .produce_in(one(s("y0_0"))),
    );
    g.push(Rule::evolve(id(5, 54), PAY, Z).consume_in(one(s("y0_0"))).produce_in(one(s("y0_1"))));
    g.push(Rule::evolve(id(5, 56), PAY, Z).consume_in(one(s("y0_1"))).produce_in(one(s("y0_2"))));
    g.push(Rule::evolve(id(5, 58), PAY, Z).consume_in(one(s("y0_2"))).produce_in(one(s("y0"))));
}

/// `[rem -> λ]` in every membrane under every charge.
fn remove_rules(g: &mut Gen, tree: &MembraneNode) {
    tree.walk(&mut |node, _| {
        for (charge, tag) in [(Z, "z"), (P, "p"), (M, "m")] {
            g.push(
                Rule::evolve(format!("RS1_16_{}_{tag}", node.label), node.label.as_str(), charge)
                    .consume_in(one(s("rem"))),
            );
        }
    });
}
