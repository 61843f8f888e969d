use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::multiset::Multiset;
use crate::symbol::Label;

/// Membrane polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Charge {
    #[default]
    Neutral,
    Plus,
    Minus,
}

impl Charge {
    pub const ALL: [Charge; 3] = [Charge::Neutral, Charge::Plus, Charge::Minus];

    pub fn symbol(self) -> char {
        match self {
            Charge::Neutral => '0',
            Charge::Plus => '+',
            Charge::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Charge> {
        match c {
            '0' => Some(Charge::Neutral),
            '+' => Some(Charge::Plus),
            '-' => Some(Charge::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A node of the initial membrane structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembraneNode {
    pub label: Label,
    pub charge: Charge,
    pub contents: Multiset,
    pub children: Vec<MembraneNode>,
}

impl MembraneNode {
    pub fn new(label: &str) -> MembraneNode {
        MembraneNode {
            label: Label::new(label),
            charge: Charge::Neutral,
            contents: Multiset::new(),
            children: Vec::new(),
        }
    }

    pub fn with_contents(mut self, contents: Multiset) -> Self {
        self.contents = contents;
        self
    }

    pub fn with_child(mut self, child: MembraneNode) -> Self {
        self.children.push(child);
        self
    }

    /// Pre-order walk.
    pub fn walk(&self, visit: &mut impl FnMut(&MembraneNode, Option<Label>)) {
        fn go(
            node: &MembraneNode,
            parent: Option<Label>,
            visit: &mut impl FnMut(&MembraneNode, Option<Label>),
        ) {
            visit(node, parent);
            for c in &node.children {
                go(c, Some(node.label), visit);
            }
        }
        go(self, None, visit);
    }

    pub fn count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_, _| n += 1);
        n
    }
}

/// Optional nested child of the target membrane in a rule:
/// `[ v [ cv ]_child^γ ]_i^α -> [ v' [ cv' ]_child^δ ]_i^β`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildPattern {
    pub label: Label,
    pub pre_charge: Charge,
    pub post_charge: Charge,
    pub consume: Multiset,
    pub produce: Multiset,
}

/// One evolution rule `u [v]_i^α -> u' [v']_i^β`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub target: Label,
    pub pre_charge: Charge,
    pub post_charge: Charge,
    pub consume_outside: Multiset,
    pub produce_outside: Multiset,
    pub consume_inside: Multiset,
    pub produce_inside: Multiset,
    pub child: Option<ChildPattern>,
}

impl Rule {
    /// A rule rewriting inside `target` without touching its charge.
    pub fn evolve(id: impl Into<String>, target: &str, charge: Charge) -> Rule {
        Rule {
            id: id.into(),
            target: Label::new(target),
            pre_charge: charge,
            post_charge: charge,
            consume_outside: Multiset::new(),
            produce_outside: Multiset::new(),
            consume_inside: Multiset::new(),
            produce_inside: Multiset::new(),
            child: None,
        }
    }

    pub fn to_charge(mut self, post: Charge) -> Self {
        self.post_charge = post;
        self
    }

    pub fn consume_in(mut self, ms: Multiset) -> Self {
        self.consume_inside = ms;
        self
    }

    pub fn produce_in(mut self, ms: Multiset) -> Self {
        self.produce_inside = ms;
        self
    }

    pub fn consume_out(mut self, ms: Multiset) -> Self {
        self.consume_outside = ms;
        self
    }

    pub fn produce_out(mut self, ms: Multiset) -> Self {
        self.produce_outside = ms;
        self
    }

    pub fn with_child(mut self, child: ChildPattern) -> Self {
        self.child = Some(child);
        self
    }

    pub fn is_charge_changing(&self) -> bool {
        self.pre_charge != self.post_charge
            || self
                .child
                .as_ref()
                .is_some_and(|c| c.pre_charge != c.post_charge)
    }

    pub fn consumes_nothing(&self) -> bool {
        self.consume_inside.is_empty()
            && self.consume_outside.is_empty()
            && self.child.as_ref().is_none_or(|c| c.consume.is_empty())
    }
}

/// A transition P system with membrane polarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PSystem {
    /// Base name -> parameter count.
    pub alphabet: BTreeMap<String, usize>,
    pub tree: MembraneNode,
    /// Declaration order is significant: it breaks ties between rules the
    /// priority relation leaves unordered.
    pub rules: Vec<Rule>,
    /// `(higher, lower)` rule id pairs.
    pub priorities: BTreeSet<(String, String)>,
}

impl PSystem {
    pub fn new(tree: MembraneNode) -> PSystem {
        PSystem {
            alphabet: BTreeMap::new(),
            tree,
            rules: Vec::new(),
            priorities: BTreeSet::new(),
        }
    }

    /// Recomputes the alphabet from every symbol used in the tree and rules.
    pub fn infer_alphabet(&mut self) {
        let mut alphabet = BTreeMap::new();
        let mut note = |ms: &Multiset| {
            for s in ms.symbols() {
                alphabet.insert(s.base().to_owned(), s.arity());
            }
        };
        self.tree.walk(&mut |node, _| note(&node.contents));
        for r in &self.rules {
            note(&r.consume_outside);
            note(&r.produce_outside);
            note(&r.consume_inside);
            note(&r.produce_inside);
            if let Some(c) = &r.child {
                note(&c.consume);
                note(&c.produce);
            }
        }
        self.alphabet = alphabet;
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn add_priority(&mut self, higher: &str, lower: &str) {
        self.priorities.insert((higher.to_owned(), lower.to_owned()));
    }
}
