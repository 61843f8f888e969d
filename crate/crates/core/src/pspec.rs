//! `.pspec` text format for P systems.
//!
//! ```text
//! # comments run to end of line
//! alphabet {
//!   a/0
//!   EXIT/4
//! }
//! membranes {
//!   0 ^0 { b^5 ;
//!     1 ^0 { a^3 k1 ; }
//!     2 ^0 { ~ ; }
//!   }
//! }
//! rules {
//!   R1 : ~ [ a^2 ]'1 ^0 -> ~ [ b ]'1 ^+
//!   R2 : ~ [ c [ d ]'2 ^0 ]'0 ^0 -> e [ ~ [ d ]'2 ^- ]'0 ^0
//! }
//! priorities {
//!   R1 > R2
//! }
//! ```
//!
//! Multisets are space separated `sym{params}^count` items (`^1` implied),
//! `~` is the empty multiset. Output is canonical: membranes in pre-order,
//! rules in declaration order (which breaks priority ties, so it is part of
//! the system), priorities sorted, multiset items sorted by name and
//! parameters.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::engine::{Charge, ChildPattern, MembraneNode, PSystem, Rule};
use crate::error::PspecError;
use crate::multiset::Multiset;
use crate::symbol::{Label, Symbol};

pub fn parse(text: &str) -> Result<PSystem, PspecError> {
    let tokens = lex(text)?;
    let sys = Parser { tokens, pos: 0 }.document()?;
    let diags = validate(&sys);
    if diags.is_empty() {
        Ok(sys)
    } else {
        Err(PspecError::Invalid(diags))
    }
}

pub fn serialize(sys: &PSystem) -> String {
    let mut out = String::new();
    out.push_str("alphabet {\n");
    for (base, arity) in &sys.alphabet {
        let _ = writeln!(out, "  {base}/{arity}");
    }
    out.push_str("}\nmembranes {\n");
    write_membrane(&mut out, &sys.tree, 1);
    out.push_str("}\nrules {\n");
    for r in &sys.rules {
        let _ = write!(
            out,
            "  {} : {} [ {}",
            r.id,
            multiset_text(&r.consume_outside),
            multiset_text(&r.consume_inside)
        );
        if let Some(c) = &r.child {
            let _ = write!(
                out,
                " [ {} ]'{} ^{}",
                multiset_text(&c.consume),
                c.label,
                c.pre_charge
            );
        }
        let _ = write!(
            out,
            " ]'{} ^{} -> {} [ {}",
            r.target,
            r.pre_charge,
            multiset_text(&r.produce_outside),
            multiset_text(&r.produce_inside)
        );
        if let Some(c) = &r.child {
            let _ = write!(
                out,
                " [ {} ]'{} ^{}",
                multiset_text(&c.produce),
                c.label,
                c.post_charge
            );
        }
        let _ = writeln!(out, " ]'{} ^{}", r.target, r.post_charge);
    }
    out.push_str("}\npriorities {\n");
    for (hi, lo) in &sys.priorities {
        let _ = writeln!(out, "  {hi} > {lo}");
    }
    out.push_str("}\n");
    out
}

fn multiset_text(ms: &Multiset) -> String {
    if ms.is_empty() {
        return "~".into();
    }
    let items: Vec<String> = ms
        .canonical()
        .into_iter()
        .map(|(s, n)| if n == 1 { s.to_string() } else { format!("{s}^{n}") })
        .collect();
    items.join(" ")
}

fn write_membrane(out: &mut String, node: &MembraneNode, depth: usize) {
    let pad = "  ".repeat(depth);
    let head = format!(
        "{pad}{} ^{} {{ {} ;",
        node.label,
        node.charge,
        multiset_text(&node.contents)
    );
    if node.children.is_empty() {
        let _ = writeln!(out, "{head} }}");
        return;
    }
    let _ = writeln!(out, "{head}");
    for c in &node.children {
        write_membrane(out, c, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}

/// One diagnostic per violated invariant; empty for a well-formed system.
pub fn validate(sys: &PSystem) -> Vec<String> {
    let mut diags = Vec::new();

    let mut children: HashMap<Label, HashSet<Label>> = HashMap::new();
    let mut seen = HashSet::new();
    sys.tree.walk(&mut |node, _| {
        if !seen.insert(node.label) {
            diags.push(format!("membrane label '{}' appears more than once", node.label));
        }
        children.insert(node.label, node.children.iter().map(|c| c.label).collect());
    });

    let mut symbol_diags = BTreeSet::new();
    let mut check_ms = |ms: &Multiset| {
        for s in ms.symbols() {
            match sys.alphabet.get(s.base()) {
                None => {
                    symbol_diags.insert(format!("symbol '{}' is not in the alphabet", s.base()));
                }
                Some(&a) if a != s.arity() => {
                    symbol_diags.insert(format!(
                        "symbol '{s}' has {} parameters but '{}' is declared with {a}",
                        s.arity(),
                        s.base()
                    ));
                }
                _ => {}
            }
        }
    };
    sys.tree.walk(&mut |node, _| check_ms(&node.contents));

    let mut ids = HashSet::new();
    for r in &sys.rules {
        if !ids.insert(r.id.as_str()) {
            diags.push(format!("duplicate rule id {}", r.id));
        }
        match children.get(&r.target) {
            None => diags.push(format!("rule {}: unknown membrane label '{}'", r.id, r.target)),
            Some(kids) => {
                if let Some(c) = &r.child {
                    if !kids.contains(&c.label) {
                        diags.push(format!(
                            "rule {}: '{}' is not a child of '{}'",
                            r.id, c.label, r.target
                        ));
                    }
                }
            }
        }
        if r.consumes_nothing() {
            diags.push(format!("rule {} consumes nothing", r.id));
        }
        for ms in [
            &r.consume_outside,
            &r.produce_outside,
            &r.consume_inside,
            &r.produce_inside,
        ] {
            check_ms(ms);
        }
        if let Some(c) = &r.child {
            check_ms(&c.consume);
            check_ms(&c.produce);
        }
    }
    diags.extend(symbol_diags);

    let mut lower: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (hi, lo) in &sys.priorities {
        for id in [hi, lo] {
            if !ids.contains(id.as_str()) {
                diags.push(format!("priority names unknown rule {id}"));
            }
        }
        lower.entry(hi).or_default().push(lo);
    }
    if has_cycle(&lower) {
        diags.push("priority relation is cyclic".into());
    }
    diags
}

fn has_cycle(lower: &BTreeMap<&str, Vec<&str>>) -> bool {
    // 0 unvisited, 1 on the stack, 2 done
    let mut state: HashMap<&str, u8> = HashMap::new();
    for &start in lower.keys() {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state.insert(start, 1);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let succ = lower.get(node).map_or(&[][..], |v| v.as_slice());
            if *next < succ.len() {
                let s = succ[*next];
                *next += 1;
                match state.get(s).copied().unwrap_or(0) {
                    1 => return true,
                    0 => {
                        state.insert(s, 1);
                        stack.push((s, 0));
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Quote,
    Caret,
    Plus,
    Minus,
    Arrow,
    Tilde,
    Semi,
    Colon,
    Comma,
    Slash,
    Gt,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Eof => "end of input".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Quote => "'''".into(),
            Tok::Caret => "'^'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Tilde => "'~'".into(),
            Tok::Semi => "';'".into(),
            Tok::Colon => "':'".into(),
            Tok::Comma => "','".into(),
            Tok::Slash => "'/'".into(),
            Tok::Gt => "'>'".into(),
        }
    }
}

struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<Token>, PspecError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(c) = chars.next() {
        let (tl, tc) = (line, column);
        column += 1;
        let tok = match c {
            '\n' => {
                line += 1;
                column = 1;
                continue;
            }
            c if c.is_whitespace() => continue,
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
                continue;
            }
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '\'' => Tok::Quote,
            '^' => Tok::Caret,
            '+' => Tok::Plus,
            '~' => Tok::Tilde,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '/' => Tok::Slash,
            '>' => Tok::Gt,
            '-' => {
                if chars.peek() == Some(&'>') {
                    chars.next();
                    column += 1;
                    Tok::Arrow
                } else {
                    Tok::Minus
                }
            }
            c if is_word_char(c) => {
                let mut w = String::from(c);
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    w.push(c);
                    chars.next();
                    column += 1;
                }
                Tok::Word(w)
            }
            other => {
                return Err(PspecError::Syntax {
                    line: tl,
                    column: tc,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        tokens.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, PspecError>;

/// One side of a rule: inside multiset, optional child, label and charge.
struct Side {
    inside: Multiset,
    child: Option<(Multiset, String, Charge)>,
    label: String,
    charge: Charge,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> PResult<T> {
        let t = &self.tokens[self.pos];
        Err(PspecError::Syntax {
            line: t.line,
            column: t.column,
            message,
        })
    }

    fn expect(&mut self, tok: Tok, context: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(format!(
                "expected {} {context}, found {}",
                tok.describe(),
                self.peek().describe()
            ))
        }
    }

    fn word(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Word(w) => {
                self.advance();
                Ok(w)
            }
            other => self.error(format!("expected {what}, found {}", other.describe())),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> PResult<T> {
        let start = self.pos;
        let w = self.word(what)?;
        match w.parse() {
            Ok(v) if w.bytes().all(|b| b.is_ascii_digit()) => Ok(v),
            _ => {
                self.pos = start;
                self.error(format!("expected {what}, found '{w}'"))
            }
        }
    }

    fn document(&mut self) -> PResult<PSystem> {
        let mut alphabet = None;
        let mut tree = None;
        let mut rules = None;
        let mut priorities = None;
        loop {
            if *self.peek() == Tok::Eof {
                break;
            }
            let start = self.pos;
            let section = self.word("a section name")?;
            let duplicate = match section.as_str() {
                "alphabet" => alphabet.replace(self.alphabet()?).is_some(),
                "membranes" => {
                    self.expect(Tok::LBrace, "after 'membranes'")?;
                    let root = self.membrane()?;
                    self.expect(Tok::RBrace, "after the skin membrane")?;
                    tree.replace(root).is_some()
                }
                "rules" => rules.replace(self.rules()?).is_some(),
                "priorities" => priorities.replace(self.priorities()?).is_some(),
                _ => {
                    self.pos = start;
                    return self.error(format!(
                        "unknown section '{section}' (alphabet, membranes, rules, priorities)"
                    ));
                }
            };
            if duplicate {
                self.pos = start;
                return self.error(format!("section '{section}' appears twice"));
            }
        }
        let Some(tree) = tree else {
            return self.error("missing 'membranes' section".into());
        };
        let mut sys = PSystem::new(tree);
        sys.rules = rules.unwrap_or_default();
        sys.priorities = priorities.unwrap_or_default();
        match alphabet {
            Some(a) => sys.alphabet = a,
            None => sys.infer_alphabet(),
        }
        Ok(sys)
    }

    fn alphabet(&mut self) -> PResult<BTreeMap<String, usize>> {
        self.expect(Tok::LBrace, "after 'alphabet'")?;
        let mut out = BTreeMap::new();
        while *self.peek() != Tok::RBrace {
            let start = self.pos;
            let base = self.word("a symbol name")?;
            self.expect(Tok::Slash, "between symbol name and arity")?;
            let arity = self.number("an arity")?;
            if out.insert(base.clone(), arity).is_some() {
                self.pos = start;
                return self.error(format!("symbol '{base}' declared twice"));
            }
        }
        self.advance();
        Ok(out)
    }

    fn charge(&mut self) -> PResult<Charge> {
        self.expect(Tok::Caret, "before a charge")?;
        let c = match self.peek() {
            Tok::Plus => Charge::Plus,
            Tok::Minus => Charge::Minus,
            Tok::Word(w) if w == "0" => Charge::Neutral,
            other => return self.error(format!("expected a charge 0, + or -, found {}", other.describe())),
        };
        self.advance();
        Ok(c)
    }

    fn membrane(&mut self) -> PResult<MembraneNode> {
        let label = self.word("a membrane label")?;
        let mut node = MembraneNode::new(&label);
        node.charge = self.charge()?;
        self.expect(Tok::LBrace, "to open the membrane")?;
        node.contents = self.multiset()?;
        self.expect(Tok::Semi, "after the initial multiset")?;
        while *self.peek() != Tok::RBrace {
            node.children.push(self.membrane()?);
        }
        self.advance();
        Ok(node)
    }

    fn multiset(&mut self) -> PResult<Multiset> {
        let mut ms = Multiset::new();
        if *self.peek() == Tok::Tilde {
            self.advance();
            return Ok(ms);
        }
        while let Tok::Word(base) = self.peek().clone() {
            self.advance();
            let mut params = Vec::new();
            if *self.peek() == Tok::LBrace {
                self.advance();
                loop {
                    let neg = *self.peek() == Tok::Minus;
                    if neg {
                        self.advance();
                    }
                    let v: i64 = self.number("an integer parameter")?;
                    params.push(if neg { -v } else { v });
                    match self.peek() {
                        Tok::Comma => {
                            self.advance();
                        }
                        Tok::RBrace => {
                            self.advance();
                            break;
                        }
                        other => {
                            return self.error(format!("expected ',' or '}}', found {}", other.describe()))
                        }
                    }
                }
            }
            let mut count = 1u64;
            if *self.peek() == Tok::Caret {
                self.advance();
                count = self.number("a multiplicity")?;
                if count == 0 {
                    self.pos -= 1;
                    return self.error("multiplicity must be at least 1".into());
                }
            }
            let sym = Symbol::new(&base, &params);
            if ms.count(sym).checked_add(count).is_none() {
                return self.error(format!("multiplicity of {sym} overflows"));
            }
            ms.add(sym, count);
        }
        Ok(ms)
    }

    /// `[ v [ cv ]'child ^c ]'label ^c` after the outside multiset.
    fn side(&mut self) -> PResult<Side> {
        self.expect(Tok::LBracket, "to open the membrane")?;
        let inside = self.multiset()?;
        let mut child = None;
        if *self.peek() == Tok::LBracket {
            self.advance();
            let cv = self.multiset()?;
            self.expect(Tok::RBracket, "to close the child membrane")?;
            self.expect(Tok::Quote, "before the child label")?;
            let label = self.word("a membrane label")?;
            let charge = self.charge()?;
            child = Some((cv, label, charge));
        }
        self.expect(Tok::RBracket, "to close the membrane")?;
        self.expect(Tok::Quote, "before the membrane label")?;
        let label = self.word("a membrane label")?;
        let charge = self.charge()?;
        Ok(Side {
            inside,
            child,
            label,
            charge,
        })
    }

    fn rules(&mut self) -> PResult<Vec<Rule>> {
        self.expect(Tok::LBrace, "after 'rules'")?;
        let mut rules = Vec::new();
        while *self.peek() != Tok::RBrace {
            let id = self.word("a rule id")?;
            self.expect(Tok::Colon, "after the rule id")?;
            let u = self.multiset()?;
            let Side {
                inside: v,
                child: lchild,
                label,
                charge: pre,
            } = self.side()?;
            self.expect(Tok::Arrow, "between the two sides")?;
            let u2 = self.multiset()?;
            let at = self.pos;
            let Side {
                inside: v2,
                child: rchild,
                label: label2,
                charge: post,
            } = self.side()?;
            if label2 != label {
                self.pos = at;
                return self.error(format!("rule {id}: right side names '{label2}', left side '{label}'"));
            }
            let child = match (lchild, rchild) {
                (None, None) => None,
                (Some((cv, cl, cpre)), Some((cv2, cl2, cpost))) if cl == cl2 => Some(ChildPattern {
                    label: Label::new(&cl),
                    pre_charge: cpre,
                    post_charge: cpost,
                    consume: cv,
                    produce: cv2,
                }),
                _ => {
                    self.pos = at;
                    return self.error(format!("rule {id}: child membranes of the two sides differ"));
                }
            };
            rules.push(Rule {
                id,
                target: Label::new(&label),
                pre_charge: pre,
                post_charge: post,
                consume_outside: u,
                produce_outside: u2,
                consume_inside: v,
                produce_inside: v2,
                child,
            });
        }
        self.advance();
        Ok(rules)
    }

    fn priorities(&mut self) -> PResult<BTreeSet<(String, String)>> {
        self.expect(Tok::LBrace, "after 'priorities'")?;
        let mut out = BTreeSet::new();
        while *self.peek() != Tok::RBrace {
            let hi = self.word("a rule id")?;
            self.expect(Tok::Gt, "between rule ids")?;
            let lo = self.word("a rule id")?;
            out.insert((hi, lo));
        }
        self.advance();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::build_mult_system;
    use crate::engine::{run, Halting, TraceMode};
    use proptest::prelude::*;

    #[test]
    fn mult_system_round_trips() {
        let sys = build_mult_system(6, 7);
        let text = serialize(&sys);
        let back = parse(&text).unwrap();
        assert_eq!(back.rules.len(), 44);
        assert_eq!(back.tree.count(), 3);
        assert_eq!(back, sys);
        assert_eq!(serialize(&back), text);
    }

    #[test]
    fn empty_rules_halts() {
        let sys = parse("membranes { 0 ^0 { a ; } }").unwrap();
        let t = run(&sys, 10, TraceMode::Light).unwrap();
        assert_eq!(t.steps_executed(), 0);
        assert_eq!(t.halting, Halting::Quiescent);
    }

    #[test]
    fn handwritten_document() {
        let text = "
            # two membranes
            alphabet { a/0 b/1 c/0 }
            membranes {
              0 ^0 { ~ ;
                1 ^- { a^3 b{-2} ; }
              }
            }
            rules {
              R1 : ~ [ a [ ~ ]'1 ^- ]'0 ^0 -> c [ ~ [ b{4}^2 ]'1 ^+ ]'0 ^0
              R2 : ~ [ a ]'1 ^- -> ~ [ c ]'1 ^-
            }
            priorities { R1 > R2 }
        ";
        // R1 consumes a from the skin, which starts empty; still a valid system
        let sys = parse(text).unwrap();
        let child = sys.rules[0].child.as_ref().unwrap();
        assert_eq!(child.post_charge, Charge::Plus);
        assert_eq!(child.produce.count(Symbol::new("b", &[4])), 2);
        assert_eq!(sys.tree.children[0].contents.count(Symbol::new("b", &[-2])), 1);
        assert_eq!(parse(&serialize(&sys)).unwrap(), sys);
    }

    #[test]
    fn priority_cycle_rejected() {
        let text = "membranes { 0 ^0 { ~ ; } }
            rules { A : ~ [ a ]'0 ^0 -> ~ [ ~ ]'0 ^0  B : ~ [ a ]'0 ^0 -> ~ [ ~ ]'0 ^0 }
            priorities { A > B B > A }";
        match parse(text) {
            Err(PspecError::Invalid(d)) => assert!(d.iter().any(|m| m.contains("cyclic"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let cases = [
            (
                "membranes { 0 ^0 { ~ ; } } rules { A : ~ [ a ]'MULT_9_9 ^0 -> ~ [ ~ ]'MULT_9_9 ^0 }",
                "unknown membrane",
            ),
            ("membranes { 0 ^0 { ~ ; } } rules { A : ~ [ ~ ]'0 ^0 -> ~ [ a ]'0 ^0 }", "consumes nothing"),
            (
                "membranes { 0 ^0 { ~ ; } } rules { A : ~ [ a ]'0 ^0 -> ~ [ ~ ]'0 ^0 A : ~ [ a ]'0 ^0 -> ~ [ ~ ]'0 ^0 }",
                "duplicate rule",
            ),
            ("alphabet { a/1 } membranes { 0 ^0 { a ; } }", "parameters"),
            ("alphabet { } membranes { 0 ^0 { a ; } }", "not in the alphabet"),
            ("membranes { 0 ^0 { ~ ; 1 ^0 { ~ ; } 1 ^0 { ~ ; } } }", "more than once"),
        ];
        for (text, needle) in cases {
            match parse(text) {
                Err(PspecError::Invalid(d)) => {
                    assert!(d.iter().any(|m| m.contains(needle)), "{text}: {d:?}")
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("membranes {\n  0 ^0 { a^0 ; }\n}").unwrap_err();
        assert_eq!(
            err,
            PspecError::Syntax {
                line: 2,
                column: 12,
                message: "multiplicity must be at least 1".into()
            }
        );
        assert!(matches!(parse("membranes { 0 ^* { } }"), Err(PspecError::Syntax { line: 1, column: 16, .. })));
        assert!(matches!(parse(""), Err(PspecError::Syntax { .. })));
        assert!(matches!(parse("rules { }"), Err(PspecError::Syntax { .. })));
    }

    fn label_name(i: usize) -> String {
        format!("m{i}")
    }

    prop_compose! {
        fn arb_multiset()(items in prop::collection::vec((0..4usize, 0..3i64, 1..5u64), 0..4)) -> Multiset {
            items
                .into_iter()
                .map(|(b, p, n)| {
                    // base s{b} always carries b % 2 parameters so arities agree
                    let params: Vec<i64> = (0..b % 2).map(|_| p - 1).collect();
                    (Symbol::new(&format!("s{b}"), &params), n)
                })
                .collect()
        }
    }

    fn arb_charge() -> impl Strategy<Value = Charge> {
        prop::sample::select(Charge::ALL.to_vec())
    }

    prop_compose! {
        fn arb_system()(
            parents in prop::collection::vec(any::<prop::sample::Index>(), 0..5),
            contents in prop::collection::vec(arb_multiset(), 6),
            charges in prop::collection::vec(arb_charge(), 6),
            rules in prop::collection::vec(
                (any::<prop::sample::Index>(), arb_charge(), arb_charge(), arb_multiset(), arb_multiset(),
                 arb_multiset(), arb_multiset(), any::<Option<prop::sample::Index>>(), arb_multiset(), arb_multiset(),
                 arb_charge(), arb_charge()),
                0..6),
            prio in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..6),
        ) -> PSystem {
            let n = parents.len() + 1;
            // membrane i > 0 hangs under some membrane < i
            let mut parent = vec![None];
            for (i, p) in parents.iter().enumerate() {
                parent.push(Some(p.index(i + 1)));
            }
            fn build(i: usize, parent: &[Option<usize>], contents: &[Multiset], charges: &[Charge]) -> MembraneNode {
                let mut node = MembraneNode::new(&label_name(i)).with_contents(contents[i].clone());
                node.charge = charges[i];
                for (j, p) in parent.iter().enumerate() {
                    if *p == Some(i) {
                        node.children.push(build(j, parent, contents, charges));
                    }
                }
                node
            }
            let mut sys = PSystem::new(build(0, &parent, &contents, &charges));
            for (r, (t, pre, post, u, u2, v, v2, child, cv, cv2, cpre, cpost)) in rules.into_iter().enumerate() {
                let target = t.index(n);
                let kids: Vec<usize> = (0..n).filter(|&j| parent[j] == Some(target)).collect();
                let mut v = v;
                if v.is_empty() {
                    v.add(Symbol::plain("s0"), 1);
                }
                let mut rule = Rule::evolve(format!("R{r}"), &label_name(target), pre)
                    .to_charge(post)
                    .consume_out(u)
                    .produce_out(u2)
                    .consume_in(v)
                    .produce_in(v2);
                if let (Some(c), false) = (child, kids.is_empty()) {
                    rule = rule.with_child(ChildPattern {
                        label: Label::new(&label_name(kids[c.index(kids.len())])),
                        pre_charge: cpre,
                        post_charge: cpost,
                        consume: cv,
                        produce: cv2,
                    });
                }
                sys.rules.push(rule);
            }
            let m = sys.rules.len();
            if m >= 2 {
                for (a, b) in prio {
                    let (a, b) = (a.index(m), b.index(m));
                    if a < b {
                        sys.add_priority(&format!("R{a}"), &format!("R{b}"));
                    }
                }
            }
            sys.infer_alphabet();
            sys
        }
    }

    proptest! {
        #[test]
        fn round_trip(sys in arb_system()) {
            prop_assert!(validate(&sys).is_empty(), "{:?}", validate(&sys));
            let text = serialize(&sys);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &sys);
            prop_assert_eq!(serialize(&back), text);
        }

        #[test]
        fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
            let _ = parse(&s);
        }

        #[test]
        fn mangled_documents_never_panic(sys in arb_system(), cut in any::<prop::sample::Index>(), junk in "[\\[\\]{}^'~;:>,/+-]{0,3}") {
            let text = serialize(&sys);
            let mut at = cut.index(text.len() + 1);
            while !text.is_char_boundary(at) {
                at -= 1;
            }
            let mangled = format!("{}{}{}", &text[..at], junk, &text[at..]);
            let _ = parse(&mangled);
            let _ = parse(&text[..at]);
        }
    }
}
