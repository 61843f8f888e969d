//! Process-wide interning of object symbols and membrane labels.
//!
//! A [`Symbol`] is a base name plus a (possibly empty) tuple of integer
//! parameters, e.g. `EXIT{2,3,5,1}`. Equal (base, params) pairs always map to
//! the same 32-bit id, so comparing symbols is an integer comparison. Interned
//! data is leaked and lives for the remainder of the process.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

#[derive(Debug)]
struct SymbolData {
    base: &'static str,
    params: &'static [i64],
}

#[derive(Default)]
struct Interner {
    lookup: HashMap<(&'static str, &'static [i64]), u32>,
    entries: Vec<&'static SymbolData>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| RwLock::new(Interner::default()))
}

fn data(sym: Symbol) -> &'static SymbolData {
    interner().read().expect("interner poisoned").entries[sym.0 as usize]
}

/// An interned alphabet element. `Ord` follows interning order and is only
/// meant for map keys; use [`Symbol::canonical_cmp`] for anything user-facing.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

impl Symbol {
    pub fn new(base: &str, params: &[i64]) -> Symbol {
        {
            let guard = interner().read().expect("interner poisoned");
            if let Some(&id) = guard.lookup.get(&(base, params)) {
                return Symbol(id);
            }
        }
        let mut guard = interner().write().expect("interner poisoned");
        if let Some(&id) = guard.lookup.get(&(base, params)) {
            return Symbol(id);
        }
        let base: &'static str = Box::leak(base.to_owned().into_boxed_str());
        let params: &'static [i64] = Box::leak(params.to_vec().into_boxed_slice());
        let id = u32::try_from(guard.entries.len()).expect("symbol table overflow");
        guard.entries.push(Box::leak(Box::new(SymbolData { base, params })));
        guard.lookup.insert((base, params), id);
        Symbol(id)
    }

    /// Shorthand for a parameterless symbol.
    pub fn plain(base: &str) -> Symbol {
        Symbol::new(base, &[])
    }

    pub fn base(self) -> &'static str {
        data(self).base
    }

    pub fn params(self) -> &'static [i64] {
        data(self).params
    }

    pub fn arity(self) -> usize {
        self.params().len()
    }

    /// Ordering by (base, params); independent of interning order.
    pub fn canonical_cmp(self, other: Symbol) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let (a, b) = (data(self), data(other));
        a.base.cmp(b.base).then_with(|| a.params.cmp(b.params))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = data(*self);
        f.write_str(d.base)?;
        if !d.params.is_empty() {
            f.write_str("{")?;
            for (idx, p) in d.params.iter().enumerate() {
                if idx > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A membrane label. Labels share the symbol interner but never carry
/// parameters; builders flatten indices into the name (`MULT_3_1`).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label(Symbol);

impl Label {
    pub fn new(name: &str) -> Label {
        Label(Symbol::plain(name))
    }

    pub fn as_str(self) -> &'static str {
        self.0.base()
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}", self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_symbols_share_identity() {
        let a = Symbol::new("EXIT", &[1, 2, 3, 1]);
        let b = Symbol::new("EXIT", &[1, 2, 3, 1]);
        assert_eq!(a, b);
        assert_ne!(a, Symbol::new("EXIT", &[1, 2, 3, 2]));
        assert_ne!(Symbol::plain("a"), Symbol::new("a", &[0]));
    }

    #[test]
    fn display_uses_braces() {
        assert_eq!(Symbol::new("EXIT", &[2, 3, 5, 1]).to_string(), "EXIT{2,3,5,1}");
        assert_eq!(Symbol::plain("k1").to_string(), "k1");
    }

    #[test]
    fn canonical_order_ignores_intern_order() {
        let z = Symbol::plain("zz_order_test");
        let a = Symbol::plain("aa_order_test");
        assert_eq!(a.canonical_cmp(z), Ordering::Less);
        let p2 = Symbol::new("q_order", &[2]);
        let p10 = Symbol::new("q_order", &[10]);
        assert_eq!(p2.canonical_cmp(p10), Ordering::Less);
    }
}
