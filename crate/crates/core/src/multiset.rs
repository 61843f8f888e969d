use std::collections::BTreeMap;
use std::fmt;

use crate::symbol::Symbol;

/// A finite multiset of objects. Zero counts are never stored.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Multiset {
    counts: BTreeMap<Symbol, u64>,
}

impl Multiset {
    pub fn new() -> Multiset {
        Multiset::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Symbol, u64)>>(pairs: I) -> Multiset {
        let mut ms = Multiset::new();
        for (sym, n) in pairs {
            ms.add(sym, n);
        }
        ms
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of distinct symbols.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Total number of objects, counting multiplicity.
    pub fn size(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, sym: Symbol) -> u64 {
        self.counts.get(&sym).copied().unwrap_or(0)
    }

    pub fn add(&mut self, sym: Symbol, n: u64) {
        if n > 0 {
            *self.counts.entry(sym).or_insert(0) += n;
        }
    }

    /// Removes `n` copies of `sym`. Returns `false` and leaves the multiset
    /// untouched if fewer than `n` copies are present.
    pub fn remove(&mut self, sym: Symbol, n: u64) -> bool {
        if n == 0 {
            return true;
        }
        match self.counts.get_mut(&sym) {
            Some(c) if *c > n => {
                *c -= n;
                true
            }
            Some(c) if *c == n => {
                self.counts.remove(&sym);
                true
            }
            _ => false,
        }
    }

    /// Adds every element of `other`, `times` times over.
    pub fn add_scaled(&mut self, other: &Multiset, times: u64) {
        if times == 0 {
            return;
        }
        for (&sym, &n) in &other.counts {
            self.add(sym, n * times);
        }
    }

    /// Removes `other` scaled by `times`. Panics if not contained; callers
    /// check with [`Multiset::multiplicity_in`] first.
    pub fn remove_scaled(&mut self, other: &Multiset, times: u64) {
        if times == 0 {
            return;
        }
        for (&sym, &n) in &other.counts {
            let ok = self.remove(sym, n * times);
            assert!(ok, "remove_scaled: {sym} not available");
        }
    }

    /// Largest `k` such that `self` scaled by `k` fits inside `host`.
    /// `None` when `self` is empty (any multiple fits).
    pub fn multiplicity_in(&self, host: &Multiset) -> Option<u64> {
        self.counts
            .iter()
            .map(|(&sym, &n)| host.count(sym) / n)
            .min()
    }

    pub fn contains(&self, other: &Multiset) -> bool {
        other.multiplicity_in(self).is_none_or(|k| k >= 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, u64)> + '_ {
        self.counts.iter().map(|(&s, &n)| (s, n))
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.counts.keys().copied()
    }

    /// Elements sorted by symbol name and parameters.
    pub fn canonical(&self) -> Vec<(Symbol, u64)> {
        let mut items: Vec<_> = self.iter().collect();
        items.sort_by(|a, b| a.0.canonical_cmp(b.0));
        items
    }

    /// Copy keeping only symbols whose base name satisfies `keep`.
    pub fn filter_base(&self, mut keep: impl FnMut(&str) -> bool) -> Multiset {
        Multiset {
            counts: self
                .counts
                .iter()
                .filter(|(s, _)| keep(s.base()))
                .map(|(&s, &n)| (s, n))
                .collect(),
        }
    }

    pub fn merge(&mut self, other: &Multiset) {
        self.add_scaled(other, 1);
    }
}

impl FromIterator<(Symbol, u64)> for Multiset {
    fn from_iter<I: IntoIterator<Item = (Symbol, u64)>>(iter: I) -> Self {
        Multiset::from_pairs(iter)
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("~");
        }
        for (idx, (sym, n)) in self.canonical().into_iter().enumerate() {
            if idx > 0 {
                f.write_str(" ")?;
            }
            if n == 1 {
                write!(f, "{sym}")?;
            } else {
                write!(f, "{sym}^{n}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(i: u8) -> Symbol {
        Symbol::new("ms_t", &[i64::from(i)])
    }

    #[test]
    fn remove_never_goes_negative() {
        let mut ms = Multiset::from_pairs([(sym(0), 2)]);
        assert!(!ms.remove(sym(0), 3));
        assert_eq!(ms.count(sym(0)), 2);
        assert!(ms.remove(sym(0), 2));
        assert!(ms.is_empty());
    }

    #[test]
    fn multiplicity() {
        let host = Multiset::from_pairs([(sym(0), 7), (sym(1), 3)]);
        let pat = Multiset::from_pairs([(sym(0), 2), (sym(1), 1)]);
        assert_eq!(pat.multiplicity_in(&host), Some(3));
        assert_eq!(Multiset::new().multiplicity_in(&host), None);
        assert!(host.contains(&pat));
        assert!(!pat.contains(&host));
    }

    #[test]
    fn display_is_canonical() {
        let ms = Multiset::from_pairs([(Symbol::plain("b"), 3), (Symbol::plain("a"), 1)]);
        assert_eq!(ms.to_string(), "a b^3");
        assert_eq!(Multiset::new().to_string(), "~");
    }

    proptest! {
        #[test]
        fn add_remove_inverse(items in prop::collection::vec((0u8..6, 1u64..50), 0..12)) {
            let mut ms = Multiset::new();
            for &(s, n) in &items {
                ms.add(sym(s), n);
            }
            let total: u64 = items.iter().map(|&(_, n)| n).sum();
            prop_assert_eq!(ms.size(), total);
            for &(s, n) in items.iter().rev() {
                prop_assert!(ms.remove(sym(s), n));
            }
            prop_assert!(ms.is_empty());
        }
    }
}
