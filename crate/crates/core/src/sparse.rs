//! Sparse term vectors and counted sets keyed by interned strings.
//!
//! Both types keep their keys sorted so that every reduction visits terms in
//! the same order, which keeps results reproducible bit for bit.

use std::collections::btree_map::{self, BTreeMap};
use std::sync::Arc;

use crate::scalar::Scalar;

/// A non-negative sparse vector. Zero weights are never stored.
#[derive(Debug, Clone)]
pub struct SparseVector<T> {
    entries: BTreeMap<Arc<str>, T>,
    norm_sq: T,
}

impl<T: Scalar> Default for SparseVector<T> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
            norm_sq: T::zero(),
        }
    }
}

impl<T: Scalar> PartialEq for SparseVector<T> {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl<T: Scalar> SparseVector<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `delta` to the weight of `term`, removing the entry when the
    /// weight reaches zero.
    pub fn add(&mut self, term: &Arc<str>, delta: T) {
        if delta.is_zero() {
            return;
        }
        let old = self.entries.get(term).copied().unwrap_or_else(T::zero);
        let new = old + delta;
        debug_assert!(new >= T::zero(), "negative weight for {term}");
        self.norm_sq = self.norm_sq - old * old + new * new;
        if new.is_zero() {
            self.entries.remove(term);
        } else {
            self.entries.insert(term.clone(), new);
        }
        if self.entries.is_empty() {
            self.norm_sq = T::zero();
        }
    }

    pub fn get(&self, term: &str) -> T {
        self.entries.get(term).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Arc<str>, T> {
        self.entries.iter()
    }

    pub fn norm_sq(&self) -> T {
        self.norm_sq
    }

    pub fn norm(&self) -> T {
        self.norm_sq.sqrt()
    }

    pub fn sum(&self) -> T {
        self.entries.values().copied().sum()
    }

    /// Inner product. Walks the shorter vector and probes the longer one;
    /// matching terms are summed in key order either way, so the result is
    /// symmetric.
    pub fn dot(&self, other: &Self) -> T {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(k, w)| large.entries.get(k).map(|v| *w * *v))
            .fold(T::zero(), |acc, x| acc + x)
    }

    /// Cosine similarity; zero when either side is empty.
    pub fn cosine(&self, other: &Self) -> T {
        if self.is_empty() || other.is_empty() {
            return T::zero();
        }
        let c = self.dot(other) / (self.norm_sq * other.norm_sq).sqrt();
        c.min(T::one())
    }

    /// Recomputes the cached norm from the entries.
    pub fn recompute_norm(&mut self) {
        self.norm_sq = self.entries.values().map(|w| *w * *w).fold(T::zero(), |a, x| a + x);
    }
}

impl<T: Scalar> FromIterator<(Arc<str>, T)> for SparseVector<T> {
    fn from_iter<I: IntoIterator<Item = (Arc<str>, T)>>(iter: I) -> Self {
        let mut v = Self::new();
        for (k, w) in iter {
            v.add(&k, w);
        }
        v
    }
}

/// A multiset of string keys. Similarity code only looks at its support
/// (the set of keys); the counts make removals possible.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountSet {
    counts: BTreeMap<Arc<str>, u32>,
}

impl CountSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &Arc<str>) {
        *self.counts.entry(key.clone()).or_default() += 1;
    }

    /// Decrements `key`, dropping it at zero. Returns false if absent.
    pub fn remove(&mut self, key: &str) -> bool {
        match self.counts.get_mut(key) {
            Some(c) if *c > 1 => {
                *c -= 1;
                true
            }
            Some(_) => {
                self.counts.remove(key);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.counts.contains_key(key)
    }

    pub fn count(&self, key: &str) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Number of distinct keys.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Arc<str>> + '_ {
        self.counts.keys()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Arc<str>, u32> {
        self.counts.iter()
    }

    /// Size of the intersection of the two supports.
    pub fn intersection_len(&self, other: &Self) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.counts.keys().filter(|k| large.counts.contains_key(*k)).count()
    }

    /// `|A ∩ B| / sqrt(|A| |B|)` over supports; zero when either is empty.
    pub fn set_cosine<T: Scalar>(&self, other: &Self) -> T {
        if self.is_empty() || other.is_empty() {
            return T::zero();
        }
        let inter = T::count(self.intersection_len(other));
        let c = inter / (T::count(self.len()) * T::count(other.len())).sqrt();
        c.min(T::one())
    }
}
