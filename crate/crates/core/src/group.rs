//! Finite commutative groups as products of cyclic factors.
//!
//! A group is an ordered factor list `(n_1, ..., n_k)` representing
//! `Z/n_1 x ... x Z/n_k`. Elements are coordinate tuples, enumerated in
//! mixed-radix order with the **last factor varying fastest**:
//!
//! ```text
//! index(g) = ((g_1 * n_2 + g_2) * n_3 + g_3) * ...
//! ```
//!
//! so for factors (4, 2) the order is (0,0), (0,1), (1,0), ..., (3,1).
//! Every signal, character table row and Cayley table in the crate uses
//! this one enumeration.
//!
//! Signals are complex vectors indexed by element. The group acts by
//! right translation:
//!
//! ```text
//! (g . x)(h) = x(h - g)
//! ```
//!
//! which is a pure index permutation and therefore exact in floating
//! point.

use crate::linalg::C64;
use std::fmt;
use thiserror::Error;

/// Largest supported group order for table-based transforms.
pub const MAX_GROUP_ORDER: usize = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("cyclic factor {0} is smaller than 2")]
    InvalidFactor(u32),
    #[error("group order {0} exceeds the supported maximum {MAX_GROUP_ORDER}")]
    CapacityExceeded(u128),
    #[error("invalid group spec {0:?}: expected comma-separated integers >= 2")]
    InvalidSpec(String),
    #[error("element does not belong to this group")]
    ForeignElement,
    #[error("signal length {got} does not match group order {expected}")]
    SignalLength { expected: usize, got: usize },
}

/// A finite abelian group `Z/n_1 x ... x Z/n_k` with a fixed element
/// enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAbelianGroup {
    factors: Vec<u32>,
    order: usize,
}

/// Element of a [`FiniteAbelianGroup`], stored as its coordinate tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    coords: Vec<u32>,
}

impl GroupElement {
    pub fn coords(&self) -> &[u32] {
        &self.coords
    }
}

impl FiniteAbelianGroup {
    pub fn new(factors: &[u32]) -> Result<Self, GroupError> {
        if factors.is_empty() {
            return Err(GroupError::InvalidSpec(String::new()));
        }
        let mut order: u128 = 1;
        for &f in factors {
            if f < 2 {
                return Err(GroupError::InvalidFactor(f));
            }
            order *= f as u128;
            if order > MAX_GROUP_ORDER as u128 {
                let full: u128 = factors.iter().map(|&f| (f as u128).max(1)).product();
                return Err(GroupError::CapacityExceeded(full));
            }
        }
        Ok(FiniteAbelianGroup { factors: factors.to_vec(), order: order as usize })
    }

    /// Parses a spec string like `"8"` or `"4,2"`.
    pub fn from_spec(spec: &str) -> Result<Self, GroupError> {
        let factors: Result<Vec<u32>, _> = spec
            .split(',')
            .map(|part| part.trim().parse::<u32>())
            .collect();
        match factors {
            Ok(f) if !f.is_empty() => Self::new(&f),
            _ => Err(GroupError::InvalidSpec(spec.to_string())),
        }
    }

    /// The spec string that round-trips through [`Self::from_spec`].
    pub fn spec(&self) -> String {
        self.factors
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn factors(&self) -> &[u32] {
        &self.factors
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { coords: vec![0; self.factors.len()] }
    }

    /// Element at a given enumeration index. Panics if out of range.
    pub fn element(&self, index: usize) -> GroupElement {
        assert!(index < self.order, "element index {index} out of range");
        let mut coords = vec![0u32; self.factors.len()];
        let mut rest = index;
        for (k, &f) in self.factors.iter().enumerate().rev() {
            coords[k] = (rest % f as usize) as u32;
            rest /= f as usize;
        }
        GroupElement { coords }
    }

    /// Enumeration index of an element of this group.
    pub fn index(&self, el: &GroupElement) -> Result<usize, GroupError> {
        self.check(el)?;
        let mut idx = 0usize;
        for (&c, &f) in el.coords.iter().zip(&self.factors) {
            idx = idx * f as usize + c as usize;
        }
        Ok(idx)
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.order).map(|i| self.element(i))
    }

    fn check(&self, el: &GroupElement) -> Result<(), GroupError> {
        let ok = el.coords.len() == self.factors.len()
            && el.coords.iter().zip(&self.factors).all(|(&c, &f)| c < f);
        if ok {
            Ok(())
        } else {
            Err(GroupError::ForeignElement)
        }
    }

    /// Componentwise sum modulo the factors.
    pub fn compose(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        self.check(b)?;
        let coords = a
            .coords
            .iter()
            .zip(&b.coords)
            .zip(&self.factors)
            .map(|((&x, &y), &f)| (x + y) % f)
            .collect();
        Ok(GroupElement { coords })
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        let coords = a
            .coords
            .iter()
            .zip(&self.factors)
            .map(|(&x, &f)| (f - x) % f)
            .collect();
        Ok(GroupElement { coords })
    }

    /// Destination-to-source index map of the translation action:
    /// entry `h` of the result is `index(h - g)`.
    pub fn action_permutation(&self, g: &GroupElement) -> Result<Vec<usize>, GroupError> {
        self.check(g)?;
        let neg = self.inverse(g)?;
        (0..self.order)
            .map(|h| self.index(&self.compose(&self.element(h), &neg)?))
            .collect()
    }

    /// Translates a signal: `(g . x)(h) = x(h - g)`. Exact, since it
    /// only permutes entries.
    pub fn act_on_signal(&self, g: &GroupElement, x: &[C64]) -> Result<Vec<C64>, GroupError> {
        if x.len() != self.order {
            return Err(GroupError::SignalLength { expected: self.order, got: x.len() });
        }
        let perm = self.action_permutation(g)?;
        Ok(perm.into_iter().map(|src| x[src]).collect())
    }

    /// The group's multiplication table over element indices.
    pub fn cayley_table(&self) -> CayleyTable {
        let els: Vec<GroupElement> = self.elements().collect();
        let mut entries = Vec::with_capacity(self.order * self.order);
        for a in &els {
            for b in &els {
                let c = self.compose(a, b).expect("elements of this group");
                entries.push(self.index(&c).expect("composition stays in the group"));
            }
        }
        CayleyTable { n: self.order, entries }
    }

    /// The set `{g . x : g in G}` as a list ordered by first occurrence,
    /// deduplicated exactly. Has `order()` entries iff the stabilizer of
    /// `x` is trivial.
    pub fn orbit(&self, x: &[C64]) -> Result<Vec<Vec<C64>>, GroupError> {
        let mut out: Vec<Vec<C64>> = Vec::new();
        for g in self.elements() {
            let y = self.act_on_signal(&g, x)?;
            if !out.iter().any(|seen| seen == &y) {
                out.push(y);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|n| format!("Z/{n}Z")).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// Multiplication table over element indices, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CayleyTable {
    n: usize,
    entries: Vec<usize>,
}

impl CayleyTable {
    /// Builds from row-major entries; every entry must be `< n`.
    pub fn from_entries(n: usize, entries: Vec<usize>) -> Option<Self> {
        if entries.len() == n * n && entries.iter().all(|&e| e < n) {
            Some(CayleyTable { n, entries })
        } else {
            None
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Every row and every column is a permutation of 0..n.
    pub fn is_latin_square(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            let mut row_seen = vec![false; n];
            let mut col_seen = vec![false; n];
            for j in 0..n {
                let r = self.get(i, j);
                let c = self.get(j, i);
                if row_seen[r] || col_seen[c] {
                    return false;
                }
                row_seen[r] = true;
                col_seen[c] = true;
            }
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Index `e` with `e * j = j` and `i * e = i` for all entries, if any.
    pub fn identity_index(&self) -> Option<usize> {
        (0..self.n)
            .find(|&e| (0..self.n).all(|j| self.get(e, j) == j && self.get(j, e) == j))
    }
}

impl fmt::Display for CayleyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = if self.n > 10 { 3 } else { 2 };
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>width$}", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
