//! Reading a group multiplication table back out of layer weights.
//!
//! For weight rows that are (scaled) characters, the entrywise product
//! of rows `i` and `j` is again a character row, the one labelled by
//! the group product of the labels. So the composition rule lives in
//! the weights themselves:
//!
//! ```text
//! C(i, j) = argmax_k | <W_i . W_j, W_k> |
//! ```
//!
//! with `.` the entrywise product and the inner product conjugating its
//! second argument. On a trained layer this recovers a table isomorphic
//! to the data group's; on arbitrary weights it usually fails the Latin
//! square check, which is the point of reporting rather than assuming.

use crate::bnn::NetworkWeights;
use crate::group::{CayleyTable, FiniteAbelianGroup};
use crate::linalg::{inner, C64};
use thiserror::Error;

/// Isomorphism search is factorial in the order; past this it is not
/// worth brute force.
pub const MAX_ISOMORPHISM_ORDER: usize = 8;

/// Two candidate scores closer than this count as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CayleyError {
    #[error("isomorphism search supports order <= {max}, got {order}")]
    TooLarge { order: usize, max: usize },
    #[error("tables of different orders ({left} vs {right}) cannot be compared")]
    OrderMismatch { left: usize, right: usize },
}

/// Result of reading a composition table from weights.
#[derive(Clone, Debug)]
pub struct RecoveryReport {
    n: usize,
    entries: Vec<usize>,
    match_scores: Vec<f64>,
    ties: Vec<(usize, usize)>,
    table: Option<CayleyTable>,
}

impl RecoveryReport {
    pub fn dims(&self) -> usize {
        self.n
    }

    /// Raw argmax indices, row-major, whether or not they form a valid
    /// table.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> usize {
        self.entries[i * self.n + j]
    }

    /// Winning |inner product| per cell, row-major.
    pub fn match_scores(&self) -> &[f64] {
        &self.match_scores
    }

    pub fn min_match_score(&self) -> f64 {
        self.match_scores.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Cells where the argmax was ambiguous; the smallest index won.
    pub fn ties(&self) -> &[(usize, usize)] {
        &self.ties
    }

    pub fn has_ties(&self) -> bool {
        !self.ties.is_empty()
    }

    pub fn is_latin(&self) -> bool {
        self.table.is_some()
    }

    /// The recovered table, present only when the entries form a Latin
    /// square.
    pub fn table(&self) -> Option<&CayleyTable> {
        self.table.as_ref()
    }
}

/// Recovers a composition table from weight row products.
pub fn cayley_from_irreps(w: &NetworkWeights) -> RecoveryReport {
    let n = w.dims();
    let mat = w.matrix();
    let mut entries = vec![0usize; n * n];
    let mut match_scores = vec![0.0f64; n * n];
    let mut ties = Vec::new();
    let mut rho = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                rho[l] = mat.get(i, l) * mat.get(j, l);
            }
            let scores: Vec<f64> = (0..n).map(|k| inner(&rho, mat.row(k)).norm()).collect();
            let mut best = 0usize;
            for k in 1..n {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            let tied = scores
                .iter()
                .enumerate()
                .filter(|(k, s)| *k != best && scores[best] - **s <= TIE_TOLERANCE)
                .count();
            if tied > 0 {
                ties.push((i, j));
                // Deterministic choice: the smallest index within the tie.
                best = scores
                    .iter()
                    .enumerate()
                    .find(|(_, s)| scores[best] - **s <= TIE_TOLERANCE)
                    .map(|(k, _)| k)
                    .unwrap();
            }
            entries[i * n + j] = best;
            match_scores[i * n + j] = scores[best];
        }
    }
    let table =
        CayleyTable::from_entries(n, entries.clone()).filter(|t| t.is_latin_square());
    RecoveryReport { n, entries, match_scores, ties, table }
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn is_witness(table: &CayleyTable, reference: &CayleyTable, pi: &[usize]) -> bool {
    let n = table.order();
    for i in 0..n {
        for j in 0..n {
            if pi[table.get(i, j)] != reference.get(pi[i], pi[j]) {
                return false;
            }
        }
    }
    true
}

/// Searches for a relabelling `pi` with
/// `pi(table(i, j)) = reference(pi(i), pi(j))` where `reference` is the
/// group's own table. Permutations are tried in lexicographic order, so
/// the returned witness is canonical.
pub fn find_isomorphism(
    table: &CayleyTable,
    group: &FiniteAbelianGroup,
) -> Result<Option<Vec<usize>>, CayleyError> {
    let n = table.order();
    if n != group.order() {
        return Err(CayleyError::OrderMismatch { left: n, right: group.order() });
    }
    if n > MAX_ISOMORPHISM_ORDER {
        return Err(CayleyError::TooLarge { order: n, max: MAX_ISOMORPHISM_ORDER });
    }
    let reference = group.cayley_table();
    let mut pi: Vec<usize> = (0..n).collect();
    loop {
        if is_witness(table, &reference, &pi) {
            return Ok(Some(pi));
        }
        if !next_permutation(&mut pi) {
            return Ok(None);
        }
    }
}

pub fn is_isomorphic(table: &CayleyTable, group: &FiniteAbelianGroup) -> Result<bool, CayleyError> {
    Ok(find_isomorphism(table, group)?.is_some())
}
