//! Group Fourier analysis on finite abelian groups.
//!
//! Every irreducible representation of `Z/n_1 x ... x Z/n_k` is a
//! one-dimensional character, labelled by a tuple `r` enumerated exactly
//! like the elements:
//!
//! ```text
//! chi_r(g) = exp(-2*pi*i * sum_j r_j g_j / n_j)
//! ```
//!
//! The character table `M[r][g] = chi_r(g)` gives the group Fourier
//! transform `fhat = M x` and its inverse `x = (1/N) M^dagger fhat`.
//! Characters are closed under entrywise products,
//! `chi_a . chi_b = chi_{a+b}`, and the closure index `c(i, j)` is what
//! couples Fourier coefficients in the bispectrum:
//!
//! ```text
//! q_r      = |fhat_r|^2                          power spectrum
//! B_{i,j}  = fhat_i fhat_j conj(fhat_{c(i,j)})   bispectrum
//! ```
//!
//! Both are invariant under translation. The power spectrum forgets all
//! relative phase; the bispectrum is generically complete up to orbit,
//! which is what the learnable layer in [`crate::bnn`] exploits.
//!
//! The closure index is computed numerically, by matching the entrywise
//! product of two character rows against all rows and taking the best
//! match. For exact character tables this reproduces index addition; on
//! learned weights the same operation is what recovers the Cayley table.

use crate::group::{FiniteAbelianGroup, GroupError};
use crate::linalg::{self, CMatrix, C64};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("signal length {got} does not match group order {expected}")]
    SignalLength { expected: usize, got: usize },
    #[error("input is degenerate: {0}")]
    Degenerate(&'static str),
}

impl From<GroupError> for SpectralError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::SignalLength { expected, got } => {
                SpectralError::SignalLength { expected, got }
            }
            _ => SpectralError::Degenerate("group error"),
        }
    }
}

/// Character table of a finite abelian group, with the row-closure index
/// precomputed.
#[derive(Clone, Debug)]
pub struct CharacterTable {
    group: FiniteAbelianGroup,
    matrix: CMatrix,
    closure: Vec<usize>,
}

impl CharacterTable {
    pub fn new(group: &FiniteAbelianGroup) -> Self {
        let n = group.order();
        let mut matrix = CMatrix::zeros(n, n);
        for (r, rep) in group.elements().enumerate() {
            for (c, el) in group.elements().enumerate() {
                // Accumulate sum_j r_j g_j / n_j with each term reduced
                // mod 1 to keep the phase argument small.
                let mut t = 0.0f64;
                for ((&rj, &gj), &nj) in
                    rep.coords().iter().zip(el.coords()).zip(group.factors())
                {
                    t += ((rj as u64 * gj as u64) % nj as u64) as f64 / nj as f64;
                }
                matrix.set(r, c, C64::from_polar(1.0, -TAU * t.fract()));
            }
        }

        // Row closure: the entrywise product of rows i and j is again a
        // row; find it by maximizing |<row_i . row_j, row_k>|.
        let mut closure = vec![0usize; n * n];
        let mut product = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in i..n {
                for (p, (&a, &b)) in product.iter_mut().zip(matrix.row(i).iter().zip(matrix.row(j))) {
                    *p = a * b;
                }
                let mut best = 0usize;
                let mut best_score = -1.0f64;
                for k in 0..n {
                    let score = linalg::inner(&product, matrix.row(k)).norm();
                    if score > best_score {
                        best_score = score;
                        best = k;
                    }
                }
                closure[i * n + j] = best;
                closure[j * n + i] = best;
            }
        }
        CharacterTable { group: group.clone(), matrix, closure }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    /// The full table, rows indexed by representation, columns by element.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn row(&self, r: usize) -> &[C64] {
        self.matrix.row(r)
    }

    /// Index `c(i, j)` with `chi_i . chi_j = chi_{c(i,j)}`.
    pub fn closure_index(&self, i: usize, j: usize) -> usize {
        self.closure[i * self.order() + j]
    }

    fn check_len(&self, x: &[C64]) -> Result<(), SpectralError> {
        if x.len() == self.order() {
            Ok(())
        } else {
            Err(SpectralError::SignalLength { expected: self.order(), got: x.len() })
        }
    }

    /// Group Fourier transform `fhat_r = sum_g chi_r(g) x(g)`.
    pub fn gft(&self, x: &[C64]) -> Result<Vec<C64>, SpectralError> {
        self.check_len(x)?;
        Ok(self.matrix.matvec(x))
    }

    /// Inverse transform `x = (1/N) M^dagger fhat`.
    pub fn inverse_gft(&self, fhat: &[C64]) -> Result<Vec<C64>, SpectralError> {
        self.check_len(fhat)?;
        let n = self.order() as f64;
        let mut x = self.matrix.conj_transpose_matvec(fhat);
        for v in &mut x {
            *v /= n;
        }
        Ok(x)
    }
}

/// Power spectrum `q_r = |fhat_r|^2` of a Fourier-domain signal.
pub fn power_spectrum(fhat: &[C64]) -> Vec<f64> {
    fhat.iter().map(|v| v.norm_sqr()).collect()
}

pub(crate) fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Flat position of the unordered pair {i, j}, i <= j, in upper
/// triangular row-major order.
pub(crate) fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Bispectrum stored on the upper triangle (the matrix is symmetric in
/// its two representation indices).
#[derive(Clone, Debug, PartialEq)]
pub struct BispectrumMatrix {
    n: usize,
    values: Vec<C64>,
}

impl BispectrumMatrix {
    /// Number of representation indices per axis.
    pub fn dims(&self) -> usize {
        self.n
    }

    /// Upper-triangular values in row-major pair order.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Entry (i, j) in either index order.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.values[tri_index(self.n, a, b)]
    }

    /// Frobenius norm over the stored upper triangle.
    pub fn norm(&self) -> f64 {
        linalg::norm2(&self.values)
    }

    /// Unit-norm copy. Errors if the matrix is exactly zero.
    pub fn normalized(&self) -> Result<BispectrumMatrix, SpectralError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(SpectralError::Degenerate("zero bispectrum cannot be normalized"));
        }
        let values = self.values.iter().map(|v| v / n).collect();
        Ok(BispectrumMatrix { n: self.n, values })
    }

    /// Expands to the full symmetric square matrix.
    pub fn full_square(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    /// Largest entrywise absolute difference over the upper triangle.
    pub fn max_abs_diff(&self, other: &BispectrumMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        linalg::max_abs_diff(&self.values, &other.values)
    }
}

/// Bispectrum `B_{i,j} = fhat_i fhat_j conj(fhat_{c(i,j)})` of a
/// Fourier-domain signal, upper triangle only.
pub fn bispectrum(fhat: &[C64], table: &CharacterTable) -> Result<BispectrumMatrix, SpectralError> {
    let n = table.order();
    if fhat.len() != n {
        return Err(SpectralError::SignalLength { expected: n, got: fhat.len() });
    }
    let mut values = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        for j in i..n {
            values.push(fhat[i] * fhat[j] * fhat[table.closure_index(i, j)].conj());
        }
    }
    Ok(BispectrumMatrix { n, values })
}

/// Triple correlation `A(s1, s2) = sum_g conj(x(g)) x(g + s1) x(g + s2)`
/// as a full square matrix over (s1, s2).
pub fn triple_correlation(
    x: &[C64],
    group: &FiniteAbelianGroup,
) -> Result<CMatrix, SpectralError> {
    let n = group.order();
    if x.len() != n {
        return Err(SpectralError::SignalLength { expected: n, got: x.len() });
    }
    // add[g][s] = index(g + s), built once.
    let els: Vec<_> = group.elements().collect();
    let mut add = vec![0usize; n * n];
    for (gi, g) in els.iter().enumerate() {
        for (si, s) in els.iter().enumerate() {
            add[gi * n + si] = group.index(&group.compose(g, s)?)?;
        }
    }
    let mut out = CMatrix::zeros(n, n);
    for s1 in 0..n {
        for s2 in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for g in 0..n {
                acc += x[g].conj() * x[add[g * n + s1]] * x[add[g * n + s2]];
            }
            out.set(s1, s2, acc);
        }
    }
    Ok(out)
}

/// Two-dimensional transform of a square array: the GFT applied to every
/// row and then to every column. Diagonalizes the triple correlation
/// into the full-square bispectrum.
pub fn gft_2d(a: &CMatrix, table: &CharacterTable) -> Result<CMatrix, SpectralError> {
    let n = table.order();
    assert_eq!(a.rows(), n);
    assert_eq!(a.cols(), n);
    let mut rows_done = CMatrix::zeros(n, n);
    for i in 0..n {
        let t = table.gft(a.row(i))?;
        rows_done.row_mut(i).copy_from_slice(&t);
    }
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<C64> = (0..n).map(|i| rows_done.get(i, j)).collect();
        let t = table.gft(&col)?;
        for i in 0..n {
            out.set(i, j, t[i]);
        }
    }
    Ok(out)
}

/// Exhaustive distance from `y` to the orbit of `x`:
/// `min_g || g.x - y ||_2`.
pub fn orbit_distance(
    x: &[C64],
    y: &[C64],
    group: &FiniteAbelianGroup,
) -> Result<f64, SpectralError> {
    if y.len() != group.order() {
        return Err(SpectralError::SignalLength { expected: group.order(), got: y.len() });
    }
    let mut best = f64::INFINITY;
    for g in group.elements() {
        let shifted = group.act_on_signal(&g, x)?;
        let d: f64 = shifted
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        best = best.min(d);
    }
    Ok(best)
}

/// Best scaled orbit match of `y` against `x`.
#[derive(Clone, Copy, Debug)]
pub struct ScaledOrbitMatch {
    /// `min_{g, c >= 0} || c * (g.x) - y ||_2`.
    pub distance: f64,
    /// Scale attaining the minimum.
    pub scale: f64,
    /// Element index attaining the minimum.
    pub element_index: usize,
}

/// Exhaustive orbit distance with a free nonnegative scale on `x`. The
/// optimal scale per element has the closed form
/// `c* = max(0, Re<y, g.x> / ||g.x||^2)`.
pub fn scaled_orbit_distance(
    x: &[C64],
    y: &[C64],
    group: &FiniteAbelianGroup,
) -> Result<ScaledOrbitMatch, SpectralError> {
    if y.len() != group.order() {
        return Err(SpectralError::SignalLength { expected: group.order(), got: y.len() });
    }
    let mut best = ScaledOrbitMatch { distance: f64::INFINITY, scale: 0.0, element_index: 0 };
    for (gi, g) in group.elements().enumerate() {
        let shifted = group.act_on_signal(&g, x)?;
        let denom: f64 = shifted.iter().map(|v| v.norm_sqr()).sum();
        let c = if denom > 0.0 {
            (linalg::inner(y, &shifted).re / denom).max(0.0)
        } else {
            0.0
        };
        let d: f64 = shifted
            .iter()
            .zip(y)
            .map(|(a, b)| (c * a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if d < best.distance {
            best = ScaledOrbitMatch { distance: d, scale: c, element_index: gi };
        }
    }
    Ok(best)
}
