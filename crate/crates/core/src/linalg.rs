//! Minimal dense complex linear algebra.
//!
//! The matrices in this crate are small (group order at most 4096, and
//! the interesting cases are n = 8), dense, and always complex, so a
//! thin row-major wrapper around `Vec<Complex64>` beats pulling in a
//! full linear algebra stack. The gradient code in [`crate::bnn`] wants
//! direct slice access to rows anyway.

use num_complex::Complex64;

pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    /// Builds from row-major data. Panics if the length is not rows*cols.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// y = M x.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dotu(self.row(i), x)).collect()
    }

    /// y = M† x, with M† the conjugate transpose.
    pub fn conj_transpose_matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (yj, &m) in y.iter_mut().zip(self.row(i)) {
                *yj += m.conj() * xi;
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Unconjugated dot product sum_k a_k b_k.
pub fn dotu(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hermitian inner product sum_k a_k conj(b_k), conjugate-linear in b.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Euclidean norm of a complex vector.
pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise absolute difference between two vectors.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Orthonormalizes the rows of a square matrix in place by modified
/// Gram-Schmidt, so the result is unitary. Rows that collapse to near
/// zero (never for generic input) are rejected.
pub fn orthonormalize_rows(m: &mut CMatrix) -> Result<(), &'static str> {
    assert_eq!(m.rows, m.cols);
    for i in 0..m.rows {
        for k in 0..i {
            let proj = inner(m.row(i), m.row(k));
            let prev: Vec<C64> = m.row(k).to_vec();
            for (a, b) in m.row_mut(i).iter_mut().zip(&prev) {
                *a -= proj * b;
            }
        }
        let n = norm2(m.row(i));
        if n < 1e-8 {
            return Err("row collapsed during orthonormalization");
        }
        for a in m.row_mut(i) {
            *a /= n;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matvec_against_hand_computation() {
        let m = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)]);
        let y = m.matvec(&[c(1.0, 0.0), c(1.0, 1.0)]);
        assert_eq!(y[0], c(0.0, 1.0));
        assert_eq!(y[1], c(3.0, -1.0));
    }

    #[test]
    fn conj_transpose_matvec_matches_explicit_adjoint() {
        let m = CMatrix::from_vec(2, 2, vec![c(1.0, 2.0), c(3.0, -1.0), c(0.0, 1.0), c(2.0, 2.0)]);
        let x = [c(1.0, -1.0), c(2.0, 0.5)];
        let got = m.conj_transpose_matvec(&x);
        for j in 0..2 {
            let want: C64 = (0..2).map(|i| m.get(i, j).conj() * x[i]).sum();
            assert!((got[j] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn inner_is_conjugate_linear_in_second_argument() {
        let a = [c(1.0, 2.0)];
        let b = [c(0.0, 3.0)];
        assert_eq!(inner(&a, &b), c(1.0, 2.0) * c(0.0, -3.0));
        assert_eq!(dotu(&a, &b), c(1.0, 2.0) * c(0.0, 3.0));
    }

    #[test]
    fn gram_schmidt_yields_unitary_rows() {
        let mut m = CMatrix::from_vec(
            3,
            3,
            vec![
                c(1.0, 0.5), c(-0.3, 1.0), c(0.2, -0.7),
                c(0.4, -1.2), c(0.9, 0.1), c(-1.1, 0.3),
                c(-0.6, 0.8), c(0.5, -0.5), c(1.3, 0.2),
            ],
        );
        orthonormalize_rows(&mut m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = inner(m.row(i), m.row(j));
                assert!((got - c(want, 0.0)).norm() < 1e-12, "rows {i},{j}: {got}");
            }
        }
    }
}
