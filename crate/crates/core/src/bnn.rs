//! The learnable bispectral layer and its training loop.
//!
//! The layer is a complex weight matrix `W` applied through the same
//! algebra as the analytic bispectrum, with the third factor built from
//! the weights themselves instead of a character table:
//!
//! ```text
//! z      = W x
//! beta_p = z_i z_j * (W_i . W_j)^dagger x        p = (i, j), i <= j
//! out    = beta / ||beta||_2
//! ```
//!
//! where `W_i . W_j` is the entrywise product of rows and `dagger`
//! conjugates it. When the rows of `W` are (scaled) group characters,
//! row products are again characters and `beta` reproduces the analytic
//! bispectrum entry for entry, so the normalized output is translation
//! invariant. Training pushes `W` toward exactly that configuration.
//!
//! The orbit separation loss over a batch `{(x_i, y_i)}` is
//!
//! ```text
//! L = sum_i [ sum_{j != i, y_j = y_i} || out(x_i) - out(x_j) ||_2
//!             + gamma * || x_i - W^dagger W x_i ||_2 ]
//! ```
//!
//! The first term collapses outputs within an orbit without comparing
//! across orbits (zero loss does not mean equal outputs everywhere);
//! the second keeps `W` invertible so inputs stay recoverable.
//!
//! # Gradients
//!
//! `L` is real but not holomorphic in `W`, so gradients are Wirtinger
//! cogradients `g = dL/d conj(W)`; the steepest descent direction is
//! `-g`, and for the real and imaginary parts of `W` seen as real
//! parameters, `dL/dA = 2 Re(g)` and `dL/dB = 2 Im(g)`. The optimizer
//! is Adam over exactly those real parameters. The backward pass is
//! closed form; `tests` pin it against central finite differences of
//! the loss value.

use crate::data::{self, OrbitDataset};
use crate::group::FiniteAbelianGroup;
use crate::linalg::{self, CMatrix, C64};
use crate::spectral::{tri_index, tri_len, CharacterTable};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

/// Additive floor inside the output normalization `||beta||`, keeping
/// the training loss finite on pathological batches.
const OUTPUT_NORM_FLOOR_SQ: f64 = 1e-12;

/// Floor for distance and residual denominators in the backward pass.
/// A term whose norm has collapsed to zero contributes zero gradient
/// instead of NaN.
const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BnnError {
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight row {0} has (near-)zero norm")]
    DegenerateRow(usize),
    #[error("signal length {got} does not match weight dimension {expected}")]
    SignalLength { expected: usize, got: usize },
    #[error("unnormalized network output is exactly zero")]
    DegenerateOutput,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}; last finite weights attached")]
    Diverged { epoch: usize, weights: Box<NetworkWeights> },
    #[error("bad weight file: {0}")]
    BadWeightFile(String),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Square complex weight matrix of a bispectral layer.
///
/// Training keeps every row at unit norm (renormalizing after each
/// optimizer step); matrices built or loaded by hand are taken as-is
/// apart from shape and zero-row checks, so that save/load round-trips
/// are byte-exact.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    matrix: CMatrix,
}

const WEIGHT_MAGIC: &[u8; 4] = b"BNNW";
const WEIGHT_VERSION: u16 = 1;

impl NetworkWeights {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self, BnnError> {
        if matrix.rows() != matrix.cols() {
            return Err(BnnError::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
        }
        for i in 0..matrix.rows() {
            if linalg::norm2(matrix.row(i)) < 1e-12 {
                return Err(BnnError::DegenerateRow(i));
            }
        }
        Ok(NetworkWeights { matrix })
    }

    /// The unit-row character table: the analytic fixed point of
    /// training, with `forward` equal to the normalized bispectrum.
    pub fn analytic(table: &CharacterTable) -> Self {
        let n = table.order();
        let scale = 1.0 / (n as f64).sqrt();
        let mut matrix = table.matrix().clone();
        for v in matrix.data_mut() {
            *v *= scale;
        }
        NetworkWeights { matrix }
    }

    /// Random unitary initialization: iid standard normal real and
    /// imaginary parts, rows orthonormalized.
    pub fn random_unitary(n: usize, rng: &mut impl rand::Rng) -> Self {
        use rand_distr::StandardNormal;
        loop {
            let data: Vec<C64> = (0..n * n)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let mut matrix = CMatrix::from_vec(n, n, data);
            if linalg::orthonormalize_rows(&mut matrix).is_ok() {
                return NetworkWeights { matrix };
            }
        }
    }

    pub fn dims(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn renormalize_rows(&mut self) {
        for i in 0..self.matrix.rows() {
            let n = linalg::norm2(self.matrix.row(i));
            if n > 0.0 {
                for v in self.matrix.row_mut(i) {
                    *v /= n;
                }
            }
        }
    }

    /// Largest deviation of a row norm from one.
    pub fn max_row_norm_error(&self) -> f64 {
        (0..self.matrix.rows())
            .map(|i| (linalg::norm2(self.matrix.row(i)) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the binary weight format: magic `BNNW`, version (u16 LE),
    /// dimension (u32 LE), then row-major entries as little-endian
    /// (re, im) f64 pairs.
    pub fn save(&self, path: &Path) -> Result<(), BnnError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(WEIGHT_MAGIC)?;
        w.write_all(&WEIGHT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dims() as u32).to_le_bytes())?;
        for v in self.matrix.data() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BnnError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BnnError> {
        let bad = |m: &str| BnnError::BadWeightFile(m.to_string());
        if bytes.len() < 10 {
            return Err(bad("file too short for header"));
        }
        if &bytes[0..4] != WEIGHT_MAGIC {
            return Err(bad("missing BNNW magic"));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != WEIGHT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let expected = 10 + n * n * 16;
        if bytes.len() != expected {
            return Err(bad(&format!(
                "expected {expected} bytes for dimension {n}, got {}",
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(n * n);
        for chunk in bytes[10..].chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
            data.push(C64::new(re, im));
        }
        Self::from_matrix(CMatrix::from_vec(n, n, data))
    }
}

/// Normalized layer output, stored on the upper triangle of the pair
/// indices like [`crate::spectral::BispectrumMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkOutput {
    n: usize,
    values: Vec<C64>,
}

impl NetworkOutput {
    pub fn dims(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.values[tri_index(self.n, a, b)]
    }

    /// Euclidean distance to another output.
    pub fn distance(&self, other: &NetworkOutput) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Linear front half `z = W x`.
pub fn forward_linear(w: &NetworkWeights, x: &[C64]) -> Result<Vec<C64>, BnnError> {
    check_len(w, x)?;
    Ok(w.matrix.matvec(x))
}

fn check_len(w: &NetworkWeights, x: &[C64]) -> Result<(), BnnError> {
    if x.len() == w.dims() {
        Ok(())
    } else {
        Err(BnnError::SignalLength { expected: w.dims(), got: x.len() })
    }
}

/// Unnormalized layer outputs: `z = Wx` and
/// `beta_p = z_i z_j (W_i . W_j)^dagger x` over pairs `i <= j`.
fn raw_output(mat: &CMatrix, x: &[C64]) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let n = mat.rows();
    let z = mat.matvec(x);
    let mut h = Vec::with_capacity(tri_len(n));
    let mut beta = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        let wi = mat.row(i);
        for j in i..n {
            let wj = mat.row(j);
            let mut hp = C64::new(0.0, 0.0);
            for l in 0..n {
                hp += (wi[l] * wj[l]).conj() * x[l];
            }
            h.push(hp);
            beta.push(z[i] * z[j] * hp);
        }
    }
    (z, h, beta)
}

/// Full layer output with exact unit normalization.
///
/// Errors if the unnormalized output is exactly zero (for instance on
/// the zero signal), since no direction can be normalized out of it.
pub fn forward(w: &NetworkWeights, x: &[C64]) -> Result<NetworkOutput, BnnError> {
    check_len(w, x)?;
    let (_, _, mut beta) = raw_output(&w.matrix, x);
    let s: f64 = beta.iter().map(|v| v.norm_sqr()).sum();
    if !s.is_finite() {
        return Err(BnnError::NonFinite("network output"));
    }
    if s == 0.0 {
        return Err(BnnError::DegenerateOutput);
    }
    let m = s.sqrt();
    for v in &mut beta {
        *v /= m;
    }
    Ok(NetworkOutput { n: w.dims(), values: beta })
}

/// Everything the backward pass needs from one forward evaluation.
/// The stored normalization uses the smoothed norm
/// `sqrt(||beta||^2 + 1e-12)`, which agrees with [`forward`] to well
/// below test tolerances away from degenerate inputs.
pub(crate) struct ForwardCache {
    pub(crate) z: Vec<C64>,
    pub(crate) h: Vec<C64>,
    pub(crate) nu: Vec<C64>,
    norm: f64,
}

pub(crate) fn forward_cache(mat: &CMatrix, x: &[C64]) -> ForwardCache {
    let (z, h, beta) = raw_output(mat, x);
    let s: f64 = beta.iter().map(|v| v.norm_sqr()).sum();
    let norm = (s + OUTPUT_NORM_FLOOR_SQ).sqrt();
    let nu = beta.iter().map(|v| v / norm).collect();
    ForwardCache { z, h, nu, norm }
}

/// Pulls a cogradient on the normalized output back to one on the
/// unnormalized output: the tangent projection
/// `g_beta = (g_nu - nu * Re<nu, g_nu>) / norm`.
fn backprop_normalization(cache: &ForwardCache, g_nu: &[C64]) -> Vec<C64> {
    let along: f64 = cache
        .nu
        .iter()
        .zip(g_nu)
        .map(|(n, g)| (n * g.conj()).re)
        .sum();
    cache
        .nu
        .iter()
        .zip(g_nu)
        .map(|(n, g)| (g - n * along) / cache.norm)
        .collect()
}

/// Accumulates `dL/d conj(W)` for one sample given the cogradient on
/// its normalized output, plus (optionally) the reconstruction term
/// `recon_weight * ||x - W^dagger W x||`.
pub(crate) fn backprop_to_weights(
    mat: &CMatrix,
    x: &[C64],
    cache: &ForwardCache,
    g_nu: &[C64],
    recon_weight: f64,
    g_w: &mut CMatrix,
) {
    let n = mat.rows();
    let g_beta = backprop_normalization(cache, g_nu);

    // beta_p = z_i z_j h_p: cogradients flow to both z slots and to h,
    // the double accumulation on i == j giving the product-rule factor
    // of two automatically. The h path hits W directly.
    let mut g_z = vec![C64::new(0.0, 0.0); n];
    let mut p = 0usize;
    for i in 0..n {
        for j in i..n {
            let gb = g_beta[p];
            let (zi, zj, hp) = (cache.z[i], cache.z[j], cache.h[p]);
            g_z[i] += gb * (zj * hp).conj();
            g_z[j] += gb * (zi * hp).conj();
            let gh_conj = (gb * (zi * zj).conj()).conj();
            for l in 0..n {
                let xl = x[l];
                let gi = gh_conj * mat.get(j, l).conj() * xl;
                let gj = gh_conj * mat.get(i, l).conj() * xl;
                *g_w.row_mut(i).get_mut(l).unwrap() += gi;
                *g_w.row_mut(j).get_mut(l).unwrap() += gj;
            }
            p += 1;
        }
    }

    // z = W x is holomorphic in W: g_W[i][l] += g_z[i] conj(x_l).
    for i in 0..n {
        let gz = g_z[i];
        for (gw, &xl) in g_w.row_mut(i).iter_mut().zip(x) {
            *gw += gz * xl.conj();
        }
    }

    if recon_weight != 0.0 {
        // r = x - W^dagger z with z = W x held from the cache.
        let wz = mat.conj_transpose_matvec(&cache.z);
        let r: Vec<C64> = x.iter().zip(&wz).map(|(a, b)| a - b).collect();
        let norm = linalg::norm2(&r).max(DENOM_FLOOR);
        let g_r: Vec<C64> = r.iter().map(|v| v * (recon_weight / (2.0 * norm))).collect();
        // Direct path through the conjugated weights of W^dagger, then
        // the path through z = W x.
        let w_gr = mat.matvec(&g_r);
        for i in 0..n {
            let zi = cache.z[i];
            let wgr = w_gr[i];
            for ((gw, &grl), &xl) in g_w.row_mut(i).iter_mut().zip(&g_r).zip(x) {
                *gw += -grl.conj() * zi - wgr * xl.conj();
            }
        }
    }
}

/// Pulls a cogradient on the normalized output back to the input
/// signal. Used by the adversary in [`crate::attack`].
pub(crate) fn backprop_to_input(mat: &CMatrix, cache: &ForwardCache, g_nu: &[C64]) -> Vec<C64> {
    let n = mat.rows();
    let g_beta = backprop_normalization(cache, g_nu);
    let mut g_z = vec![C64::new(0.0, 0.0); n];
    let mut g_x = vec![C64::new(0.0, 0.0); n];
    let mut p = 0usize;
    for i in 0..n {
        for j in i..n {
            let gb = g_beta[p];
            let (zi, zj, hp) = (cache.z[i], cache.z[j], cache.h[p]);
            g_z[i] += gb * (zj * hp).conj();
            g_z[j] += gb * (zi * hp).conj();
            let gh = gb * (zi * zj).conj();
            // h_p = sum_l conj(W_il W_jl) x_l is holomorphic in x.
            for l in 0..n {
                g_x[l] += gh * mat.get(i, l) * mat.get(j, l);
            }
            p += 1;
        }
    }
    for (l, gx) in g_x.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            acc += g_z[i] * mat.get(i, l).conj();
        }
        *gx += acc;
    }
    g_x
}

fn finite_slice(vs: &[C64], what: &'static str) -> Result<(), BnnError> {
    if vs.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(BnnError::NonFinite(what))
    }
}

/// Shared implementation of the loss value and its cogradient.
fn loss_and_grad(
    mat: &CMatrix,
    batch: &[(&[C64], usize)],
    gamma: f64,
    want_grad: bool,
) -> Result<(f64, f64, Option<CMatrix>), BnnError> {
    let n = mat.rows();
    if batch.is_empty() {
        return Err(BnnError::EmptyBatch);
    }
    for (x, _) in batch {
        if x.len() != n {
            return Err(BnnError::SignalLength { expected: n, got: x.len() });
        }
    }

    let caches: Vec<ForwardCache> = batch.iter().map(|(x, _)| forward_cache(mat, x)).collect();
    for c in &caches {
        finite_slice(&c.nu, "network output")?;
    }

    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, (_, label)) in batch.iter().enumerate() {
        by_label.entry(*label).or_default().push(k);
    }

    let m = tri_len(n);
    let mut g_nu: Vec<Vec<C64>> = if want_grad {
        vec![vec![C64::new(0.0, 0.0); m]; batch.len()]
    } else {
        Vec::new()
    };

    // Orbit separation term over ordered same-class pairs; each
    // unordered pair contributes twice.
    let mut orbit_sum = 0.0f64;
    for members in by_label.values() {
        for (ai, &a) in members.iter().enumerate() {
            for &b in &members[ai + 1..] {
                let delta: Vec<C64> = caches[a]
                    .nu
                    .iter()
                    .zip(&caches[b].nu)
                    .map(|(p, q)| p - q)
                    .collect();
                let d = linalg::norm2(&delta);
                orbit_sum += 2.0 * d;
                if want_grad {
                    let scale = 1.0 / d.max(DENOM_FLOOR);
                    for (p, dv) in delta.iter().enumerate() {
                        let g = dv * scale;
                        g_nu[a][p] += g;
                        g_nu[b][p] -= g;
                    }
                }
            }
        }
    }
    if !orbit_sum.is_finite() {
        return Err(BnnError::NonFinite("orbit separation term"));
    }

    // Reconstruction residuals (value only; gradient flows inside
    // backprop_to_weights so the cached z is reused).
    let mut recon_sum = 0.0f64;
    for (k, (x, _)) in batch.iter().enumerate() {
        let wz = mat.conj_transpose_matvec(&caches[k].z);
        let r: Vec<C64> = x.iter().zip(&wz).map(|(a, b)| a - b).collect();
        recon_sum += linalg::norm2(&r);
    }
    if !recon_sum.is_finite() {
        return Err(BnnError::NonFinite("reconstruction term"));
    }

    let grad = if want_grad {
        let mut g_w = CMatrix::zeros(n, n);
        for (k, (x, _)) in batch.iter().enumerate() {
            backprop_to_weights(mat, x, &caches[k], &g_nu[k], gamma, &mut g_w);
        }
        finite_slice(g_w.data(), "weight gradient")?;
        Some(g_w)
    } else {
        None
    };

    Ok((orbit_sum, recon_sum, grad))
}

/// The two loss terms, unweighted: (orbit separation sum, reconstruction
/// sum). The full loss is `orbit + gamma * recon`.
pub fn orbit_separation_terms(
    w: &NetworkWeights,
    batch: &[(&[C64], usize)],
) -> Result<(f64, f64), BnnError> {
    let (orbit, recon, _) = loss_and_grad(&w.matrix, batch, 0.0, false)?;
    Ok((orbit, recon))
}

/// Total orbit separation loss of a batch.
pub fn orbit_separation_loss(
    w: &NetworkWeights,
    batch: &[(&[C64], usize)],
    gamma: f64,
) -> Result<f64, BnnError> {
    let (orbit, recon) = orbit_separation_terms(w, batch)?;
    Ok(orbit + gamma * recon)
}

/// Wirtinger cogradient `dL/d conj(W)` of the loss over a batch.
///
/// For the real parameterization: `dL/d Re(W) = 2 Re(g)` and
/// `dL/d Im(W) = 2 Im(g)`; `-g` is the steepest descent direction.
pub fn loss_gradient(
    w: &NetworkWeights,
    batch: &[(&[C64], usize)],
    gamma: f64,
) -> Result<CMatrix, BnnError> {
    let (_, _, grad) = loss_and_grad(&w.matrix, batch, gamma, true)?;
    Ok(grad.expect("gradient requested"))
}

/// Adam over the real and imaginary parts of the weight matrix, with
/// separate moment estimates for each real coordinate.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(params: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam { m: vec![0.0; 2 * params], v: vec![0.0; 2 * params], t: 0, beta1, beta2, epsilon }
    }

    fn step(&mut self, w: &mut CMatrix, g: &CMatrix, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (wv, gv)) in w.data_mut().iter_mut().zip(g.data()).enumerate() {
            let grads = [2.0 * gv.re, 2.0 * gv.im];
            let mut parts = [wv.re, wv.im];
            for (c, grad) in grads.iter().enumerate() {
                let idx = 2 * k + c;
                self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * grad;
                self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * grad * grad;
                let mhat = self.m[idx] / bc1;
                let vhat = self.v[idx] / bc2;
                parts[c] -= lr * mhat / (vhat.sqrt() + self.epsilon);
            }
            *wv = C64::new(parts[0], parts[1]);
        }
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of the reconstruction term.
    pub gamma: f64,
    /// Learning rate at step zero.
    pub base_lr: f64,
    /// Lower bound of the cyclic schedule.
    pub min_lr: f64,
    /// Upper bound of the cyclic schedule.
    pub max_lr: f64,
    /// Epochs per half cycle of the triangular schedule.
    pub lr_half_period_epochs: usize,
    pub batch_size: usize,
    /// Samples drawn per class within a batch.
    pub per_class: usize,
    pub max_epochs: usize,
    /// An epoch improving the best loss by less than this counts toward
    /// the plateau.
    pub plateau_tolerance: f64,
    /// Consecutive non-improving epochs that end training.
    pub plateau_epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.1,
            base_lr: 2e-3,
            min_lr: 1e-4,
            max_lr: 5e-3,
            lr_half_period_epochs: 10,
            batch_size: 100,
            per_class: 10,
            max_epochs: 2000,
            plateau_tolerance: 1e-6,
            plateau_epochs: 50,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), BnnError> {
        let bad = |m: String| Err(BnnError::InvalidConfig(m));
        if self.per_class == 0 || self.batch_size == 0 || self.batch_size % self.per_class != 0 {
            return bad(format!(
                "batch_size {} must be a positive multiple of per_class {}",
                self.batch_size, self.per_class
            ));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.base_lr && self.base_lr <= self.max_lr) {
            return bad(format!(
                "learning rates must satisfy 0 < min {} <= base {} <= max {}",
                self.min_lr, self.base_lr, self.max_lr
            ));
        }
        if self.lr_half_period_epochs == 0 {
            return bad("lr_half_period_epochs must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.plateau_epochs == 0 {
            return bad("plateau_epochs must be positive".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.gamma < 0.0 {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        Ok(())
    }
}

/// Triangular cyclic learning rate, phased so step zero starts at
/// `base_lr` on the rising edge.
fn cyclic_lr(cfg: &TrainConfig, step: u64, steps_per_half_period: u64) -> f64 {
    if cfg.max_lr == cfg.min_lr {
        return cfg.min_lr;
    }
    let f0 = (cfg.base_lr - cfg.min_lr) / (cfg.max_lr - cfg.min_lr);
    let tau = (step as f64 / steps_per_half_period as f64 + f0) % 2.0;
    let tri = if tau <= 1.0 { tau } else { 2.0 - tau };
    cfg.min_lr + (cfg.max_lr - cfg.min_lr) * tri
}

/// One row of the training log; the means are per sample and `lr` is
/// the rate used on the epoch's final step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_orbit_term: f64,
    pub mean_recon_term: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub weights: NetworkWeights,
    pub log: Vec<TrainLogEntry>,
    /// True when the plateau rule ended training before `max_epochs`.
    pub converged: bool,
    pub epochs_run: usize,
    /// Largest row-norm deviation observed at any epoch boundary.
    pub max_row_norm_error: f64,
}

/// Trains a bispectral layer on an orbit dataset.
///
/// Deterministic for a fixed config: initialization and the batch
/// schedule derive from counter-based streams of `cfg.seed`, so two
/// runs produce bitwise identical logs and weights.
pub fn train(ds: &OrbitDataset, cfg: &TrainConfig) -> Result<TrainResult, BnnError> {
    cfg.validate()?;
    let n = ds.group().order();
    let mut rng = data::stream_rng(cfg.seed, STREAM_WEIGHT_INIT, 0, 0);
    let mut weights = NetworkWeights::random_unitary(n, &mut rng);

    let mut adam = Adam::new(n * n, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
    let mut log = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut converged = false;
    let mut global_step = 0u64;
    let mut max_row_norm_error = 0.0f64;
    let mut steps_per_half: Option<u64> = None;

    for epoch in 0..cfg.max_epochs {
        let batches = data::epoch_batches(ds, cfg.batch_size, cfg.per_class, cfg.seed, epoch as u64)?;
        if batches.is_empty() {
            return Err(BnnError::InvalidConfig(
                "dataset yields no complete batch for this batch shape".into(),
            ));
        }
        let half = *steps_per_half
            .get_or_insert((batches.len() * cfg.lr_half_period_epochs).max(1) as u64);

        let mut orbit_total = 0.0;
        let mut recon_total = 0.0;
        let mut samples_total = 0usize;
        let mut last_lr = cfg.base_lr;
        for indices in &batches {
            let batch = ds.batch_views(indices);
            let lr = cyclic_lr(cfg, global_step, half);
            let (orbit, recon, grad) = match loss_and_grad(&weights.matrix, &batch, cfg.gamma, true)
            {
                Ok(v) => v,
                Err(BnnError::NonFinite(_)) => {
                    return Err(BnnError::Diverged { epoch, weights: Box::new(weights) });
                }
                Err(e) => return Err(e),
            };
            adam.step(&mut weights.matrix, &grad.expect("gradient requested"), lr);
            weights.renormalize_rows();
            orbit_total += orbit;
            recon_total += recon;
            samples_total += batch.len();
            last_lr = lr;
            global_step += 1;
        }
        max_row_norm_error = max_row_norm_error.max(weights.max_row_norm_error());

        let count = samples_total as f64;
        let mean_orbit = orbit_total / count;
        let mean_recon = recon_total / count;
        let mean_loss = mean_orbit + cfg.gamma * mean_recon;
        log.push(TrainLogEntry {
            epoch,
            mean_loss,
            mean_orbit_term: mean_orbit,
            mean_recon_term: mean_recon,
            lr: last_lr,
        });

        if best - mean_loss < cfg.plateau_tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best = best.min(mean_loss);
        if stalled >= cfg.plateau_epochs {
            converged = true;
            break;
        }
    }

    let epochs_run = log.len();
    Ok(TrainResult { weights, log, converged, epochs_run, max_row_norm_error })
}

const STREAM_WEIGHT_INIT: u64 = 10;

/// Per-row equivariance diagnostics of the linear half on the orbit of
/// one probe signal.
#[derive(Clone, Debug)]
pub struct EquivarianceRow {
    pub row: usize,
    /// max over g of | |z_i(g.x)| - |z_i(x)| |.
    pub modulus_variation: f64,
    /// Character label whose phases fit this row best.
    pub best_label: usize,
    /// RMS wrapped phase residual against that character.
    pub phase_residual: f64,
    /// Set when some |z_i(g.x)| is too small for phases to mean much.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct EquivarianceReport {
    pub rows: Vec<EquivarianceRow>,
}

impl EquivarianceReport {
    pub fn max_modulus_variation(&self) -> f64 {
        self.rows.iter().map(|r| r.modulus_variation).fold(0.0, f64::max)
    }

    /// Largest phase residual over rows with trustworthy phases.
    pub fn max_phase_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.degenerate)
            .map(|r| r.phase_residual)
            .fold(0.0, f64::max)
    }
}

/// Measures how closely each row of `W` behaves like a character under
/// translation: for character rows, `z_i(g.x) = chi_i(g) z_i(x)`, so
/// moduli are invariant and phase offsets match some character exactly.
pub fn equivariance_report(
    w: &NetworkWeights,
    x: &[C64],
    group: &FiniteAbelianGroup,
) -> Result<EquivarianceReport, BnnError> {
    if group.order() != w.dims() {
        return Err(BnnError::SignalLength { expected: w.dims(), got: group.order() });
    }
    check_len(w, x)?;
    let n = w.dims();
    let table = CharacterTable::new(group);
    let mut z_per_g = Vec::with_capacity(n);
    for g in group.elements() {
        let shifted = group
            .act_on_signal(&g, x)
            .map_err(|_| BnnError::SignalLength { expected: n, got: x.len() })?;
        z_per_g.push(w.matrix.matvec(&shifted));
    }
    let base = &z_per_g[0]; // identity is element 0

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut modulus_variation = 0.0f64;
        let mut min_mod = f64::INFINITY;
        for zg in &z_per_g {
            let m = zg[i].norm();
            modulus_variation = modulus_variation.max((m - base[i].norm()).abs());
            min_mod = min_mod.min(m);
        }
        let degenerate = min_mod < 1e-12;

        let mut best_label = 0usize;
        let mut best_res = f64::INFINITY;
        if !degenerate {
            for r in 0..n {
                let mut sq = 0.0f64;
                for (gi, zg) in z_per_g.iter().enumerate() {
                    // Wrapped residual via the argument of the ratio.
                    let d = (zg[i] * base[i].conj() * table.matrix().get(r, gi).conj()).arg();
                    sq += d * d;
                }
                let res = (sq / n as f64).sqrt();
                if res < best_res {
                    best_res = res;
                    best_label = r;
                }
            }
        } else {
            best_res = f64::NAN;
        }
        rows.push(EquivarianceRow {
            row: i,
            modulus_variation,
            best_label,
            phase_residual: best_res,
            degenerate,
        });
    }
    Ok(EquivarianceReport { rows })
}
