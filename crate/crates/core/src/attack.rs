//! Gradient-based recovery of signals from their invariant outputs.
//!
//! Given a layer and one target output, the adversary starts candidate
//! signals from random noise and descends the objective
//!
//! ```text
//! J(x) = || out(x) - out(target) ||_2
//! ```
//!
//! over real inputs. Success is measured against the target signal
//! itself: the scale-adjusted orbit distance
//! `min_{g, c >= 0} || c * (g.x) - target ||` should be small, since
//! the representation only determines signals up to translation and a
//! positive scalar.
//!
//! The same machinery runs against the power spectrum of the linear
//! half, `q_i = |z_i|^2`, where recovery should *fail*: the power
//! spectrum drops all phase couplings, so candidates routinely reach a
//! near-zero objective while staying far from the target orbit.

use crate::bnn::{self, NetworkWeights};
use crate::data;
use crate::group::FiniteAbelianGroup;
use crate::linalg::{norm2, CMatrix, C64};
use crate::spectral;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

const DENOM_FLOOR: f64 = 1e-12;
const NORM_FLOOR_SQ: f64 = 1e-12;
const STREAM_ATTACK_INIT: u64 = 11;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("weights have dimension {weights} but the group has order {group}")]
    DimensionMismatch { weights: usize, group: usize },
    #[error("target length {got} does not match dimension {expected}")]
    SignalLength { expected: usize, got: usize },
    #[error("target produces a degenerate (zero) representation")]
    DegenerateTarget,
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
}

/// Which summary of the layer the adversary tries to invert.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// The full normalized layer output.
    Bispectrum,
    /// Normalized `|z_i|^2` of the linear half only; phase-blind.
    PowerSpectrum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub candidates: usize,
    pub max_iters: usize,
    pub init_lr: f64,
    /// Consecutive stalled iterations before the rate decays.
    pub plateau_window: usize,
    /// Best-objective improvement below this counts as stalled.
    pub plateau_tolerance: f64,
    /// Multiplier applied to the rate on a plateau.
    pub lr_decay: f64,
    pub min_lr: f64,
    /// Candidates stop once the objective falls below this.
    pub objective_tol: f64,
    pub seed: u64,
    pub representation: Representation,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            candidates: 25,
            max_iters: 20000,
            init_lr: 0.3,
            plateau_window: 50,
            plateau_tolerance: 1e-12,
            lr_decay: 0.5,
            min_lr: 1e-4,
            objective_tol: 1e-6,
            seed: 0,
            representation: Representation::Bispectrum,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: String| Err(AttackError::InvalidConfig(m));
        if self.candidates == 0 {
            return bad("candidates must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.init_lr > 0.0 && self.min_lr > 0.0 && self.min_lr <= self.init_lr) {
            return bad(format!(
                "learning rates must satisfy 0 < min_lr {} <= init_lr {}",
                self.min_lr, self.init_lr
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be positive".into());
        }
        if !(self.objective_tol >= 0.0 && self.plateau_tolerance >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }
}

/// One candidate's trajectory summary. The reported signal and
/// objective belong to the best iterate seen, so `final_objective`
/// never exceeds `initial_objective`.
#[derive(Clone, Debug)]
pub struct CandidateOutcome {
    pub index: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    /// Objective reached `objective_tol`.
    pub converged: bool,
    pub signal: Vec<C64>,
    /// Plain orbit distance to the target.
    pub orbit_distance: f64,
    /// Orbit distance after the optimal nonnegative rescaling.
    pub scaled_distance: f64,
    pub scale: f64,
    /// Group element index realizing the scaled distance.
    pub element_index: usize,
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub representation: Representation,
    pub outcomes: Vec<CandidateOutcome>,
}

impl AttackResult {
    /// Candidate with the lowest final objective.
    pub fn best(&self) -> &CandidateOutcome {
        self.outcomes
            .iter()
            .min_by(|a, b| a.final_objective.total_cmp(&b.final_objective))
            .expect("at least one candidate")
    }

    /// Fraction of candidates whose scale-adjusted orbit distance is
    /// within `distance_tol` of the target.
    pub fn success_fraction(&self, distance_tol: f64) -> f64 {
        let hits = self.outcomes.iter().filter(|o| o.scaled_distance <= distance_tol).count();
        hits as f64 / self.outcomes.len() as f64
    }
}

enum TargetRepr {
    Bispectrum(Vec<C64>),
    Power(Vec<f64>),
}

fn normalized_power(mat: &CMatrix, x: &[C64]) -> Vec<f64> {
    let z = mat.matvec(x);
    let q: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
    let s: f64 = q.iter().map(|v| v * v).sum();
    let m = (s + NORM_FLOOR_SQ).sqrt();
    q.iter().map(|v| v / m).collect()
}

fn objective_and_grad(mat: &CMatrix, x: &[C64], target: &TargetRepr) -> (f64, Vec<f64>) {
    match target {
        TargetRepr::Bispectrum(t) => {
            let cache = bnn::forward_cache(mat, x);
            let delta: Vec<C64> = cache.nu.iter().zip(t).map(|(a, b)| a - b).collect();
            let obj = norm2(&delta);
            let scale = 1.0 / (2.0 * obj.max(DENOM_FLOOR));
            let g_nu: Vec<C64> = delta.iter().map(|d| d * scale).collect();
            let g_x = bnn::backprop_to_input(mat, &cache, &g_nu);
            (obj, g_x.iter().map(|g| 2.0 * g.re).collect())
        }
        TargetRepr::Power(t) => {
            let z = mat.matvec(x);
            let q: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
            let s: f64 = q.iter().map(|v| v * v).sum();
            let mq = (s + NORM_FLOOR_SQ).sqrt();
            let qn: Vec<f64> = q.iter().map(|v| v / mq).collect();
            let delta: Vec<f64> = qn.iter().zip(t).map(|(a, b)| a - b).collect();
            let obj = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            // Chain: objective -> normalized power -> power -> z -> x.
            let inv = 1.0 / obj.max(DENOM_FLOOR);
            let g_qn: Vec<f64> = delta.iter().map(|d| d * inv).collect();
            let along: f64 = g_qn.iter().zip(&qn).map(|(g, n)| g * n).sum();
            let g_q: Vec<f64> = g_qn.iter().zip(&qn).map(|(g, n)| (g - n * along) / mq).collect();
            let g_z: Vec<C64> = g_q.iter().zip(&z).map(|(g, zv)| zv * *g).collect();
            let g_x = mat.conj_transpose_matvec(&g_z);
            (obj, g_x.iter().map(|g| 2.0 * g.re).collect())
        }
    }
}

struct RealAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl RealAdam {
    fn new(params: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        RealAdam { m: vec![0.0; params], v: vec![0.0; params], t: 0, beta1, beta2, epsilon }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            *p -= lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + self.epsilon);
        }
    }
}

fn run_candidate(
    mat: &CMatrix,
    group: &FiniteAbelianGroup,
    target_repr: &TargetRepr,
    target: &[C64],
    cfg: &AttackConfig,
    index: usize,
) -> CandidateOutcome {
    let n = mat.rows();
    let mut rng = data::stream_rng(cfg.seed, STREAM_ATTACK_INIT, index as u64, 0);
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut adam = RealAdam::new(n, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);

    let mut lr = cfg.init_lr;
    let mut best_obj = f64::INFINITY;
    let mut best_x = x.clone();
    let mut initial = f64::INFINITY;
    let mut ref_best = f64::INFINITY;
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for iter in 0..=cfg.max_iters {
        let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        let (obj, grad) = objective_and_grad(mat, &xc, target_repr);
        if iter == 0 {
            initial = obj;
        }
        if obj < best_obj {
            best_obj = obj;
            best_x = x.clone();
        }
        iterations = iter;
        if best_obj <= cfg.objective_tol {
            converged = true;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }
        if !obj.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            // Freeze at the best iterate rather than poisoning it.
            break;
        }
        if ref_best - best_obj < cfg.plateau_tolerance {
            stall += 1;
        } else {
            stall = 0;
        }
        ref_best = ref_best.min(best_obj);
        if stall >= cfg.plateau_window {
            lr = (lr * cfg.lr_decay).max(cfg.min_lr);
            stall = 0;
        }
        adam.step(&mut x, &grad, lr);
    }

    let signal: Vec<C64> = best_x.iter().map(|&v| C64::new(v, 0.0)).collect();
    let orbit_distance =
        spectral::orbit_distance(&signal, target, group).expect("lengths validated");
    let scaled =
        spectral::scaled_orbit_distance(&signal, target, group).expect("lengths validated");
    CandidateOutcome {
        index,
        initial_objective: initial,
        final_objective: best_obj,
        iterations,
        converged,
        signal,
        orbit_distance,
        scaled_distance: scaled.distance,
        scale: scaled.scale,
        element_index: scaled.element_index,
    }
}

/// Runs the recovery attack against one target signal. Candidates are
/// independent and run in parallel; results are deterministic for a
/// fixed config because every candidate draws from its own counter
/// stream.
pub fn attack(
    w: &NetworkWeights,
    group: &FiniteAbelianGroup,
    target: &[C64],
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let n = w.dims();
    if group.order() != n {
        return Err(AttackError::DimensionMismatch { weights: n, group: group.order() });
    }
    if target.len() != n {
        return Err(AttackError::SignalLength { expected: n, got: target.len() });
    }

    let mat = w.matrix();
    let target_repr = match cfg.representation {
        Representation::Bispectrum => match bnn::forward(w, target) {
            Ok(_) => TargetRepr::Bispectrum(bnn::forward_cache(mat, target).nu),
            Err(_) => return Err(AttackError::DegenerateTarget),
        },
        Representation::PowerSpectrum => {
            let q = normalized_power(mat, target);
            if q.iter().all(|v| *v == 0.0) {
                return Err(AttackError::DegenerateTarget);
            }
            TargetRepr::Power(q)
        }
    };

    let outcomes: Vec<CandidateOutcome> = (0..cfg.candidates)
        .into_par_iter()
        .map(|i| run_candidate(mat, group, &target_repr, target, cfg, i))
        .collect();

    Ok(AttackResult { representation: cfg.representation, outcomes })
}
