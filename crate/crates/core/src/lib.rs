//! Bispectral neural networks over finite commutative groups.
//!
//! The crate has two halves that check each other:
//!
//! * analytic machinery: finite abelian groups as products of cyclic
//!   factors, their character tables, the group Fourier transform, and
//!   the invariants built from it (power spectrum, bispectrum, triple
//!   correlation);
//! * a learnable layer of the same shape as the analytic bispectrum,
//!   trained with an orbit separation loss so that its weights converge
//!   to group characters, after which the group's Cayley table can be
//!   read back off the weights alone.
//!
//! Everything is deterministic under a fixed seed: dataset generation,
//! weight initialization, training batches and adversarial attacks all
//! draw from counter-based ChaCha streams.

pub mod attack;
pub mod bnn;
pub mod cayley;
pub mod data;
pub mod group;
pub mod linalg;
pub mod spectral;

pub use attack::{attack, AttackConfig, AttackError, AttackResult, CandidateOutcome, Representation};
pub use bnn::{
    equivariance_report, forward, forward_linear, loss_gradient, orbit_separation_loss,
    orbit_separation_terms, train, BnnError, EquivarianceReport, NetworkOutput, NetworkWeights,
    TrainConfig, TrainLogEntry, TrainResult,
};
pub use cayley::{cayley_from_irreps, find_isomorphism, is_isomorphic, CayleyError, RecoveryReport};
pub use data::{generate, sample_batch, split, DataError, OrbitDataset, Sample};
pub use group::{CayleyTable, FiniteAbelianGroup, GroupElement, GroupError, MAX_GROUP_ORDER};
pub use linalg::{CMatrix, C64};
pub use spectral::{
    bispectrum, gft_2d, orbit_distance, power_spectrum, scaled_orbit_distance, triple_correlation,
    BispectrumMatrix, CharacterTable, ScaledOrbitMatch, SpectralError,
};

/// Length-N complex signal on a group, indexed by element index.
pub type Signal = Vec<C64>;

/// Formats a float with 17 significant digits, enough to round-trip
/// any f64 exactly.
///
/// Used everywhere a float is written to a text artifact, so that
/// identical runs produce byte-identical files.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
