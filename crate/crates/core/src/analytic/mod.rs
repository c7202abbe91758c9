//! Closed-form evaluation path: deterministic equivalents, shot-noise
//! Laplace transforms, moments and lognormal fits, and the outage,
//! mean-rate and lower-bound integrals built on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod det_eq;
pub mod laplace;
pub mod lower_bound;
pub mod moments;
pub mod quadrature;
pub mod special;
pub mod theorems;

pub use det_eq::{deterministic_equivalents, DeterministicEquivalents};
pub use laplace::{laplace_interference, laplace_leakage, ShotNoise};
pub use lower_bound::{expected_log_shift, expected_log_shift_frullani, mean_rate_lower_bound};
pub use moments::{interference_moments, leakage_moments, lognormal_fit, LognormalFit, MomentSummary};
pub use quadrature::QuadConfig;
pub use special::incomplete_beta;
pub use theorems::{mean_secrecy_rate, outage_probability, tau, PdfSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    NonConvergence {
        what: &'static str,
        achieved: f64,
        requested: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

/// Tolerances of the analytic integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConfig {
    /// Outer integral over the tagged-BS distance.
    pub outer: QuadConfig,
    /// Integrals over interference, leakage and frequency.
    pub inner: QuadConfig,
    /// Radial shot-noise integrals evaluated at complex arguments.
    pub pgfl: QuadConfig,
    /// The distance integral stops where `e^{-λ_b π y²}` drops below this.
    pub distance_tail: f64,
    /// Standard-normal lower cut-off for lognormal integrals.
    pub normal_cutoff: f64,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            outer: QuadConfig::default(),
            inner: QuadConfig::default(),
            pgfl: QuadConfig {
                abs_tol: 0.0,
                rel_tol: 1e-10,
                max_intervals: 2000,
            },
            distance_tail: 1e-12,
            normal_cutoff: 9.0,
        }
    }
}
