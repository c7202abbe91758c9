//! Large-system deterministic equivalents of the RCI channel statistics.

use serde::{Deserialize, Serialize};

use super::AnalyticError;

/// Limits of the useful-signal gain (`alpha`) and of the intra-cell
/// crosstalk and leakage gains (`chi`) as `N, K → ∞` at fixed `K/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicEquivalents {
    pub g_val: f64,
    pub alpha: f64,
    pub chi: f64,
}

pub fn deterministic_equivalents(
    load_ratio: f64,
    regularizer: f64,
) -> Result<DeterministicEquivalents, AnalyticError> {
    if !(load_ratio > 0.0 && load_ratio.is_finite()) || !(regularizer > 0.0 && regularizer.is_finite()) {
        return Err(AnalyticError::Domain(format!(
            "deterministic equivalents need positive load ratio and regularizer (got {load_ratio}, {regularizer})"
        )));
    }
    let (b, xi) = (load_ratio, regularizer);
    let d = (1.0 - b) / xi;
    let g = 0.5 * ((d * d + 2.0 * (1.0 + b) / xi + 1.0).sqrt() + d - 1.0);
    let chi = 1.0 / ((1.0 + g) * (1.0 + g));
    let alpha = g * (1.0 + (xi / b) * (1.0 + g) * (1.0 + g)) * chi;
    Ok(DeterministicEquivalents { g_val: g, alpha, chi })
}
