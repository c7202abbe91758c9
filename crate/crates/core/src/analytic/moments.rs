//! Campbell moments of the interference and leakage shot noise and the
//! moment-matched lognormal approximations of their distributions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::laplace::ShotNoise;
use super::AnalyticError;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
}

impl ShotNoise {
    /// Mean and variance by Campbell's theorem.
    pub fn moments(&self) -> Result<MomentSummary, AnalyticError> {
        let eta = self.path_loss_exp;
        if !(eta > 2.0) {
            return Err(AnalyticError::Domain(format!(
                "shot-noise moments diverge for path-loss exponent {eta} <= 2"
            )));
        }
        let y = self.inner_radius;
        let m = self.mark_shape as f64;
        let k = self.normalization;
        Ok(MomentSummary {
            mean: m / k * 2.0 * PI * self.density * y.powf(2.0 - eta) / (eta - 2.0),
            variance: m * (m + 1.0) / (k * k) * PI * self.density * y.powf(2.0 - 2.0 * eta) / (eta - 1.0),
        })
    }
}

/// Moments of the inter-cell interference for a tagged BS at `tagged_distance`.
pub fn interference_moments(
    tagged_distance: f64,
    params: &SystemParams,
) -> Result<MomentSummary, AnalyticError> {
    ShotNoise::interference(tagged_distance, params)?.moments()
}

/// Moments of the leakage to eavesdroppers outside the tagged-cell ball.
pub fn leakage_moments(params: &SystemParams) -> Result<MomentSummary, AnalyticError> {
    ShotNoise::leakage(params)?.moments()
}

/// Lognormal law `ln X ~ N(mu_n, sigma2_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub mu_n: f64,
    pub sigma2_n: f64,
}

pub fn lognormal_fit(moments: &MomentSummary) -> Result<LognormalFit, AnalyticError> {
    if !(moments.mean > 0.0 && moments.mean.is_finite()) {
        return Err(AnalyticError::Domain(format!(
            "lognormal fit needs a positive mean (got {})",
            moments.mean
        )));
    }
    if !(moments.variance >= 0.0) {
        return Err(AnalyticError::Domain(format!(
            "lognormal fit needs a non-negative variance (got {})",
            moments.variance
        )));
    }
    let ratio = moments.variance / (moments.mean * moments.mean);
    let sigma2_n = ratio.ln_1p();
    Ok(LognormalFit {
        mu_n: moments.mean.ln() - 0.5 * sigma2_n,
        sigma2_n,
    })
}

/// Standard normal upper tail `Q(t)`.
pub fn normal_q(t: f64) -> f64 {
    0.5 * erfc(t * FRAC_1_SQRT_2)
}

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

impl LognormalFit {
    pub fn sigma_n(&self) -> f64 {
        self.sigma2_n.sqrt()
    }

    pub fn mean(&self) -> f64 {
        (self.mu_n + 0.5 * self.sigma2_n).exp()
    }

    pub fn variance(&self) -> f64 {
        self.sigma2_n.exp_m1() * (2.0 * self.mu_n + self.sigma2_n).exp()
    }

    /// Standardized log value `(ln x − μ)/σ`.
    pub fn standardize(&self, x: f64) -> f64 {
        (x.ln() - self.mu_n) / self.sigma_n()
    }

    pub fn quantile_point(&self, t: f64) -> f64 {
        (self.mu_n + self.sigma_n() * t).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.sigma2_n == 0.0 {
            return if x >= self.mu_n.exp() { 1.0 } else { 0.0 };
        }
        normal_q(-self.standardize(x))
    }

    /// `P(X ≥ x)`; exactly one for `x ≤ 0`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if self.sigma2_n == 0.0 {
            return if x <= self.mu_n.exp() { 1.0 } else { 0.0 };
        }
        normal_q(self.standardize(x))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || self.sigma2_n == 0.0 {
            return 0.0;
        }
        normal_pdf(self.standardize(x)) / (x * self.sigma_n())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::quadrature::{integrate, QuadConfig};
    use crate::params::{derive_params, RawConfig};

    fn params(lambda: f64, k: usize) -> SystemParams {
        derive_params(&RawConfig {
            n_antennas: 20,
            users_per_cell: Some(k as f64),
            load_ratio: None,
            snr_db: Some(10.0),
            snr_linear: None,
            path_loss_exp: 4.0,
            bs_density: lambda,
            regularizer: None,
            user_density: None,
            round_users: false,
        })
        .unwrap()
    }

    #[test]
    fn interference_mean_at_cell_radius() {
        let p = params(0.1, 20);
        let m = interference_moments(p.cell_radius, &p).unwrap();
        let oracle = (PI * 0.1f64).powi(2);
        assert!((m.mean - oracle).abs() < 1e-14);
        assert!((oracle - 0.098_696).abs() < 1e-6);
    }

    #[test]
    fn interference_variance_large_k_limit() {
        let p = params(0.1, 20);
        let y: f64 = 1.3;
        let limit = PI * p.bs_density * y.powf(-6.0) / 3.0;
        let mut prev = f64::INFINITY;
        for k in [10, 100, 1000, 100_000] {
            let mut q = p;
            q.users_per_cell = k;
            let v = interference_moments(y, &q).unwrap().variance;
            assert!((v - limit).abs() < prev);
            prev = (v - limit).abs();
        }
        assert!(prev / limit < 1e-4);
    }

    #[test]
    fn leakage_moments_closed_form() {
        let p = params(0.01, 10);
        let m = leakage_moments(&p).unwrap();
        let r = p.cell_radius;
        assert!((m.mean - 2.0 * PI * p.user_density * r.powi(-2) / (10.0 * 2.0)).abs() < 1e-15);
        assert!((m.variance - 2.0 * PI * p.user_density * r.powi(-6) / (100.0 * 3.0)).abs() < 1e-18);
    }

    #[test]
    fn lognormal_degenerate_and_hand_case() {
        let f = lognormal_fit(&MomentSummary {
            mean: 2.0,
            variance: 0.0,
        })
        .unwrap();
        assert_eq!(f.sigma2_n, 0.0);
        assert!((f.mu_n - 2f64.ln()).abs() < 1e-15);
        let e = std::f64::consts::E;
        let f = lognormal_fit(&MomentSummary {
            mean: 1.0,
            variance: e - 1.0,
        })
        .unwrap();
        assert!((f.sigma2_n - 1.0).abs() < 1e-15);
        assert!((f.mu_n + 0.5).abs() < 1e-15);
        assert!(lognormal_fit(&MomentSummary {
            mean: 0.0,
            variance: 1.0
        })
        .is_err());
    }

    #[test]
    fn lognormal_roundtrip_and_normalization() {
        for &(mean, var) in &[(0.0987, 0.0034), (1e-4, 1e-6), (3.0, 40.0)] {
            let f = lognormal_fit(&MomentSummary { mean, variance: var }).unwrap();
            assert!(((f.mean() - mean) / mean).abs() < 1e-10);
            assert!(((f.variance() - var) / var).abs() < 1e-10);
            let cfg = QuadConfig {
                abs_tol: 0.0,
                rel_tol: 1e-12,
                max_intervals: 2000,
            };
            // density integrated in the log domain
            let total = integrate(|t: f64| normal_pdf(t), -12.0, 12.0, &cfg)
                .unwrap()
                .value;
            assert!((total - 1.0).abs() < 1e-10);
            let direct = integrate(|x: f64| f.pdf(x), 0.0, f.quantile_point(12.0), &cfg)
                .unwrap()
                .value;
            assert!((direct - 1.0).abs() < 1e-8, "{direct}");
            assert!((f.cdf(mean) + f.survival(mean) - 1.0).abs() < 1e-15);
        }
    }
}
