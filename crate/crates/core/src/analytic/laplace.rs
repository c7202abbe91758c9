//! Laplace transforms of Poisson shot noise with Gamma marks.
//!
//! Both the inter-cell interference and the external leakage have the form
//! `X = (1/K) Σ_x G_x ‖x‖^{-η}` over a PPP of density `λ` outside a disc of
//! radius `y`, with i.i.d. marks `G_x ~ Γ(m, 1)`. Its Laplace transform is
//! `exp(−ψ(s))` with the exponent
//!
//! ```text
//! ψ(s) = 2πλ ∫_y^∞ (1 − (1 + (s/K) v^{-η})^{-m}) v dv
//!      = (2π/η) λ (s/K)^{2/η} Σ_{n=1}^{m} C(m,n) ∫_x^1 t^{m−n+2/η−1} (1−t)^{n−2/η−1} dt,
//! ```
//!
//! `x = (1 + (s/K) y^{-η})^{-1}`. The binomial form is evaluated for real
//! `s` in log space; the radial integral is evaluated by quadrature for
//! complex `s` (characteristic functions) and doubles as the oracle of the
//! closed form.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::quadrature::{integrate, QuadConfig};
use super::special::{ln_beta, ln_binomial, ln_reg_inc_beta_split, log_sum_exp};
use super::AnalyticError;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotNoise {
    pub density: f64,
    pub inner_radius: f64,
    /// Shape `m` of the Gamma marks.
    pub mark_shape: usize,
    /// The `K` in the `1/K` prefactor.
    pub normalization: f64,
    pub path_loss_exp: f64,
}

fn check_positive(name: &str, v: f64) -> Result<(), AnalyticError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AnalyticError::Domain(format!(
            "{name} must be positive and finite (got {v})"
        )))
    }
}

impl ShotNoise {
    pub fn new(
        density: f64,
        inner_radius: f64,
        mark_shape: usize,
        normalization: f64,
        path_loss_exp: f64,
    ) -> Result<Self, AnalyticError> {
        check_positive("density", density)?;
        check_positive("inner radius", inner_radius)?;
        check_positive("normalization", normalization)?;
        if mark_shape == 0 {
            return Err(AnalyticError::Domain("mark shape must be at least 1".into()));
        }
        if !(path_loss_exp > 2.0) {
            return Err(AnalyticError::Domain(format!(
                "path-loss exponent must exceed 2 (got {path_loss_exp})"
            )));
        }
        Ok(Self {
            density,
            inner_radius,
            mark_shape,
            normalization,
            path_loss_exp,
        })
    }

    /// Inter-cell interference seen by the typical user when the tagged BS
    /// is at `tagged_distance`: interferers beyond it, `Γ(K,1)` gains.
    pub fn interference(tagged_distance: f64, params: &SystemParams) -> Result<Self, AnalyticError> {
        let k = params.users_per_cell;
        Self::new(
            params.bs_density,
            tagged_distance,
            k,
            k as f64,
            params.path_loss_exp,
        )
    }

    /// Leakage to eavesdroppers outside the tagged-cell ball: `exp(1)` gains.
    pub fn leakage(params: &SystemParams) -> Result<Self, AnalyticError> {
        Self::new(
            params.user_density,
            params.cell_radius,
            1,
            params.users_per_cell as f64,
            params.path_loss_exp,
        )
    }

    /// Closed-form exponent `ψ(s)` for real `s ≥ 0`.
    pub fn exponent(&self, s: f64) -> Result<f64, AnalyticError> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "Laplace argument must be finite and non-negative (got {s})"
            )));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let eta = self.path_loss_exp;
        let delta = 2.0 / eta;
        let m = self.mark_shape;
        let a = s / self.normalization;
        let z = a * self.inner_radius.powf(-eta);
        // upper-limit complement w = 1 − x = z/(1+z), and 1 − w = 1/(1+z)
        let w = z / (1.0 + z);
        let one_minus_w = 1.0 / (1.0 + z);
        let mut terms = Vec::with_capacity(m);
        for n in 1..=m {
            let p = (m - n) as f64 + delta;
            let q = n as f64 - delta;
            terms.push(ln_binomial(m, n) + ln_beta(p, q) + ln_reg_inc_beta_split(w, one_minus_w, q, p)?);
        }
        let ln_psi = (2.0 * PI / eta).ln() + self.density.ln() + delta * a.ln() + log_sum_exp(&terms);
        Ok(ln_psi.exp())
    }

    pub fn laplace(&self, s: f64) -> Result<f64, AnalyticError> {
        Ok((-self.exponent(s)?).exp())
    }

    /// Exponent `ψ(s)` for complex `s` with `Re s ≥ 0`, by quadrature of
    /// the radial integral after the substitution `u = (v/y)^{-(η−2)}`.
    pub fn exponent_quadrature(&self, s: Complex64, cfg: &QuadConfig) -> Result<Complex64, AnalyticError> {
        if s.re < 0.0 || !s.re.is_finite() || !s.im.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "characteristic exponent needs Re s >= 0 (got {s})"
            )));
        }
        if s == Complex64::new(0.0, 0.0) {
            return Ok(s);
        }
        let eta = self.path_loss_exp;
        let y = self.inner_radius;
        let p = 1.0 / (eta - 2.0);
        let q = eta * p;
        let a = s / self.normalization * y.powf(-eta);
        let m = self.mark_shape as f64;
        let integrand = |u: f64| -> Complex64 {
            let uq = u.powf(q);
            let z = a * uq;
            // 1 − (1+z)^{-m} = −expm1(−m log1p z); for tiny z it tends to m·z
            let one_minus = -c_expm1(-c_log1p(z) * m);
            if uq == 0.0 {
                a * m
            } else {
                one_minus / uq
            }
        };
        let r = integrate(integrand, 0.0, 1.0, cfg)?;
        Ok(r.value * (2.0 * PI * self.density * y * y * p))
    }

    /// `E[e^{-sX}]` for complex `s` with `Re s ≥ 0`.
    pub fn laplace_complex(&self, s: Complex64, cfg: &QuadConfig) -> Result<Complex64, AnalyticError> {
        Ok((-self.exponent_quadrature(s, cfg)?).exp())
    }
}

/// `ln(1 + z)` without cancellation for small `|z|`.
pub fn c_log1p(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let re = 0.5 * (z.re * (2.0 + z.re) + z.im * z.im).ln_1p();
        Complex64::new(re, z.im.atan2(1.0 + z.re))
    } else {
        (Complex64::new(1.0, 0.0) + z).ln()
    }
}

/// `e^w − 1` without cancellation for small `|w|`.
pub fn c_expm1(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let half_sin = (0.5 * w.im).sin();
        Complex64::new(
            w.re.exp_m1() * w.im.cos() - 2.0 * half_sin * half_sin,
            w.re.exp() * w.im.sin(),
        )
    } else {
        w.exp() - 1.0
    }
}

/// Laplace transform of the interference at real `s`, tagged BS at
/// `tagged_distance`.
pub fn laplace_interference(
    s: f64,
    tagged_distance: f64,
    params: &SystemParams,
) -> Result<f64, AnalyticError> {
    ShotNoise::interference(tagged_distance, params)?.laplace(s)
}

/// Laplace transform of the leakage at real `s`.
pub fn laplace_leakage(s: f64, params: &SystemParams) -> Result<f64, AnalyticError> {
    ShotNoise::leakage(params)?.laplace(s)
}
