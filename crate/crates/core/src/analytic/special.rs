//! Incomplete Beta function and log-space summation helpers.
//!
//! The regularized incomplete Beta ratio is evaluated with the modified
//! Lentz continued fraction on whichever side of the symmetry relation
//! `I_x(a,b) = 1 − I_{1−x}(b,a)` converges fastest, and is returned as a
//! logarithm so that the shot-noise binomial sums stay finite for large
//! mark shapes.

use statrs::function::gamma::ln_gamma;

use super::AnalyticError;

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const FP_MIN: f64 = 1e-300;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln Σ exp(terms)`, summing the rescaled terms pairwise.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let scaled: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    max + pairwise_sum(&scaled).ln()
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64, AnalyticError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if v.abs() < FP_MIN { FP_MIN } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(AnalyticError::NonConvergence {
        what: "incomplete Beta continued fraction",
        achieved: f64::NAN,
        requested: CF_EPS,
    })
}

/// `ln I_x(a, b)` with `x` and `1 − x` both supplied so that neither loses
/// precision near the endpoints.
pub fn ln_reg_inc_beta_split(x: f64, one_minus_x: f64, a: f64, b: f64) -> Result<f64, AnalyticError> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&one_minus_x) {
        return Err(AnalyticError::Domain(format!(
            "incomplete Beta needs x in [0,1] and positive shapes (x={x}, a={a}, b={b})"
        )));
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if one_minus_x == 0.0 {
        return Ok(0.0);
    }
    let front = a * x.ln() + b * one_minus_x.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front - a.ln() + beta_cf(a, b, x)?.ln())
    } else {
        let complement = (front - b.ln() + beta_cf(b, a, one_minus_x)?.ln()).exp();
        Ok((-complement).ln_1p())
    }
}

pub fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, AnalyticError> {
    ln_reg_inc_beta_split(x, 1.0 - x, a, b)
}

/// Regularized ratio `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, AnalyticError> {
    Ok(ln_reg_inc_beta(x, a, b)?.exp())
}

/// Non-regularized `B(x; y, z) = ∫₀ˣ t^{y−1}(1−t)^{z−1} dt`.
pub fn incomplete_beta(x: f64, y: f64, z: f64) -> Result<f64, AnalyticError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(AnalyticError::Domain(format!(
            "incomplete Beta argument must lie in [0,1] (got {x})"
        )));
    }
    if !(y > 0.0) || !(z > 0.0) {
        return Err(AnalyticError::Domain(format!(
            "incomplete Beta shapes must be positive (got {y}, {z})"
        )));
    }
    Ok((ln_beta(y, z) + ln_reg_inc_beta(x, y, z)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::quadrature::{integrate, QuadConfig};
    use std::f64::consts::PI;

    #[test]
    fn uniform_integrand() {
        assert!((incomplete_beta(0.37, 1.0, 1.0).unwrap() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn linear_integrand() {
        assert!((incomplete_beta(0.5, 2.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn complete_beta_limit() {
        // B(2.5, 0.5) = Γ(2.5)Γ(0.5)/Γ(3) = 3π/8
        let v = incomplete_beta(1.0, 2.5, 0.5).unwrap();
        assert!((v - 3.0 * PI / 8.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(incomplete_beta(1.2, 1.0, 1.0).is_err());
        assert!(incomplete_beta(0.5, 1.0, 0.0).is_err());
        assert!(incomplete_beta(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn matches_quadrature_oracle() {
        let cfg = QuadConfig {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 4000,
        };
        for &(x, a, b) in &[
            (0.3, 2.5, 1.5),
            (0.9, 20.5, 0.5),
            (0.05, 0.5, 19.5),
            (0.7, 3.0, 7.0),
            (0.999, 1.5, 2.5),
        ] {
            // Substituting t = x·u^{1/a} removes the t^{a-1} endpoint singularity.
            let oracle = integrate(
                |u: f64| {
                    let t = x * u.powf(1.0 / a);
                    (1.0 - t).powf(b - 1.0) * x.powf(a) / a
                },
                0.0,
                1.0,
                &cfg,
            )
            .unwrap()
            .value;
            let v = incomplete_beta(x, a, b).unwrap();
            assert!(
                ((v - oracle) / oracle).abs() < 1e-10,
                "{x} {a} {b}: {v} vs {oracle}"
            );
        }
    }

    #[test]
    fn tiny_arguments_stay_finite_in_log_space() {
        let l = ln_reg_inc_beta(1e-200, 300.0, 0.5).unwrap();
        assert!(l.is_finite() && l < -1e4);
    }

    #[test]
    fn log_sum_exp_large_spread() {
        let v = log_sum_exp(&[1000.0, 1000.0, -1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
