//! Secrecy outage probability and mean secrecy rate of the approximate
//! model, averaged over the tagged-BS distance.
//!
//! The distance `y = ‖c‖` has density `2λ_bπy·e^{−λ_bπy²}`; integrals run
//! over `u = λ_bπy²` with weight `e^{−u}`. Conditioned on `y`, the secrecy
//! rate is positive only when the leakage is below `τ(Î, y)`, which is in
//! turn only possible for interference below
//! `x*(y) = α/(ρχ) − 1/ρ − χy^{−η}`.

use std::cell::Cell;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::det_eq::{deterministic_equivalents, DeterministicEquivalents};
use super::moments::{
    interference_moments, leakage_moments, lognormal_fit, normal_pdf, normal_q, LognormalFit,
};
use super::quadrature::integrate;
use super::{AnalyticConfig, AnalyticError};
use crate::params::SystemParams;

/// Source of the interference and leakage densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfSource {
    /// Moment-matched lognormal laws.
    #[default]
    Lognormal,
    /// Numerical Laplace inversion; reserved, not implemented.
    Numeric,
}

/// Leakage threshold below which a positive secrecy rate is achieved, for
/// interference `x` and tagged distance `y`. May be negative.
pub fn tau(x: f64, y: f64, det: &DeterministicEquivalents, params: &SystemParams) -> f64 {
    let rho = params.snr;
    let py = y.powf(-params.path_loss_exp);
    det.alpha * py / (rho * det.chi * py + rho * x + 1.0) - det.chi * py
}

/// Largest interference for which `τ > 0`.
pub fn interference_threshold(y: f64, det: &DeterministicEquivalents, params: &SystemParams) -> f64 {
    let rho = params.snr;
    det.alpha / (rho * det.chi) - 1.0 / rho - det.chi * y.powf(-params.path_loss_exp)
}

/// Shared set-up of the distance-averaged integrals.
pub(crate) struct DistanceAverage<'a> {
    pub params: &'a SystemParams,
    pub det: DeterministicEquivalents,
    pub cfg: &'a AnalyticConfig,
    pub u_max: f64,
}

impl<'a> DistanceAverage<'a> {
    pub fn new(params: &'a SystemParams, cfg: &'a AnalyticConfig) -> Result<Self, AnalyticError> {
        Ok(Self {
            params,
            det: deterministic_equivalents(params.load_ratio, params.regularizer)?,
            cfg,
            u_max: -cfg.distance_tail.ln(),
        })
    }

    pub fn distance(&self, u: f64) -> f64 {
        (u / (PI * self.params.bs_density)).sqrt()
    }

    /// `u` below which `x*(y) ≤ 0`, i.e. the near region where secrecy is
    /// impossible; `None` when it covers every distance.
    pub fn secrecy_onset(&self) -> Option<f64> {
        let (a, c, rho) = (self.det.alpha, self.det.chi, self.params.snr);
        if a <= c {
            return None;
        }
        let y0 = ((a - c) / (rho * c * c)).powf(-1.0 / self.params.path_loss_exp);
        Some(PI * self.params.bs_density * y0 * y0)
    }

    /// `∫_{u_lo}^{u_max} e^{−u} h(y(u)) du`.
    pub fn integrate<F>(&self, u_lo: f64, mut h: F) -> Result<f64, AnalyticError>
    where
        F: FnMut(f64) -> Result<f64, AnalyticError>,
    {
        if u_lo >= self.u_max {
            return Ok(0.0);
        }
        let failure = Cell::new(None);
        let r = integrate(
            |u: f64| match h(self.distance(u)) {
                Ok(v) => (-u).exp() * v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            u_lo,
            self.u_max,
            &self.cfg.outer,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }
}

fn require_lognormal(source: PdfSource) -> Result<(), AnalyticError> {
    match source {
        PdfSource::Lognormal => Ok(()),
        PdfSource::Numeric => Err(AnalyticError::Unsupported(
            "numerical Laplace inversion of the interference and leakage densities",
        )),
    }
}

/// Outage probability conditioned on the tagged distance `y`.
pub fn outage_given_distance(
    y: f64,
    det: &DeterministicEquivalents,
    leak: &LognormalFit,
    params: &SystemParams,
    cfg: &AnalyticConfig,
) -> Result<f64, AnalyticError> {
    let x_star = interference_threshold(y, det, params);
    if x_star <= 0.0 {
        return Ok(1.0);
    }
    let fit = lognormal_fit(&interference_moments(y, params)?)?;
    let t_star = fit.standardize(x_star);
    let p_far = normal_q(t_star);
    let t_lo = -cfg.normal_cutoff;
    if t_star <= t_lo {
        return Ok(p_far);
    }
    let near = integrate(
        |t: f64| normal_pdf(t) * leak.survival(tau(fit.quantile_point(t), y, det, params)),
        t_lo,
        t_star,
        &cfg.inner,
    )?;
    Ok((p_far + near.value).min(1.0))
}

/// Probability that the approximate secrecy rate is zero.
pub fn outage_probability(
    params: &SystemParams,
    source: PdfSource,
    cfg: &AnalyticConfig,
) -> Result<f64, AnalyticError> {
    require_lognormal(source)?;
    let avg = DistanceAverage::new(params, cfg)?;
    let leak = lognormal_fit(&leakage_moments(params)?)?;
    let Some(u0) = avg.secrecy_onset() else {
        return Ok(1.0);
    };
    let near = -(-u0.min(avg.u_max)).exp_m1();
    let far = avg.integrate(u0, |y| outage_given_distance(y, &avg.det, &leak, params, cfg))?;
    Ok((near + far).clamp(0.0, 1.0))
}

/// Mean of the approximate secrecy rate (bits) conditioned on `y`.
pub fn rate_given_distance(
    y: f64,
    det: &DeterministicEquivalents,
    leak: &LognormalFit,
    params: &SystemParams,
    cfg: &AnalyticConfig,
) -> Result<f64, AnalyticError> {
    let x_star = interference_threshold(y, det, params);
    if x_star <= 0.0 {
        return Ok(0.0);
    }
    let rho = params.snr;
    let py = y.powf(-params.path_loss_exp);
    let fit = lognormal_fit(&interference_moments(y, params)?)?;
    let t_star = fit.standardize(x_star);
    let cut = -cfg.normal_cutoff;
    if t_star <= cut {
        return Ok(0.0);
    }
    let failure = Cell::new(None);
    let outer = integrate(
        |t: f64| {
            let x = fit.quantile_point(t);
            let th = tau(x, y, det, params);
            if th <= 0.0 {
                return 0.0;
            }
            let v_star = leak.standardize(th);
            if v_star <= cut {
                return 0.0;
            }
            let legit = (rho * det.alpha * py / (rho * det.chi * py + rho * x + 1.0)).ln_1p();
            let inner = integrate(
                |v: f64| {
                    let z = leak.quantile_point(v);
                    normal_pdf(v) * (legit - (rho * det.chi * py + rho * z).ln_1p())
                },
                cut,
                v_star,
                &cfg.inner,
            );
            match inner {
                Ok(r) => normal_pdf(t) * r.value / LN_2,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        },
        cut,
        t_star,
        &cfg.inner,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(outer.value.max(0.0)),
    }
}

/// Mean approximate secrecy rate in bits per channel use.
pub fn mean_secrecy_rate(
    params: &SystemParams,
    source: PdfSource,
    cfg: &AnalyticConfig,
) -> Result<f64, AnalyticError> {
    require_lognormal(source)?;
    let avg = DistanceAverage::new(params, cfg)?;
    let leak = lognormal_fit(&leakage_moments(params)?)?;
    let Some(u0) = avg.secrecy_onset() else {
        return Ok(0.0);
    };
    let r = avg.integrate(u0, |y| rate_given_distance(y, &avg.det, &leak, params, cfg))?;
    Ok(r.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, RawConfig};

    fn params(snr_db: f64, lambda: f64) -> SystemParams {
        derive_params(&RawConfig {
            n_antennas: 20,
            users_per_cell: Some(20.0),
            load_ratio: None,
            snr_db: Some(snr_db),
            snr_linear: None,
            path_loss_exp: 4.0,
            bs_density: lambda,
            regularizer: None,
            user_density: None,
            round_users: false,
        })
        .unwrap()
    }

    fn hand_det() -> DeterministicEquivalents {
        DeterministicEquivalents {
            g_val: 2.0,
            alpha: 5.0 / 9.0,
            chi: 1.0 / 9.0,
        }
    }

    #[test]
    fn tau_hand_value() {
        let mut p = params(0.0, 0.1);
        p.snr = 1.0;
        let t = tau(0.0, 1.0, &hand_det(), &p);
        assert!((t - (0.5 - 1.0 / 9.0)).abs() < 1e-15);
        assert!((t - 0.388_89).abs() < 1e-5);
    }

    #[test]
    fn tau_limits() {
        let mut p = params(0.0, 0.1);
        p.snr = 1e8;
        assert!(tau(0.0, 1.0, &hand_det(), &p) < 0.0);
        p.snr = 1.0;
        assert!((tau(1e300, 1.0, &hand_det(), &p) + 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_the_sign_change_of_tau() {
        let p = params(10.0, 0.1);
        let det = deterministic_equivalents(p.load_ratio, p.regularizer).unwrap();
        let y = 2.0;
        let xs = interference_threshold(y, &det, &p);
        assert!(xs > 0.0);
        assert!(tau(xs * 0.999, y, &det, &p) > 0.0);
        assert!(tau(xs * 1.001, y, &det, &p) < 0.0);
        assert!(tau(xs, y, &det, &p).abs() < 1e-12);
    }

    #[test]
    fn outage_is_a_probability() {
        let cfg = AnalyticConfig::default();
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            for lambda in [1e-3, 1e-2, 0.1, 0.5, 1.0] {
                let p = outage_probability(&params(snr_db, lambda), PdfSource::Lognormal, &cfg).unwrap();
                assert!((0.0..=1.0).contains(&p), "{snr_db} {lambda}: {p}");
            }
        }
    }

    #[test]
    fn high_snr_limits() {
        let cfg = AnalyticConfig::default();
        let mut p = params(0.0, 0.1);
        p = p.with_snr(1e8, false).unwrap();
        assert!(outage_probability(&p, PdfSource::Lognormal, &cfg).unwrap() >= 0.99);
        assert!(mean_secrecy_rate(&p, PdfSource::Lognormal, &cfg).unwrap() <= 1e-3);
    }

    #[test]
    fn numeric_source_is_reserved() {
        let cfg = AnalyticConfig::default();
        let p = params(10.0, 0.1);
        assert!(matches!(
            outage_probability(&p, PdfSource::Numeric, &cfg),
            Err(AnalyticError::Unsupported(_))
        ));
    }

    #[test]
    fn mean_rate_vs_snr_has_interior_peak() {
        let cfg = AnalyticConfig::default();
        let rates: Vec<f64> = (0..=16)
            .map(|i| {
                let db = -10.0 + 2.5 * i as f64;
                mean_secrecy_rate(&params(db, 0.1), PdfSource::Lognormal, &cfg).unwrap()
            })
            .collect();
        let (imax, _) = rates
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(imax > 0 && imax < rates.len() - 1, "{rates:?}");
    }
}
