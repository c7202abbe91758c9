//! Model parameters and the closed-form RCI regularizer.
//!
//! Noise power is normalized to one, so the per-BS transmit power equals the
//! SNR `ρ`. The user density is always derived as `λ_u = K·λ_b`, and the cell
//! radius used by the ball approximation of the tagged cell is
//! `r = 1/√(π λ_b)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error(
        "path-loss exponent must exceed 2 (got {0}); interference and leakage moments diverge otherwise"
    )]
    PathLossExponent(f64),
    #[error("{name} must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("users per cell must be a positive integer (got {0})")]
    UsersPerCell(f64),
    #[error("exactly one of `snr_db` and `snr_linear` must be given")]
    SnrExclusivity,
    #[error(
        "users per cell must be given by exactly one of `users_per_cell`, `load_ratio` or `user_density`"
    )]
    LoadExclusivity,
    #[error("user density {user_density} is not users_per_cell × bs_density = {implied}")]
    UserDensityMismatch { user_density: f64, implied: f64 },
    #[error("regularizer formula outside its domain at load ratio {load_ratio}, snr {snr}: {reason}")]
    RegularizerDomain {
        load_ratio: f64,
        snr: f64,
        reason: &'static str,
    },
}

/// Validated scalar parameters shared by every other module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_antennas: usize,
    pub users_per_cell: usize,
    pub load_ratio: f64,
    /// Linear SNR `P/σ²`.
    pub snr: f64,
    pub path_loss_exp: f64,
    pub bs_density: f64,
    pub user_density: f64,
    pub regularizer: f64,
    pub cell_radius: f64,
}

impl SystemParams {
    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    /// Same parameters at another SNR. The regularizer is re-derived unless
    /// `keep_regularizer` is set.
    pub fn with_snr(&self, snr: f64, keep_regularizer: bool) -> Result<Self, ParamsError> {
        let mut cfg = RawConfig::from(self);
        cfg.snr_linear = Some(snr);
        if !keep_regularizer {
            cfg.regularizer = None;
        }
        derive_params(&cfg)
    }

    pub fn with_bs_density(&self, bs_density: f64) -> Result<Self, ParamsError> {
        let mut cfg = RawConfig::from(self);
        cfg.bs_density = bs_density;
        derive_params(&cfg)
    }
}

/// Cooperation range of the malicious users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperationConfig {
    pub coop_radius: f64,
    /// Pairwise distance below which two users are linked. Defaults to
    /// `coop_radius`; disc-overlap semantics would use `2·coop_radius`.
    #[serde(default)]
    pub connection_distance: Option<f64>,
}

impl CooperationConfig {
    pub fn new(coop_radius: f64) -> Result<Self, ParamsError> {
        positive("coop_radius", coop_radius)?;
        Ok(Self {
            coop_radius,
            connection_distance: None,
        })
    }

    /// Largest `d` with `P_M d^{-η} / P_n ≥ t`.
    pub fn from_power_model(
        tx_power: f64,
        noise_power: f64,
        threshold: f64,
        path_loss_exp: f64,
    ) -> Result<Self, ParamsError> {
        positive("tx_power", tx_power)?;
        positive("noise_power", noise_power)?;
        positive("threshold", threshold)?;
        positive("path_loss_exp", path_loss_exp)?;
        Self::new((tx_power / (threshold * noise_power)).powf(1.0 / path_loss_exp))
    }

    pub fn link_distance(&self) -> f64 {
        self.connection_distance.unwrap_or(self.coop_radius)
    }
}

/// User-facing configuration, as stored in JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub n_antennas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users_per_cell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_linear: Option<f64>,
    pub path_loss_exp: f64,
    pub bs_density: f64,
    /// `λ_u`; either implies `K = λ_u/λ_b` or must agree with `users_per_cell`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_density: Option<f64>,
    #[serde(default)]
    pub regularizer: Option<f64>,
    /// Round `load_ratio · n_antennas` to the nearest integer instead of
    /// rejecting a fractional user count.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub round_users: bool,
}

impl From<&SystemParams> for RawConfig {
    fn from(p: &SystemParams) -> Self {
        Self {
            n_antennas: p.n_antennas,
            users_per_cell: Some(p.users_per_cell as f64),
            load_ratio: None,
            snr_db: None,
            snr_linear: Some(p.snr),
            path_loss_exp: p.path_loss_exp,
            bs_density: p.bs_density,
            user_density: None,
            regularizer: Some(p.regularizer),
            round_users: false,
        }
    }
}

impl RawConfig {
    /// Every constraint violation, without stopping at the first one.
    pub fn diagnostics(&self) -> Vec<ParamsError> {
        let mut out = Vec::new();
        if self.n_antennas == 0 {
            out.push(ParamsError::NonPositive {
                name: "n_antennas",
                value: 0.0,
            });
        }
        if !(self.path_loss_exp > 2.0) {
            out.push(ParamsError::PathLossExponent(self.path_loss_exp));
        }
        if let Err(e) = positive("bs_density", self.bs_density) {
            out.push(e);
        }
        match (self.snr_db, self.snr_linear) {
            (Some(_), Some(_)) | (None, None) => out.push(ParamsError::SnrExclusivity),
            (None, Some(v)) => {
                if let Err(e) = positive("snr_linear", v) {
                    out.push(e);
                }
            }
            (Some(db), None) => {
                if !db.is_finite() {
                    out.push(ParamsError::NonPositive {
                        name: "snr_db",
                        value: db,
                    });
                }
            }
        }
        if let Err(e) = self.resolve_users() {
            out.push(e);
        }
        if let Some(xi) = self.regularizer {
            if let Err(e) = positive("regularizer", xi) {
                out.push(e);
            }
        }
        out
    }

    fn resolve_users(&self) -> Result<usize, ParamsError> {
        let k = match (self.users_per_cell, self.load_ratio, self.user_density) {
            (Some(k), None, _) => k,
            (None, Some(beta), None) => {
                positive("load_ratio", beta)?;
                beta * self.n_antennas as f64
            }
            (None, None, Some(lu)) => {
                positive("user_density", lu)?;
                positive("bs_density", self.bs_density)?;
                lu / self.bs_density
            }
            _ => return Err(ParamsError::LoadExclusivity),
        };
        // ratios such as 2.0/0.1 land one ulp off an integer
        let nearest = k.round();
        let k = if self.round_users || (k - nearest).abs() <= 1e-9 * nearest {
            nearest
        } else {
            k
        };
        if !(k >= 1.0) || k.fract() != 0.0 || !k.is_finite() {
            return Err(ParamsError::UsersPerCell(k));
        }
        if let (Some(lu), Some(_)) = (self.user_density, self.users_per_cell) {
            let implied = k * self.bs_density;
            if !((lu - implied).abs() <= 1e-9 * implied) {
                return Err(ParamsError::UserDensityMismatch {
                    user_density: lu,
                    implied,
                });
            }
        }
        Ok(k as usize)
    }

    fn resolve_snr(&self) -> Result<f64, ParamsError> {
        let snr = match (self.snr_db, self.snr_linear) {
            (Some(db), None) => 10f64.powf(db / 10.0),
            (None, Some(v)) => v,
            _ => return Err(ParamsError::SnrExclusivity),
        };
        positive("snr", snr)?;
        Ok(snr)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::NonPositive { name, value })
    }
}

/// Regularizer maximizing the large-system secrecy rate of an isolated cell.
pub fn optimal_regularization(load_ratio: f64, snr: f64) -> Result<f64, ParamsError> {
    positive("load_ratio", load_ratio)?;
    positive("snr", snr)?;
    let (b, p) = (load_ratio, snr);
    let radicand = b * b * (p * p + p + 1.0) - b * (2.0 * p * (p - 1.0)) + p * p;
    if !(radicand >= 0.0) {
        return Err(ParamsError::RegularizerDomain {
            load_ratio,
            snr,
            reason: "negative radicand",
        });
    }
    let num = -2.0 * p * p * (1.0 - b) * (1.0 - b) + 6.0 * p * b + 2.0 * b * b
        - 2.0 * (b * (p + 1.0) - p) * radicand.sqrt();
    let den = 6.0 * p * p * (b + 2.0) + 6.0 * p * b;
    let xi = num / den;
    if !xi.is_finite() {
        return Err(ParamsError::RegularizerDomain {
            load_ratio,
            snr,
            reason: "non-finite value",
        });
    }
    if xi <= 0.0 {
        return Err(ParamsError::RegularizerDomain {
            load_ratio,
            snr,
            reason: "non-positive value",
        });
    }
    Ok(xi)
}

pub fn derive_params(cfg: &RawConfig) -> Result<SystemParams, ParamsError> {
    if cfg.n_antennas == 0 {
        return Err(ParamsError::NonPositive {
            name: "n_antennas",
            value: 0.0,
        });
    }
    if !(cfg.path_loss_exp > 2.0) || !cfg.path_loss_exp.is_finite() {
        return Err(ParamsError::PathLossExponent(cfg.path_loss_exp));
    }
    positive("bs_density", cfg.bs_density)?;
    let users_per_cell = cfg.resolve_users()?;
    let snr = cfg.resolve_snr()?;
    let load_ratio = users_per_cell as f64 / cfg.n_antennas as f64;
    let regularizer = match cfg.regularizer {
        Some(xi) => {
            positive("regularizer", xi)?;
            xi
        }
        None => optimal_regularization(load_ratio, snr)?,
    };
    Ok(SystemParams {
        n_antennas: cfg.n_antennas,
        users_per_cell,
        load_ratio,
        snr,
        path_loss_exp: cfg.path_loss_exp,
        bs_density: cfg.bs_density,
        user_density: users_per_cell as f64 * cfg.bs_density,
        regularizer,
        cell_radius: 1.0 / (PI * cfg.bs_density).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig4_config() -> RawConfig {
        serde_json::from_str(
            r#"{"n_antennas":20,"users_per_cell":20,"snr_db":10.0,"path_loss_exp":4.0,"bs_density":0.1,"regularizer":null}"#,
        )
        .unwrap()
    }

    #[test]
    fn regularizer_unit_load_unit_snr() {
        let xi = optimal_regularization(1.0, 1.0).unwrap();
        assert!((xi - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn regularizer_vanishes_at_high_snr() {
        assert!(optimal_regularization(1.0, 1e6).unwrap() < 1e-3);
    }

    #[test]
    fn regularizer_regression_half_load() {
        // 40-digit evaluation of the closed form.
        let oracle = 0.023_396_683_512_091_689_f64;
        let xi = optimal_regularization(0.5, 10.0).unwrap();
        assert!((xi - oracle).abs() < 1e-14 * oracle.max(1.0));
    }

    #[test]
    fn regularizer_rejects_bad_inputs() {
        assert!(optimal_regularization(0.0, 1.0).is_err());
        assert!(optimal_regularization(1.0, -1.0).is_err());
        // The closed form turns negative for heavily loaded cells.
        assert!(matches!(
            optimal_regularization(2.0, 1.0),
            Err(ParamsError::RegularizerDomain { .. })
        ));
    }

    #[test]
    fn regularizer_decreasing_in_snr() {
        for beta in [0.25, 0.5, 1.0] {
            let mut prev = f64::INFINITY;
            for i in 0..=60 {
                let rho = 10f64.powf(-2.0 + 6.0 * i as f64 / 60.0);
                let xi = optimal_regularization(beta, rho).unwrap();
                assert!(xi < prev, "beta={beta} rho={rho}");
                prev = xi;
            }
        }
    }

    #[test]
    fn fig4_scenario() {
        let p = derive_params(&fig4_config()).unwrap();
        assert_eq!(p.load_ratio, 1.0);
        assert!((p.snr - 10.0).abs() < 1e-12);
        assert!((p.user_density - 2.0).abs() < 1e-15);
        assert!((p.cell_radius - 1.784_124_116_152_771).abs() < 1e-12);
        assert!((p.cell_radius.powi(2) * PI * p.bs_density - 1.0).abs() < 1e-14);
        assert_eq!(p.regularizer, optimal_regularization(1.0, 10.0).unwrap());
    }

    #[test]
    fn unit_radius_density() {
        let mut cfg = fig4_config();
        cfg.bs_density = 1.0 / PI;
        assert!((derive_params(&cfg).unwrap().cell_radius - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_quadratic_path_loss() {
        let mut cfg = fig4_config();
        cfg.path_loss_exp = 2.0;
        let err = derive_params(&cfg).unwrap_err();
        assert_eq!(err, ParamsError::PathLossExponent(2.0));
        assert!(err.to_string().contains("moments diverge"));
    }

    #[test]
    fn user_count_from_load_ratio() {
        let mut cfg = fig4_config();
        cfg.users_per_cell = None;
        cfg.load_ratio = Some(0.525);
        assert!(matches!(derive_params(&cfg), Err(ParamsError::UsersPerCell(_))));
        cfg.round_users = true;
        assert_eq!(derive_params(&cfg).unwrap().users_per_cell, 11);
        cfg.load_ratio = Some(0.5);
        cfg.round_users = false;
        assert_eq!(derive_params(&cfg).unwrap().users_per_cell, 10);
    }

    #[test]
    fn user_density_implies_or_checks_users_per_cell() {
        let mut c = fig4_config();
        c.users_per_cell = None;
        c.user_density = Some(2.0);
        // 2.0 / 0.1 is one ulp below 20
        assert_eq!(derive_params(&c).unwrap().users_per_cell, 20);
        c.users_per_cell = Some(20.0);
        assert!(derive_params(&c).is_ok());
        c.user_density = Some(2.5);
        assert!(matches!(
            derive_params(&c),
            Err(ParamsError::UserDensityMismatch { .. })
        ));
        assert_eq!(c.diagnostics().len(), 1);
    }

    #[test]
    fn snr_keys_are_exclusive() {
        let mut cfg = fig4_config();
        cfg.snr_linear = Some(10.0);
        assert!(cfg.diagnostics().contains(&ParamsError::SnrExclusivity));
        assert!(fig4_config().diagnostics().is_empty());
    }

    #[test]
    fn cooperation_radius_from_power_model() {
        let c = CooperationConfig::from_power_model(16.0, 1.0, 1.0, 4.0).unwrap();
        assert!((c.coop_radius - 2.0).abs() < 1e-15);
        assert_eq!(c.link_distance(), 2.0);
    }

    proptest! {
        #[test]
        fn serialization_roundtrip(
            n in 1usize..64,
            k in 1usize..64,
            snr_db in -20.0f64..40.0,
            eta in 2.01f64..6.0,
            lambda in 1e-4f64..10.0,
        ) {
            let cfg = RawConfig {
                n_antennas: n,
                users_per_cell: Some(k as f64),
                load_ratio: None,
                snr_db: Some(snr_db),
                snr_linear: None,
                path_loss_exp: eta,
                bs_density: lambda,
                regularizer: Some(0.1),
                user_density: None,
                round_users: false,
            };
            let p = derive_params(&cfg).unwrap();
            let json = serde_json::to_string(&p).unwrap();
            let back: SystemParams = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, p);
            prop_assert_eq!(derive_params(&RawConfig::from(&back)).unwrap(), p);
        }
    }
}
