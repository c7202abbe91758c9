//! Monte Carlo estimation of the secrecy outage probability, the mean
//! secrecy rate, and the empirical laws of the interference and leakage.
//!
//! Each geometry draws from its own random stream (see [`crate::rng`]), the
//! geometries are simulated in parallel, and the per-geometry results are
//! reduced in index order, so estimates are bit-identical for any worker
//! count. Sweeps over SNR that reuse a seed see identical geometries and
//! channel draws (common random numbers).

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{deterministic_equivalents, AnalyticError};
use crate::geometry::{
    build_realization_in, default_window_radius, largest_cluster_fraction, path_gain_sq,
    sample_ball_scene_into, sample_ppp, BallScene, GeometryError, SceneMode,
};
use crate::params::{CooperationConfig, SystemParams};
use crate::physical::{
    approx_secrecy_rate, compute_sinrs, interference_gain, rci_precoder, sample_cn, sample_scene_channels,
    secrecy_rate, ChannelMatrix, ChannelPolicy, PhysicalError,
};
use crate::rng::trial_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physical(#[from] PhysicalError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("invalid Monte Carlo request: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: usize,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl EstimateWithCI {
    pub fn new(mean: f64, std_error: f64, n_trials: usize) -> Self {
        Self {
            mean,
            std_error,
            n_trials,
            ci95_low: mean - 1.96 * std_error,
            ci95_high: mean + 1.96 * std_error,
        }
    }

    /// Binomial proportion with its normal-approximation standard error.
    pub fn proportion(successes: usize, n: usize) -> Self {
        let p = successes as f64 / n as f64;
        Self::new(p, (p * (1.0 - p) / n as f64).sqrt(), n)
    }

    /// Sample mean with the CLT standard error.
    pub fn sample_mean(values: &[f64]) -> Self {
        let (mean, var) = mean_and_variance(values);
        let n = values.len();
        Self::new(mean, (var / n as f64).sqrt(), n)
    }
}

/// Mean and unbiased variance (zero for fewer than two values).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Interference,
    Leakage,
    Rate,
    ApproxRate,
}

impl SampleLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleLabel::Interference => "interference",
            SampleLabel::Leakage => "leakage",
            SampleLabel::Rate => "rate",
            SampleLabel::ApproxRate => "approx_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub label: SampleLabel,
    pub values: Vec<f64>,
}

impl SampleSet {
    /// One value per line under a `# label` header.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {}", self.label.as_str())?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Trial counts and channel modelling of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_geometries: usize,
    pub n_fadings: usize,
    pub seed: u64,
    /// Interfering BSs within this many mean cell radii of the typical user
    /// get explicit channels and precoders in exact mode.
    #[serde(default = "default_explicit_cells")]
    pub explicit_cells: f64,
    #[serde(default)]
    pub explicit_eavesdroppers: bool,
    /// Sampling-window radius; the tail-bounded default when absent.
    #[serde(default)]
    pub window_radius: Option<f64>,
}

fn default_explicit_cells() -> f64 {
    4.0
}

impl McConfig {
    pub fn new(n_geometries: usize, n_fadings: usize, seed: u64) -> Self {
        Self {
            n_geometries,
            n_fadings,
            seed,
            explicit_cells: default_explicit_cells(),
            explicit_eavesdroppers: false,
            window_radius: None,
        }
    }

    fn window(&self, params: &SystemParams) -> f64 {
        self.window_radius
            .unwrap_or_else(|| default_window_radius(params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyEstimate {
    pub outage: EstimateWithCI,
    pub mean_rate: EstimateWithCI,
}

fn shot_noise_gamma<R: Rng + ?Sized>(dist_sq: &[f64], shape: usize, eta: f64, rng: &mut R) -> f64 {
    let law = Gamma::new(shape as f64, 1.0).expect("positive shape");
    dist_sq
        .iter()
        .map(|&d2| law.sample(rng) * path_gain_sq(d2, eta))
        .sum()
}

fn shot_noise_exp<R: Rng + ?Sized>(dist_sq: &[f64], eta: f64, rng: &mut R) -> f64 {
    dist_sq
        .iter()
        .map(|&d2| {
            let e: f64 = Exp1.sample(rng);
            e * path_gain_sq(d2, eta)
        })
        .sum()
}

/// Secrecy rates of all fading draws over one geometry.
fn geometry_rates(
    params: &SystemParams,
    mode: SceneMode,
    cfg: &McConfig,
    window: f64,
    index: u64,
) -> Result<Vec<f64>, McError> {
    let mut rng = trial_rng(cfg.seed, index);
    let mut rates = Vec::with_capacity(cfg.n_fadings);
    match mode {
        SceneMode::Exact => {
            let real = build_realization_in(params, SceneMode::Exact, window, &mut rng)?;
            let policy = ChannelPolicy {
                explicit_radius: cfg.explicit_cells * params.cell_radius,
                explicit_eavesdroppers: cfg.explicit_eavesdroppers,
            };
            for _ in 0..cfg.n_fadings {
                let ch = sample_scene_channels(&real, params, &policy, &mut rng)?;
                rates.push(secrecy_rate(&compute_sinrs(&real, &ch, params)?));
            }
        }
        SceneMode::BallApprox => {
            let det = deterministic_equivalents(params.load_ratio, params.regularizer)?;
            let mut scene = BallScene::default();
            sample_ball_scene_into(params, window, None, &mut rng, &mut scene)?;
            let k = params.users_per_cell;
            let eta = params.path_loss_exp;
            for _ in 0..cfg.n_fadings {
                let i_hat = shot_noise_gamma(&scene.interferer_dist_sq, k, eta, &mut rng) / k as f64;
                let l_hat = shot_noise_exp(&scene.eavesdropper_dist_sq, eta, &mut rng) / k as f64;
                rates.push(approx_secrecy_rate(
                    scene.tagged_distance,
                    i_hat,
                    l_hat,
                    &det,
                    params,
                ));
            }
        }
    }
    Ok(rates)
}

fn check_counts(cfg: &McConfig) -> Result<(), McError> {
    if cfg.n_geometries == 0 || cfg.n_fadings == 0 {
        return Err(McError::Contract(format!(
            "need at least one geometry and one fading draw (got {} x {})",
            cfg.n_geometries, cfg.n_fadings
        )));
    }
    Ok(())
}

/// Per-geometry secrecy rates, in geometry order. Exact mode evaluates the
/// channel-level rate; ball mode the large-system approximation.
pub fn simulate_rates(
    params: &SystemParams,
    mode: SceneMode,
    cfg: &McConfig,
) -> Result<Vec<Vec<f64>>, McError> {
    check_counts(cfg)?;
    let window = cfg.window(params);
    (0..cfg.n_geometries as u64)
        .into_par_iter()
        .map(|g| geometry_rates(params, mode, cfg, window, g))
        .collect()
}

/// Outage probability and mean secrecy rate from one set of trials.
pub fn summarize_rates(per_geometry: &[Vec<f64>]) -> SecrecyEstimate {
    let n: usize = per_geometry.iter().map(Vec::len).sum();
    let outages = per_geometry.iter().flatten().filter(|&&r| r <= 0.0).count();
    let means: Vec<f64> = per_geometry
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    let (mean, var) = mean_and_variance(&means);
    let se = (var / means.len() as f64).sqrt();
    SecrecyEstimate {
        outage: EstimateWithCI::proportion(outages, n),
        mean_rate: EstimateWithCI::new(mean, se, n),
    }
}

pub fn estimate_secrecy(
    params: &SystemParams,
    mode: SceneMode,
    cfg: &McConfig,
) -> Result<SecrecyEstimate, McError> {
    Ok(summarize_rates(&simulate_rates(params, mode, cfg)?))
}

pub fn estimate_outage(
    params: &SystemParams,
    mode: SceneMode,
    n_geometries: usize,
    n_fadings: usize,
    seed: u64,
) -> Result<EstimateWithCI, McError> {
    Ok(estimate_secrecy(params, mode, &McConfig::new(n_geometries, n_fadings, seed))?.outage)
}

pub fn estimate_mean_rate(
    params: &SystemParams,
    mode: SceneMode,
    n_geometries: usize,
    n_fadings: usize,
    seed: u64,
) -> Result<EstimateWithCI, McError> {
    Ok(estimate_secrecy(params, mode, &McConfig::new(n_geometries, n_fadings, seed))?.mean_rate)
}

/// Conditioning of the tagged-BS distance when sampling `Î` and `L̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceCondition {
    /// `‖c‖ = r`.
    CellRadius,
    Fixed(f64),
    /// `‖c‖` drawn from the nearest-BS distance law.
    Random,
}

/// Where the interference and leakage gains come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainPath {
    /// `Γ(K,1)` and `exp(1)` draws.
    #[default]
    Fast,
    /// Inner products of explicit channels with RCI precoders.
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub gains: GainPath,
    pub window_radius: Option<f64>,
    /// Add the mean of the shot noise beyond the window (Campbell) to every
    /// sample. Removes the truncation bias of the mean; the missing
    /// variance is smaller by a further factor `(r/R)^{η−2}`.
    pub compensate_tail: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            gains: GainPath::Fast,
            window_radius: None,
            compensate_tail: false,
        }
    }
}

fn slow_samples<R: Rng + ?Sized>(
    scene: &BallScene,
    params: &SystemParams,
    rng: &mut R,
) -> Result<(f64, f64), McError> {
    let (n, k, eta) = (params.n_antennas, params.users_per_cell, params.path_loss_exp);
    let mut i_hat = 0.0;
    for &d2 in &scene.interferer_dist_sq {
        let w = rci_precoder(&ChannelMatrix::sample(k, n, rng), params.regularizer)?;
        let h = DVector::from_fn(n, |_, _| sample_cn(rng));
        i_hat += interference_gain(&w, &h) * path_gain_sq(d2, eta);
    }
    let wc = rci_precoder(&ChannelMatrix::sample(k, n, rng), params.regularizer)?;
    let w_o = wc.matrix.column(0);
    let mut l_hat = 0.0;
    for &d2 in &scene.eavesdropper_dist_sq {
        let h = DVector::from_fn(n, |_, _| sample_cn(rng));
        l_hat += k as f64 * h.dotc(&w_o).norm_sqr() * path_gain_sq(d2, eta);
    }
    Ok((i_hat / k as f64, l_hat / k as f64))
}

/// Independent samples of the normalized interference `Î` and leakage `L̂`
/// over ball-approximation scenes.
pub fn collect_interference_leakage(
    params: &SystemParams,
    n_samples: usize,
    condition: DistanceCondition,
    options: &SamplingOptions,
    seed: u64,
) -> Result<(SampleSet, SampleSet), McError> {
    if n_samples == 0 {
        return Err(McError::Contract("need at least one sample".into()));
    }
    let window = options
        .window_radius
        .unwrap_or_else(|| default_window_radius(params));
    let fixed = match condition {
        DistanceCondition::CellRadius => Some(params.cell_radius),
        DistanceCondition::Fixed(y) => Some(y),
        DistanceCondition::Random => None,
    };
    let k = params.users_per_cell;
    let eta = params.path_loss_exp;
    let pairs: Vec<(f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map_init(BallScene::default, |scene, i| {
            let mut rng = trial_rng(seed, i);
            sample_ball_scene_into(params, window, fixed, &mut rng, scene)?;
            match options.gains {
                GainPath::Fast => Ok((
                    shot_noise_gamma(&scene.interferer_dist_sq, k, eta, &mut rng) / k as f64,
                    shot_noise_exp(&scene.eavesdropper_dist_sq, eta, &mut rng) / k as f64,
                )),
                GainPath::Slow => slow_samples(scene, params, &mut rng),
            }
        })
        .collect::<Result<_, McError>>()?;
    let (mut i_vals, mut l_vals): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    if options.compensate_tail {
        let tail = 2.0 * PI * window.powf(2.0 - eta) / (eta - 2.0);
        let i_tail = params.bs_density * tail;
        let l_tail = params.user_density * tail / k as f64;
        i_vals.iter_mut().for_each(|v| *v += i_tail);
        l_vals.iter_mut().for_each(|v| *v += l_tail);
    }
    Ok((
        SampleSet {
            label: SampleLabel::Interference,
            values: i_vals,
        },
        SampleSet {
            label: SampleLabel::Leakage,
            values: l_vals,
        },
    ))
}

/// `(1/n) Σ e^{−s xᵢ}` for every `s` in the grid.
pub fn empirical_laplace(samples: &SampleSet, s_grid: &[f64]) -> Result<Vec<f64>, McError> {
    if samples.values.is_empty() {
        return Err(McError::Contract(
            "empirical Laplace transform of an empty sample".into(),
        ));
    }
    let n = samples.values.len() as f64;
    Ok(s_grid
        .iter()
        .map(|&s| samples.values.iter().map(|&x| (-s * x).exp()).sum::<f64>() / n)
        .collect())
}

/// Sup distance between the empirical CDF of `sorted` and `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample Kolmogorov–Smirnov statistic.
pub fn ks_p_value(distance: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * distance;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Largest-cluster fractions of the cooperation graph over independent
/// user patterns.
pub fn percolation_trials(
    params: &SystemParams,
    coop: &CooperationConfig,
    window_radius: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>, McError> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let users = sample_ppp(params.user_density, window_radius, &mut rng)?;
            Ok(largest_cluster_fraction(
                &users,
                window_radius,
                coop.link_distance(),
            ))
        })
        .collect()
}
