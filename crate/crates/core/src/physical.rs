//! Rayleigh channels, RCI precoding, per-scene SINRs and secrecy rates.
//!
//! Signals are never modulated: every SINR is assembled directly from
//! channel–precoder inner products. With unit noise, the transmit power of
//! every BS equals the SNR `ρ`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::DeterministicEquivalents;
use crate::geometry::{path_gain_sq, NetworkRealization};
use crate::params::SystemParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicalError {
    #[error("regularized Gram matrix is not positive definite (condition number {condition:.3e})")]
    Numerical { condition: f64 },
    #[error("invalid precoder input: {0}")]
    InvalidInput(String),
    #[error("missing channel data: {0}")]
    Contract(String),
}

/// `K_b × N` downlink channel of one cell; row `j` is `h_{b,j}^†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
}

/// Circularly-symmetric `CN(0, 1)` draw.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

impl ChannelMatrix {
    pub fn sample<R: Rng + ?Sized>(n_users: usize, n_antennas: usize, rng: &mut R) -> Self {
        Self {
            entries: DMatrix::from_fn(n_users, n_antennas, |_, _| sample_cn(rng)),
        }
    }

    pub fn n_users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.entries.ncols()
    }
}

/// `N × K_b` RCI precoder with unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderResult {
    pub matrix: DMatrix<Complex64>,
    /// `ζ_b`, the squared Frobenius norm of the unnormalized precoder.
    pub normalization: f64,
}

/// Which side of the matrix-inversion lemma to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderForm {
    /// The smaller of the two.
    #[default]
    Auto,
    /// `H^†(HH^† + NξI)^{-1}` with a `K × K` inverse.
    UserSide,
    /// `(H^†H + NξI)^{-1}H^†` with an `N × N` inverse.
    AntennaSide,
}

fn regularized_inverse(gram: DMatrix<Complex64>) -> Result<DMatrix<Complex64>, PhysicalError> {
    match Cholesky::new(gram.clone()) {
        Some(ch) => Ok(ch.inverse()),
        None => {
            let eig = SymmetricEigen::new(gram).eigenvalues;
            let max = eig.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.abs()));
            let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            Err(PhysicalError::Numerical { condition: max / min })
        }
    }
}

pub fn rci_precoder(channel: &ChannelMatrix, regularizer: f64) -> Result<PrecoderResult, PhysicalError> {
    rci_precoder_with(channel, regularizer, PrecoderForm::Auto)
}

pub fn rci_precoder_with(
    channel: &ChannelMatrix,
    regularizer: f64,
    form: PrecoderForm,
) -> Result<PrecoderResult, PhysicalError> {
    if !(regularizer > 0.0 && regularizer.is_finite()) {
        return Err(PhysicalError::InvalidInput(format!(
            "regularizer must be positive (got {regularizer})"
        )));
    }
    let (k, n) = channel.entries.shape();
    if k == 0 || n == 0 {
        return Err(PhysicalError::InvalidInput(format!("empty {k}x{n} channel")));
    }
    let h = &channel.entries;
    let h_adj = h.adjoint();
    let shift = Complex64::new(n as f64 * regularizer, 0.0);
    let user_side = match form {
        PrecoderForm::Auto => k <= n,
        PrecoderForm::UserSide => true,
        PrecoderForm::AntennaSide => false,
    };
    let raw = if user_side {
        let mut gram = h * &h_adj;
        for i in 0..k {
            gram[(i, i)] += shift;
        }
        &h_adj * regularized_inverse(gram)?
    } else {
        let mut gram = &h_adj * h;
        for i in 0..n {
            gram[(i, i)] += shift;
        }
        regularized_inverse(gram)? * &h_adj
    };
    let zeta = raw.norm_squared();
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(PhysicalError::Numerical {
            condition: f64::INFINITY,
        });
    }
    Ok(PrecoderResult {
        matrix: raw / Complex64::new(zeta.sqrt(), 0.0),
        normalization: zeta,
    })
}

/// `K_b Σ_j |h^† w_{b,j}|²` for a victim channel `h` outside cell `b`.
pub fn interference_gain(precoder: &PrecoderResult, victim: &DVector<Complex64>) -> f64 {
    let k = precoder.matrix.ncols() as f64;
    k * (precoder.matrix.adjoint() * victim).norm_squared()
}

/// How the gains of BS–victim pairs outside the tagged cell are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPolicy {
    /// Interfering BSs within this distance of the origin get explicit
    /// channels and precoders; farther ones draw `g_{b,o} ~ Γ(K_b, 1)`.
    pub explicit_radius: f64,
    /// Draw explicit channel vectors for every external eavesdropper instead
    /// of the exact conditional law `g_{c,e} = K_c‖w_{c,o}‖²·Exp(1)`.
    pub explicit_eavesdroppers: bool,
}

impl ChannelPolicy {
    /// Explicit interferer channels within `cells` mean cell radii.
    pub fn within_cells(params: &SystemParams, cells: f64) -> Self {
        Self {
            explicit_radius: cells * params.cell_radius,
            explicit_eavesdroppers: false,
        }
    }
}

/// Channel data of one fading draw over a realization.
#[derive(Debug, Clone)]
pub struct SceneChannels {
    /// Tagged-cell channel; row 0 belongs to the typical user, the other rows
    /// follow `NetworkRealization::tagged_cell`.
    pub tagged: ChannelMatrix,
    pub tagged_precoder: PrecoderResult,
    /// `g_{b,o}`, in the order of `NetworkRealization::interferers`.
    pub interferer_gains: Vec<f64>,
    /// `g_{c,e}`, in the order of `NetworkRealization::external`.
    pub eavesdropper_gains: Vec<f64>,
}

pub fn sample_scene_channels<R: Rng + ?Sized>(
    real: &NetworkRealization,
    params: &SystemParams,
    policy: &ChannelPolicy,
    rng: &mut R,
) -> Result<SceneChannels, PhysicalError> {
    let n = params.n_antennas;
    let tagged = ChannelMatrix::sample(real.tagged_cell.len(), n, rng);
    let tagged_precoder = rci_precoder(&tagged, params.regularizer)?;

    let mut interferer_gains = Vec::new();
    for b in real.interferers() {
        let kb = real.cell_loads[b];
        let g = if real.bs_points[b].norm() <= policy.explicit_radius {
            let hb = ChannelMatrix::sample(kb, n, rng);
            let wb = rci_precoder(&hb, params.regularizer)?;
            let victim = DVector::from_fn(n, |_, _| sample_cn(rng));
            interference_gain(&wb, &victim)
        } else {
            Gamma::new(kb as f64, 1.0).expect("positive shape").sample(rng)
        };
        interferer_gains.push(g);
    }

    let kc = real.tagged_cell.len() as f64;
    let w_o = tagged_precoder.matrix.column(0);
    let eavesdropper_gains = if policy.explicit_eavesdroppers {
        real.external
            .iter()
            .map(|_| {
                let h = DVector::from_fn(n, |_, _| sample_cn(rng));
                kc * h.dotc(&w_o).norm_sqr()
            })
            .collect()
    } else {
        let scale = kc * w_o.norm_squared();
        real.external
            .iter()
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                scale * e
            })
            .collect()
    };
    Ok(SceneChannels {
        tagged,
        tagged_precoder,
        interferer_gains,
        eavesdropper_gains,
    })
}

/// SINRs of the typical user and of the cooperating eavesdroppers, with
/// the terms they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub legit_sinr: f64,
    pub eav_sinr: f64,
    /// `|h_{c,o}^† w_{c,o}|²`.
    pub signal_gain: f64,
    /// `Σ_{u≠o} |h_{c,o}^† w_{c,u}|²`.
    pub intra_interference: f64,
    /// `I = Σ_{b≠c} (g_{b,o}/K_b) ‖b‖^{−η}`.
    pub inter_interference: f64,
    /// `Σ_i |h_{c,i}^† w_{c,o}|²` over the other users of the tagged cell.
    pub intra_leakage: f64,
    /// `Σ_i ‖i−c‖^{−η} |h_{c,i}^† w_{c,o}|²`.
    pub intra_leakage_weighted: f64,
    /// `L = Σ_e (g_{c,e}/K_c) ‖e−c‖^{−η}`.
    pub ext_leakage: f64,
    pub tagged_distance: f64,
}

pub fn compute_sinrs(
    real: &NetworkRealization,
    channels: &SceneChannels,
    params: &SystemParams,
) -> Result<SinrBreakdown, PhysicalError> {
    let kc = real.tagged_cell.len();
    let (rows, cols) = channels.tagged.entries.shape();
    if rows != kc || cols != params.n_antennas || channels.tagged_precoder.matrix.shape() != (cols, kc) {
        return Err(PhysicalError::Contract(format!(
            "tagged cell has {kc} users but channel is {rows}x{cols}"
        )));
    }
    let interferers: Vec<usize> = real.interferers().collect();
    if interferers.len() != channels.interferer_gains.len() {
        return Err(PhysicalError::Contract(format!(
            "{} interfering BSs but {} gains",
            interferers.len(),
            channels.interferer_gains.len()
        )));
    }
    if real.external.len() != channels.eavesdropper_gains.len() {
        return Err(PhysicalError::Contract(format!(
            "{} external eavesdroppers but {} gains",
            real.external.len(),
            channels.eavesdropper_gains.len()
        )));
    }
    let eta = params.path_loss_exp;
    let c = real.tagged_bs();
    // (H W)_{ij} = h_i^† w_j
    let prod = &channels.tagged.entries * &channels.tagged_precoder.matrix;
    let signal_gain = prod[(0, 0)].norm_sqr();
    let intra_interference: f64 = (1..kc).map(|u| prod[(0, u)].norm_sqr()).sum();
    let mut intra_leakage = 0.0;
    let mut intra_leakage_weighted = 0.0;
    for (row, &i) in real.tagged_cell.iter().enumerate().skip(1) {
        let g = prod[(row, 0)].norm_sqr();
        intra_leakage += g;
        intra_leakage_weighted += g * path_gain_sq(real.user_points[i].dist_sq(&c), eta);
    }
    let inter_interference: f64 = interferers
        .iter()
        .zip(&channels.interferer_gains)
        .map(|(&b, g)| g / real.cell_loads[b] as f64 * path_gain_sq(real.bs_points[b].norm_sq(), eta))
        .sum();
    let ext_leakage: f64 = real
        .external
        .iter()
        .zip(&channels.eavesdropper_gains)
        .map(|(&e, g)| g * path_gain_sq(real.user_points[e].dist_sq(&c), eta))
        .sum::<f64>()
        / kc as f64;

    let rho = params.snr;
    let py = path_gain_sq(real.tagged_distance * real.tagged_distance, eta);
    Ok(SinrBreakdown {
        legit_sinr: rho * py * signal_gain / (rho * py * intra_interference + rho * inter_interference + 1.0),
        eav_sinr: rho * (intra_leakage_weighted + ext_leakage),
        signal_gain,
        intra_interference,
        inter_interference,
        intra_leakage,
        intra_leakage_weighted,
        ext_leakage,
        tagged_distance: real.tagged_distance,
    })
}

/// `{log2(1 + γ_o) − log2(1 + γ_M)}⁺`.
pub fn secrecy_rate(sinrs: &SinrBreakdown) -> f64 {
    secrecy_rate_from_sinrs(sinrs.legit_sinr, sinrs.eav_sinr)
}

pub fn secrecy_rate_from_sinrs(legit: f64, eav: f64) -> f64 {
    ((legit.ln_1p() - eav.ln_1p()) / std::f64::consts::LN_2).max(0.0)
}

/// Secrecy rate written out directly in the channel terms, without forming
/// the SINRs first.
pub fn secrecy_rate_from_terms(sinrs: &SinrBreakdown, params: &SystemParams) -> f64 {
    let rho = params.snr;
    let py = sinrs.tagged_distance.powf(-params.path_loss_exp);
    let num =
        rho * py * (sinrs.signal_gain + sinrs.intra_interference) + rho * sinrs.inter_interference + 1.0;
    let den = rho * py * sinrs.intra_interference + rho * sinrs.inter_interference + 1.0;
    let eav = 1.0 + rho * sinrs.intra_leakage_weighted + rho * sinrs.ext_leakage;
    ((num / den).log2() - eav.log2()).max(0.0)
}

/// Large-system approximation of the secrecy rate for a tagged distance,
/// interference `Î` and leakage `L̂`.
pub fn approx_secrecy_rate(
    tagged_distance: f64,
    interference: f64,
    leakage: f64,
    det: &DeterministicEquivalents,
    params: &SystemParams,
) -> f64 {
    let rho = params.snr;
    let py = path_gain_sq(tagged_distance * tagged_distance, params.path_loss_exp);
    let legit = rho * det.alpha * py / (rho * det.chi * py + rho * interference + 1.0);
    let eav = rho * det.chi * py + rho * leakage;
    secrecy_rate_from_sinrs(legit, eav)
}
