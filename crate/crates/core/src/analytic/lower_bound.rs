//! Lower bound on the mean secrecy rate from characteristic functions
//! alone, without the interference and leakage densities.
//!
//! Dropping the `{·}⁺` inside the expectation gives
//!
//! ```text
//! R_LB(y) = [E ln(Î + c + A) − E ln(Î + c) − E ln(L̂ + c)] / ln 2 − log2 ρ,
//! c = χy^{−η} + 1/ρ,   A = αy^{−η},
//! ```
//!
//! and each `E ln(X + c)` is a Parseval pairing of `ln|x|`'s Fourier
//! transform with `E[e^{i2πφX}] = L_X(−i2πφ)`. Splitting the frequency axis
//! at `φ₀`:
//!
//! ```text
//! E ln(X + c) = −γ − ln(2πφ₀) + ∫_0^{φ₀} Re[1 − e^{i2πφc} L_X(−i2πφ)] dφ/φ
//!                              − Re ∫_{φ₀}^∞ e^{i2πφc} L_X(−i2πφ) dφ/φ.
//! ```
//!
//! The first integrand is bounded at `φ = 0`; the `γ` term is the
//! contribution of the point mass at the origin of the transform of
//! `ln|x|`. The oscillatory tail is rotated onto the ray `φ₀ + iv`, where
//! the integrand decays like `e^{−2πvc}`.

use std::cell::Cell;
use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use super::laplace::{c_expm1, ShotNoise};
use super::moments::{interference_moments, leakage_moments};
use super::quadrature::{integrate, integrate_to_infinity, QuadConfig};
use super::theorems::DistanceAverage;
use super::{AnalyticConfig, AnalyticError};
use crate::params::SystemParams;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Runs a quadrature whose integrand may fail, surfacing the first failure.
fn guarded<T, F>(
    run: impl FnOnce(&mut dyn FnMut(f64) -> T) -> Result<T, AnalyticError>,
    mut f: F,
    zero: T,
) -> Result<T, AnalyticError>
where
    T: Copy,
    F: FnMut(f64) -> Result<T, AnalyticError>,
{
    let failure = Cell::new(None);
    let mut wrapped = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            zero
        }
    };
    let value = run(&mut wrapped)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

fn near_and_tail<E>(
    shift: f64,
    extra: Option<f64>,
    phi0: f64,
    exponent: &E,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError>
where
    E: Fn(Complex64) -> Result<Complex64, AnalyticError>,
{
    let zero = Complex64::new(0.0, 0.0);
    let near = guarded(
        |f| Ok(integrate(f, 0.0, phi0, cfg)?.value),
        |phi: f64| {
            let theta = 2.0 * PI * phi;
            let psi = exponent(Complex64::new(0.0, -theta))?;
            let v = match extra {
                // 1 − e^{iθc − ψ}
                None => -c_expm1(I * (theta * shift) - psi),
                // −e^{iθc − ψ}(e^{iθA} − 1)
                Some(a) => -(I * (theta * shift) - psi).exp() * c_expm1(I * (theta * a)),
            };
            Ok(v.re / phi)
        },
        0.0,
    )?;
    let tail = guarded(
        |f| Ok(integrate_to_infinity(f, 0.0, cfg)?.value),
        |v: f64| {
            let w = Complex64::new(phi0, v);
            let theta = w * (2.0 * PI);
            let h = (I * theta * shift - exponent(-I * theta)?).exp();
            let h = match extra {
                None => h,
                Some(a) => h * c_expm1(I * theta * a),
            };
            Ok(h / w)
        },
        zero,
    )?;
    Ok(near + tail.im)
}

/// `E ln(X + c)` for `X ≥ 0` with characteristic exponent `ψ`
/// (`E e^{−sX} = e^{−ψ(s)}`, `Re s ≥ 0`). `scale` is a typical size of
/// `X + c`, used to place the frequency split.
pub fn expected_log_shift<E>(
    shift: f64,
    scale: f64,
    exponent: E,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError>
where
    E: Fn(Complex64) -> Result<Complex64, AnalyticError>,
{
    if !(shift > 0.0) {
        return Err(AnalyticError::Domain(format!(
            "log shift must be positive (got {shift})"
        )));
    }
    let phi0 = 1.0 / (2.0 * PI * scale.max(shift));
    Ok(-EULER_GAMMA - (2.0 * PI * phi0).ln() + near_and_tail(shift, None, phi0, &exponent, cfg)?)
}

/// `E ln((X + c + a)/(X + c))`, same conventions as [`expected_log_shift`].
pub fn expected_log_ratio<E>(
    shift: f64,
    extra: f64,
    scale: f64,
    exponent: E,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError>
where
    E: Fn(Complex64) -> Result<Complex64, AnalyticError>,
{
    if !(shift > 0.0) || !(extra >= 0.0) {
        return Err(AnalyticError::Domain(format!(
            "log ratio needs a positive shift and non-negative offset (got {shift}, {extra})"
        )));
    }
    if extra == 0.0 {
        return Ok(0.0);
    }
    let phi0 = 1.0 / (2.0 * PI * scale.max(shift + extra));
    near_and_tail(shift, Some(extra), phi0, &exponent, cfg)
}

/// Real-axis oracle: `E ln(X + c) = ln c + ∫_0^∞ e^{−ct}(1 − e^{−ψ(t)}) dt/t`.
pub fn expected_log_shift_frullani<E>(shift: f64, exponent: E, cfg: &QuadConfig) -> Result<f64, AnalyticError>
where
    E: Fn(f64) -> Result<f64, AnalyticError>,
{
    let body = guarded(
        |f| Ok(integrate_to_infinity(f, 0.0, cfg)?.value),
        |t: f64| {
            if t == 0.0 {
                return Ok(0.0);
            }
            Ok((-shift * t).exp() * -(-exponent(t)?).exp_m1() / t)
        },
        0.0,
    )?;
    Ok(shift.ln() + body)
}

/// Rate lower bound (bits, unclamped) at tagged distance `y` for arbitrary
/// interference and leakage exponents with the given means.
#[allow(clippy::too_many_arguments)]
pub fn rate_lower_bound_given_distance<EI, EL>(
    y: f64,
    alpha: f64,
    chi: f64,
    params: &SystemParams,
    interference: EI,
    interference_mean: f64,
    leakage: EL,
    leakage_mean: f64,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError>
where
    EI: Fn(Complex64) -> Result<Complex64, AnalyticError>,
    EL: Fn(Complex64) -> Result<Complex64, AnalyticError>,
{
    let rho = params.snr;
    let py = y.powf(-params.path_loss_exp);
    let c = chi * py + 1.0 / rho;
    let a = alpha * py;
    let gain = expected_log_ratio(c, a, c + a + interference_mean, interference, cfg)?;
    let loss = expected_log_shift(c, c + leakage_mean, leakage, cfg)?;
    Ok((gain - loss - rho.ln()) / LN_2)
}

/// Lower bound on the mean approximate secrecy rate, in bits.
pub fn mean_rate_lower_bound(params: &SystemParams, cfg: &AnalyticConfig) -> Result<f64, AnalyticError> {
    let avg = DistanceAverage::new(params, cfg)?;
    let leak = ShotNoise::leakage(params)?;
    let leak_mean = leakage_moments(params)?.mean;
    let total = avg.integrate(0.0, |y| {
        let interf = ShotNoise::interference(y, params)?;
        rate_lower_bound_given_distance(
            y,
            avg.det.alpha,
            avg.det.chi,
            params,
            |s| interf.exponent_quadrature(s, &cfg.pgfl),
            interference_moments(y, params)?.mean,
            |s| leak.exponent_quadrature(s, &cfg.pgfl),
            leak_mean,
            &cfg.inner,
        )
    })?;
    Ok(total.max(0.0))
}
