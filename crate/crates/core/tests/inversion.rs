//! Exact law of the interference by Fourier inversion of its
//! characteristic function, against sampling and the lognormal fit.

use std::f64::consts::PI;

use cellsec_core::analytic::quadrature::integrate_to_infinity;
use cellsec_core::analytic::{lognormal_fit, QuadConfig, ShotNoise};
use cellsec_core::montecarlo::{collect_interference_leakage, DistanceCondition, SamplingOptions};
use cellsec_core::{derive_params, RawConfig};
use num_complex::Complex64;

/// `F(x) = 1/2 − (1/π) ∫_0^∞ Im[e^{−itx} φ(t)]/t dt`.
fn gil_pelaez_cdf(sn: &ShotNoise, x: f64, cfg: &QuadConfig) -> f64 {
    let body = integrate_to_infinity(
        |t: f64| {
            if t == 0.0 {
                return 0.0;
            }
            let phi = (-sn.exponent_quadrature(Complex64::new(0.0, -t), cfg).unwrap()).exp();
            (Complex64::new(0.0, -t * x).exp() * phi).im / t
        },
        0.0,
        cfg,
    )
    .unwrap();
    0.5 - body.value / PI
}

#[test]
fn sampled_interference_follows_the_inverted_law() {
    let p = derive_params(&RawConfig {
        n_antennas: 20,
        users_per_cell: Some(20.0),
        load_ratio: None,
        snr_db: Some(10.0),
        snr_linear: None,
        path_loss_exp: 4.0,
        bs_density: 0.1,
        regularizer: None,
        user_density: None,
        round_users: false,
    })
    .unwrap();
    let sn = ShotNoise::interference(p.cell_radius, &p).unwrap();
    let fit = lognormal_fit(&sn.moments().unwrap()).unwrap();
    let cfg = QuadConfig::with_tolerances(1e-10, 1e-8);
    let opts = SamplingOptions {
        compensate_tail: true,
        ..SamplingOptions::default()
    };
    let n = 20_000;
    let (i, _) = collect_interference_leakage(&p, n, DistanceCondition::CellRadius, &opts, 77).unwrap();
    let sorted = i.sorted();
    let (mut mc_gap, mut fit_gap): (f64, f64) = (0.0, 0.0);
    for k in 1..30 {
        let x = fit.quantile_point(-3.0 + 6.0 * k as f64 / 30.0);
        let exact = gil_pelaez_cdf(&sn, x, &cfg);
        let emp = sorted.partition_point(|&v| v <= x) as f64 / n as f64;
        mc_gap = mc_gap.max((exact - emp).abs());
        fit_gap = fit_gap.max((exact - fit.cdf(x)).abs());
    }
    // 1% critical value of the KS statistic at n = 20000 is ≈ 0.0115
    assert!(mc_gap < 0.0115, "sampling vs exact: {mc_gap}");
    // the lognormal fit of the cell-edge interference is off by about 5%
    assert!(
        fit_gap > 0.045 && fit_gap < 0.065,
        "lognormal vs exact: {fit_gap}"
    );
}
