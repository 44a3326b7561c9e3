use rcar_core::estimate::{f_map, residual_variance, theta_hat, vartheta_hat};
use rcar_core::simulate::{replicate_seed, simulate, DEFAULT_BURN_IN};
use rcar_core::{ModelParams, NoiseSpec};

fn ar1(theta: f64) -> ModelParams {
    ModelParams::new(theta, 0.0, NoiseSpec::gaussian(1.0).unwrap(), None).unwrap()
}

#[test]
fn ratio_estimators_are_scale_free() {
    let params = ModelParams::new(
        0.3,
        0.5,
        NoiseSpec::gaussian(1.0).unwrap(),
        Some(NoiseSpec::gaussian(0.1).unwrap()),
    )
    .unwrap();
    let x = simulate(&params, 2000, 9, DEFAULT_BURN_IN).unwrap().x;
    let (th, vt) = (theta_hat(&x).unwrap(), vartheta_hat(&x).unwrap());
    let (s2, _) = residual_variance(&x, th).unwrap();
    for c in [-3.0, 0.25, 8.0] {
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        assert!((theta_hat(&y).unwrap() - th).abs() < 1e-12);
        assert!((vartheta_hat(&y).unwrap() - vt).abs() < 1e-12);
        let (s2c, _) = residual_variance(&y, th).unwrap();
        assert!((s2c / (c * c) - s2).abs() < 1e-10 * s2);
    }
    let report = rcar_core::estimate::correlation_test(
        &rcar_core::Trajectory::from_values(x).unwrap(),
        &rcar_core::TestOptions::default(),
    )
    .unwrap();
    assert_eq!(
        (report.theta_tilde, report.gamma_tilde),
        f_map(th, vt).unwrap()
    );
}

#[test]
fn fixed_coefficient_estimates_are_consistent() {
    let (theta, n, reps) = (0.5, 2000, 1000);
    let band = 4.0 * ((1.0 - theta * theta) / n as f64).sqrt();
    let inside = (0..reps)
        .filter(|&r| {
            let x = simulate(&ar1(theta), n, replicate_seed(77, r), DEFAULT_BURN_IN)
                .unwrap()
                .x;
            (theta_hat(&x).unwrap() - theta).abs() < band
        })
        .count();
    assert!(inside as f64 >= 0.95 * reps as f64, "{inside} of {reps}");
}

#[test]
fn replicate_streams_are_uncorrelated() {
    let n = 20_000;
    let a = simulate(&ar1(0.3), n, replicate_seed(5, 0), DEFAULT_BURN_IN)
        .unwrap()
        .x;
    let b = simulate(&ar1(0.3), n, replicate_seed(5, 1), DEFAULT_BURN_IN)
        .unwrap()
        .x;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    assert!((cov / (va * vb).sqrt()).abs() < 4.0 / (n as f64).sqrt());
}
