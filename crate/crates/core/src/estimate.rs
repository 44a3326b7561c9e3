//! Estimators computed from an observed series, and the chi-square test of
//! `α = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::psi0_closed_form;
use crate::error::{RcarError, Result};
use crate::model::NoiseFamily;
use crate::numerics::{chisq1_tail, SmallMatrix};
use crate::simulate::Trajectory;

/// Distance to `1 - 2x² = 0` treated as the pathological boundary.
pub const PATHOLOGICAL_TOLERANCE: f64 = 1e-9;
pub const MIN_TEST_LENGTH: usize = 50;

/// `X̄ₙ = (1/n) Σ_{t=1}^n X_t`.
pub fn sample_mean(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(RcarError::Degenerate("need n ≥ 1".into()));
    }
    let tail = &x[1..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn lag_ratio(x: &[f64], lag: usize, what: &str) -> Result<f64> {
    if x.len() <= lag {
        return Err(RcarError::Degenerate(format!(
            "{what} needs at least {} values",
            lag + 1
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for t in lag..x.len() {
        num += x[t - lag] * x[t];
        den += x[t - lag] * x[t - lag];
    }
    if den == 0.0 {
        return Err(RcarError::Degenerate(format!(
            "{what}: the lagged window is identically zero"
        )));
    }
    Ok(num / den)
}

/// `θ̂ₙ = Σ_{t=1}^n X_{t-1} X_t / Σ_{t=1}^n X²_{t-1}`.
pub fn theta_hat(x: &[f64]) -> Result<f64> {
    lag_ratio(x, 1, "θ̂")
}

/// `ϑ̂ₙ = Σ_{t=2}^n X_{t-2} X_t / Σ_{t=2}^n X²_{t-2}`.
pub fn vartheta_hat(x: &[f64]) -> Result<f64> {
    lag_ratio(x, 2, "ϑ̂")
}

fn check_boundary(x: f64) -> Result<f64> {
    let d = 1.0 - 2.0 * x * x;
    if d.abs() < PATHOLOGICAL_TOLERANCE {
        return Err(RcarError::Pathological(format!(
            "x = {x} is at ±1/√2, where the Yule-Walker correction is undefined"
        )));
    }
    Ok(d)
}

/// `f(x, y) = ((1 - 2y) x / (1 - 2x²), (y - x²) / (1 - 2x²))`, which maps
/// `(θ*, ϑ*)` to `(θ, ατ₂)`.
pub fn f_map(x: f64, y: f64) -> Result<(f64, f64)> {
    let d = check_boundary(x)?;
    Ok(((1.0 - 2.0 * y) * x / d, (y - x * x) / d))
}

/// Jacobian of [`f_map`]; row `i` holds the partial derivatives of the
/// `i`-th component with respect to `(x, y)`.
pub fn f_jacobian(x: f64, y: f64) -> Result<SmallMatrix> {
    let d = check_boundary(x)?;
    let d2 = d * d;
    SmallMatrix::from_rows(&[
        [(1.0 - 2.0 * y) * (1.0 + 2.0 * x * x) / d2, -2.0 * x / d],
        [-2.0 * x * (1.0 - 2.0 * y) / d2, 1.0 / d],
    ])
}

/// `ε̂_t = X_t - θ X_{t-1}` for `t = 1..n` and `σ̂₂ = (1/n) Σ ε̂_t²`.
pub fn residual_variance(x: &[f64], theta_used: f64) -> Result<(f64, Vec<f64>)> {
    if x.len() < 3 {
        return Err(RcarError::Degenerate(
            "residual variance needs n ≥ 2".into(),
        ));
    }
    let residuals: Vec<f64> = x.windows(2).map(|w| w[1] - theta_used * w[0]).collect();
    let s2 = residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64;
    Ok((s2, residuals))
}

/// Regression of `ε̂_t²` on `Z_t = X²_{t-1}`: returns `(τ̄₂, σ̄₂)` with
/// `σ̄₂ = σ̂₂ - Z̄ₙ τ̄₂`.
pub fn nicholls_quinn(x: &[f64], residuals: &[f64]) -> Result<(f64, f64)> {
    let n = residuals.len();
    if n == 0 || x.len() != n + 1 {
        return Err(RcarError::Degenerate(format!(
            "need one residual per transition (got {n} residuals for {} values)",
            x.len()
        )));
    }
    let nf = n as f64;
    let z = |t: usize| x[t] * x[t];
    let zbar = (0..n).map(z).sum::<f64>() / nf;
    let e2bar = residuals.iter().map(|e| e * e).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, e) in residuals.iter().enumerate() {
        let dz = z(t) - zbar;
        sxy += dz * (e * e - e2bar);
        sxx += dz * dz;
    }
    if sxx <= f64::EPSILON * zbar * zbar * nf {
        return Err(RcarError::Degenerate(
            "X²_{t-1} is constant; τ̄₂ is undefined".into(),
        ));
    }
    let tau2 = sxy / sxx;
    Ok((tau2, e2bar - zbar * tau2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaSource {
    Hat,
    #[default]
    Tilde,
}

impl FromStr for ThetaSource {
    type Err = RcarError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(ThetaSource::Hat),
            "tilde" => Ok(ThetaSource::Tilde),
            _ => Err(RcarError::Config(format!(
                "theta source must be 'hat' or 'tilde', got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for ThetaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThetaSource::Hat => "hat",
            ThetaSource::Tilde => "tilde",
        })
    }
}

/// Settings of the correlation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOptions {
    pub level: f64,
    pub source: ThetaSource,
    /// Family whose kurtosis maps `σ̄₂` to `σ̄₄`.
    pub eps_family: NoiseFamily,
    /// Family whose kurtosis maps `τ̄₂` to `τ̄₄`.
    pub eta_family: NoiseFamily,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            level: 0.05,
            source: ThetaSource::Tilde,
            eps_family: NoiseFamily::Gaussian,
            eta_family: NoiseFamily::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub n: usize,
    pub xbar: f64,
    pub theta_hat: f64,
    pub vartheta_hat: f64,
    pub theta_tilde: f64,
    pub gamma_tilde: f64,
    pub sigma2_hat: f64,
    pub tau2_bar: f64,
    pub sigma2_bar: f64,
    pub sigma4_bar: f64,
    pub tau4_bar: f64,
    pub psi0_hat: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub theta_hat_source: ThetaSource,
}

/// Runs every estimator and the test of `H₀: α = 0` at the given level.
///
/// The plug-in `ψ̂⁰ = ψ⁰(θ̄ₙ, τ̄₂, τ̄₄, σ̄₂, σ̄₄)` uses `θ̄ₙ = θ̃ₙ` or `θ̂ₙ` and
/// the fourth moments `k σ̄₂²`, `k' τ̄₂²` of the declared families. A
/// non-positive `ψ̂⁰` is reported as an error.
pub fn correlation_test(traj: &Trajectory, opts: &TestOptions) -> Result<EstimationReport> {
    if !(opts.level > 0.0 && opts.level <= 1.0) {
        return Err(RcarError::Config(format!(
            "level must lie in (0, 1], got {}",
            opts.level
        )));
    }
    let x = traj.values();
    let n = traj.n();
    if n < MIN_TEST_LENGTH {
        return Err(RcarError::Degenerate(format!(
            "the test needs n ≥ {MIN_TEST_LENGTH}, got {n}"
        )));
    }
    let xbar = sample_mean(x)?;
    let th = theta_hat(x)?;
    let vt = vartheta_hat(x)?;
    let (theta_tilde, gamma_tilde) = f_map(th, vt)?;
    let (sigma2_hat, residuals) = residual_variance(x, th)?;
    let (tau2_bar, sigma2_bar) = nicholls_quinn(x, &residuals)?;
    let sigma4_bar = opts.eps_family.kurtosis() * sigma2_bar * sigma2_bar;
    let tau4_bar = opts.eta_family.kurtosis() * tau2_bar * tau2_bar;
    let theta_bar = match opts.source {
        ThetaSource::Hat => th,
        ThetaSource::Tilde => theta_tilde,
    };
    let (psi0_hat, _) = psi0_closed_form(theta_bar, tau2_bar, tau4_bar, sigma2_bar, sigma4_bar)
        .map_err(|e| match e {
            RcarError::Pathological(m) => RcarError::Pathological(m),
            other => RcarError::Degenerate(format!("invalid plug-in ψ̂⁰: {other}")),
        })?;
    if psi0_hat.is_nan() || psi0_hat <= 0.0 {
        return Err(RcarError::Degenerate(format!(
            "invalid plug-in: ψ̂⁰ = {psi0_hat} is not positive (τ̄₂ = {tau2_bar}, σ̄₂ = {sigma2_bar})"
        )));
    }
    let statistic = n as f64 * gamma_tilde * gamma_tilde / psi0_hat;
    let p_value = chisq1_tail(statistic)?;
    Ok(EstimationReport {
        n,
        xbar,
        theta_hat: th,
        vartheta_hat: vt,
        theta_tilde,
        gamma_tilde,
        sigma2_hat,
        tau2_bar,
        sigma2_bar,
        sigma4_bar,
        tau4_bar,
        psi0_hat,
        statistic,
        p_value,
        level: opts.level,
        reject: p_value < opts.level,
        theta_hat_source: opts.source,
    })
}
