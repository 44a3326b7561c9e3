//! Process parameters, noise families and their moments, and the check of
//! the working hypotheses.
//!
//! The process is `X_t = θ_t X_{t-1} + ε_t` with `θ_t = θ + α η_{t-1} + η_t`,
//! where `(ε_t)` and `(η_t)` are independent symmetric white noises. Every
//! moment-based computation in the crate depends on the noises only through
//! their even moments, gathered in [`ProcessMoments`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RcarError, Result};
use crate::numerics::spectral_radius;
use crate::{asymptotics, fourth_order, second_order};

/// `|1 - 2ατ₂|` below this is treated as the deterministic case `2ατ₂ = 1`.
pub const DEGENERATE_GAMMA_TOLERANCE: f64 = 1e-9;
/// Distance to `√2 θ = ±(1 - 2ατ₂)` flagged as pathological.
pub const SQRT2_BOUNDARY_TOLERANCE: f64 = 1e-9;
/// `|ψ⁰₀|` below this is flagged as pathological.
pub const PSI00_TOLERANCE: f64 = 1e-8;
pub const MIN_LOG_MOMENT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    /// Centred normal; the scale is the variance.
    Gaussian,
    /// Uniform on `[-c, c]`; the scale is the half-width `c`.
    Uniform,
    /// Density `exp(-|x|/b) / 2b`; the scale is `b`.
    Laplace,
    /// `±s` with probability 1/2 each; the scale is `s`.
    Rademacher,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 4] = [
        NoiseFamily::Gaussian,
        NoiseFamily::Uniform,
        NoiseFamily::Laplace,
        NoiseFamily::Rademacher,
    ];

    /// Ratio `m4 / m2²`, i.e. the map `m4 = k · m2²` linking the fourth
    /// moment to the variance within the family.
    pub fn kurtosis(self) -> f64 {
        match self {
            NoiseFamily::Gaussian => 3.0,
            NoiseFamily::Uniform => 9.0 / 5.0,
            NoiseFamily::Laplace => 6.0,
            NoiseFamily::Rademacher => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Uniform => "uniform",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Rademacher => "rademacher",
        }
    }
}

impl FromStr for NoiseFamily {
    type Err = RcarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "uniform" => Ok(NoiseFamily::Uniform),
            "laplace" => Ok(NoiseFamily::Laplace),
            "rademacher" => Ok(NoiseFamily::Rademacher),
            other => Err(RcarError::Config(format!(
                "unsupported noise family '{other}' (expected gaussian, uniform, laplace or rademacher)"
            ))),
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Even moments `E[Z²], E[Z⁴], E[Z⁶], E[Z⁸]` of a symmetric noise. Odd
/// moments are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
    pub m8: f64,
}

impl MomentSet {
    pub fn new(m2: f64, m4: f64, m6: f64, m8: f64) -> Result<Self> {
        if ![m2, m4, m6, m8].iter().all(|v| v.is_finite()) {
            return Err(RcarError::Config("moments must be finite".into()));
        }
        if m2 <= 0.0 {
            return Err(RcarError::Config(format!(
                "variance must be positive, got {m2}"
            )));
        }
        // Jensen, with a little slack for rounding in user-supplied values.
        if m4 < m2 * m2 * (1.0 - 1e-12) || m6 < 0.0 || m8 < 0.0 {
            return Err(RcarError::Config(format!(
                "inconsistent moments m2={m2}, m4={m4}, m6={m6}, m8={m8}"
            )));
        }
        Ok(Self { m2, m4, m6, m8 })
    }

    /// Moments of the constant zero noise (fixed, non-random coefficient).
    pub const fn zero() -> Self {
        Self {
            m2: 0.0,
            m4: 0.0,
            m6: 0.0,
            m8: 0.0,
        }
    }

    /// `E[Z^k]` for `k ≤ 8`, zero for odd `k`.
    pub fn moment(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            2 => self.m2,
            4 => self.m4,
            6 => self.m6,
            8 => self.m8,
            k if k % 2 == 1 => 0.0,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(RcarError::Config(format!(
                "{family} noise needs a positive finite scale, got {scale}"
            )));
        }
        Ok(Self { family, scale })
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, variance)
    }

    pub fn moments(&self) -> MomentSet {
        let s = self.scale;
        match self.family {
            NoiseFamily::Gaussian => MomentSet {
                m2: s,
                m4: 3.0 * s.powi(2),
                m6: 15.0 * s.powi(3),
                m8: 105.0 * s.powi(4),
            },
            // E[U^{2k}] = c^{2k} / (2k + 1)
            NoiseFamily::Uniform => MomentSet {
                m2: s.powi(2) / 3.0,
                m4: s.powi(4) / 5.0,
                m6: s.powi(6) / 7.0,
                m8: s.powi(8) / 9.0,
            },
            // E[L^{2k}] = (2k)! b^{2k}
            NoiseFamily::Laplace => MomentSet {
                m2: 2.0 * s.powi(2),
                m4: 24.0 * s.powi(4),
                m6: 720.0 * s.powi(6),
                m8: 40320.0 * s.powi(8),
            },
            NoiseFamily::Rademacher => MomentSet {
                m2: s.powi(2),
                m4: s.powi(4),
                m6: s.powi(6),
                m8: s.powi(8),
            },
        }
    }

    /// The spec with the same family whose variance is `variance`.
    pub fn with_variance(family: NoiseFamily, variance: f64) -> Result<Self> {
        let scale = match family {
            NoiseFamily::Gaussian => variance,
            NoiseFamily::Uniform => (3.0 * variance).sqrt(),
            NoiseFamily::Laplace => (variance / 2.0).sqrt(),
            NoiseFamily::Rademacher => variance.sqrt(),
        };
        Self::new(family, scale)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.scale;
        match self.family {
            NoiseFamily::Gaussian => s.sqrt() * rng.sample::<f64, _>(StandardNormal),
            NoiseFamily::Uniform => s * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::Laplace => loop {
                let u = rng.random::<f64>() - 0.5;
                if u > -0.5 {
                    break -s * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                }
            },
            NoiseFamily::Rademacher => {
                if rng.random::<bool>() {
                    s
                } else {
                    -s
                }
            }
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = RcarError;

    /// Parses `family:scale`, e.g. `gaussian:0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, scale) = s
            .split_once(':')
            .ok_or_else(|| RcarError::Config(format!("noise spec '{s}' is not family:scale")))?;
        let scale: f64 = scale
            .trim()
            .parse()
            .map_err(|_| RcarError::Config(format!("bad noise scale in '{s}'")))?;
        Self::new(family.parse()?, scale)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.scale)
    }
}

/// Closed-form even moments of a noise specification.
pub fn noise_moments(spec: &NoiseSpec) -> Result<MomentSet> {
    let m = spec.moments();
    MomentSet::new(m.m2, m.m4, m.m6, m.m8)
}

/// Full parameterization of the process. `eta = None` fixes the coefficient
/// at `θ_t = θ` (the classical AR(1)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub alpha: f64,
    pub eps: NoiseSpec,
    pub eta: Option<NoiseSpec>,
}

impl ModelParams {
    pub fn new(theta: f64, alpha: f64, eps: NoiseSpec, eta: Option<NoiseSpec>) -> Result<Self> {
        if !theta.is_finite() || !alpha.is_finite() {
            return Err(RcarError::Config("theta and alpha must be finite".into()));
        }
        let params = Self {
            theta,
            alpha,
            eps,
            eta,
        };
        // Runs the 2ατ₂ = 1 exclusion.
        params.moments()?;
        Ok(params)
    }

    pub fn is_random_coefficient(&self) -> bool {
        self.eta.is_some()
    }

    pub fn tau(&self) -> MomentSet {
        self.eta.map_or(MomentSet::zero(), |e| e.moments())
    }

    pub fn moments(&self) -> Result<ProcessMoments> {
        ProcessMoments::new(
            self.theta,
            self.alpha,
            noise_moments(&self.eps)?,
            self.tau(),
        )
    }
}

/// The parameters as seen by every moment formula: `θ`, `α` and the even
/// moments `σ_k = E[ε^k]`, `τ_k = E[η^k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessMoments {
    pub theta: f64,
    pub alpha: f64,
    pub sigma: MomentSet,
    pub tau: MomentSet,
}

impl ProcessMoments {
    pub fn new(theta: f64, alpha: f64, sigma: MomentSet, tau: MomentSet) -> Result<Self> {
        if sigma.m2.is_nan() || sigma.m2 <= 0.0 {
            return Err(RcarError::Config("σ₂ must be positive".into()));
        }
        if tau.m2 < 0.0 || tau.m4 < 0.0 {
            return Err(RcarError::Config("τ moments must be non-negative".into()));
        }
        let p = Self {
            theta,
            alpha,
            sigma,
            tau,
        };
        if p.one_minus_two_gamma().abs() < DEGENERATE_GAMMA_TOLERANCE {
            return Err(RcarError::Pathological(format!(
                "2ατ₂ = {} is 1: the process is deterministic",
                2.0 * p.gamma()
            )));
        }
        Ok(p)
    }

    /// `γ = ατ₂`, the lag-one covariance of the coefficient process.
    pub fn gamma(&self) -> f64 {
        self.alpha * self.tau.m2
    }

    pub fn one_minus_two_gamma(&self) -> f64 {
        1.0 - 2.0 * self.gamma()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma.m2
    }

    pub fn sigma4(&self) -> f64 {
        self.sigma.m4
    }

    pub fn tau2(&self) -> f64 {
        self.tau.m2
    }

    pub fn tau4(&self) -> f64 {
        self.tau.m4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The Monte Carlo confidence interval straddles the threshold.
    Inconclusive,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Satisfied
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMomentEstimate {
    /// Monte Carlo mean of `ln|θ + α η₀ + η₁|`.
    pub mean: f64,
    pub std_error: f64,
    /// 95% normal half-width, `1.96 · std_error`.
    pub half_width: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionFlags {
    pub two_alpha_tau2_one: bool,
    pub sqrt2_theta_boundary: bool,
    pub psi00_zero: bool,
}

impl ExclusionFlags {
    pub fn any(&self) -> bool {
        self.two_alpha_tau2_one || self.sqrt2_theta_boundary || self.psi00_zero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub h1: Verdict,
    pub h2: Verdict,
    pub h3: Verdict,
    pub h4: Verdict,
    pub h5: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    #[serde(rename = "rho_M")]
    pub rho_m: f64,
    #[serde(rename = "rho_H")]
    pub rho_h: f64,
    pub log_moment_estimate: LogMomentEstimate,
    pub excluded_degenerate: ExclusionFlags,
    pub verdicts: Verdicts,
    pub warnings: Vec<String>,
}

/// Monte Carlo estimate of `E[ln|θ + α η₀ + η₁|]` from `draws` independent
/// pairs.
pub fn log_moment_estimate(params: &ModelParams, draws: usize, seed: u64) -> LogMomentEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let (e0, e1) = match params.eta {
            Some(eta) => (eta.sample(&mut rng), eta.sample(&mut rng)),
            None => (0.0, 0.0),
        };
        let v = (params.theta + params.alpha * e0 + e1).abs().ln();
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let std_error = (var / n).sqrt();
    LogMomentEstimate {
        mean,
        std_error,
        half_width: 1.96 * std_error,
        draws,
    }
}

/// Evaluates every working hypothesis and the pathological-set flags.
///
/// The condition `E[ln⁺|ε₀|] < ∞` holds for all supported families and is not
/// re-checked. The log-moment condition has no closed form and is estimated by
/// Monte Carlo; an interval straddling zero yields [`Verdict::Inconclusive`].
pub fn check_hypotheses(params: &ModelParams, mc_draws: usize, seed: u64) -> HypothesisReport {
    let mut warnings = Vec::new();
    let draws = if mc_draws < MIN_LOG_MOMENT_DRAWS {
        warnings.push(format!(
            "mc_draws raised from {mc_draws} to the minimum {MIN_LOG_MOMENT_DRAWS}"
        ));
        MIN_LOG_MOMENT_DRAWS
    } else {
        mc_draws
    };

    let sigma = params.eps.moments();
    let tau = params.tau();
    let (theta, alpha) = (params.theta, params.alpha);
    let rho_m = spectral_radius(&second_order::m_matrix(theta, alpha, &tau)).unwrap_or(f64::NAN);
    let rho_h = spectral_radius(&fourth_order::h_matrix(theta, alpha, &tau)).unwrap_or(f64::NAN);

    let log_moment = log_moment_estimate(params, draws, seed);
    let h1 = if log_moment.mean + log_moment.half_width < 0.0 {
        Verdict::Satisfied
    } else if log_moment.mean - log_moment.half_width > 0.0 {
        Verdict::Violated
    } else {
        warnings.push(format!(
            "log-moment estimate {:.4} ± {:.4} straddles 0; strict stationarity is uncertain",
            log_moment.mean, log_moment.half_width
        ));
        Verdict::Inconclusive
    };

    let one_minus_two_gamma = 1.0 - 2.0 * alpha * tau.m2;
    let sqrt2_theta = std::f64::consts::SQRT_2 * theta;
    let psi00 = asymptotics::psi0_numerator(theta, tau.m2, tau.m4, sigma.m2, sigma.m4);
    let flags = ExclusionFlags {
        two_alpha_tau2_one: one_minus_two_gamma.abs() < DEGENERATE_GAMMA_TOLERANCE,
        sqrt2_theta_boundary: (sqrt2_theta - one_minus_two_gamma).abs() < SQRT2_BOUNDARY_TOLERANCE
            || (sqrt2_theta + one_minus_two_gamma).abs() < SQRT2_BOUNDARY_TOLERANCE,
        psi00_zero: psi00.abs() < PSI00_TOLERANCE,
    };

    if !params.is_random_coefficient() {
        warnings.push("η ≡ 0: the coefficient is fixed (τ₂ = 0)".into());
    }

    let verdicts = Verdicts {
        h1,
        // Every supported family is symmetric.
        h2: Verdict::Satisfied,
        h3: Verdict::from_bool(rho_m < 1.0 && tau.m2 > 0.0 && sigma.m2 > 0.0),
        h4: Verdict::from_bool(rho_h < 1.0 && sigma.m4.is_finite() && tau.m8.is_finite()),
        // σ₄ = k σ₂² and τ₄ = k' τ₂² within each family.
        h5: Verdict::Satisfied,
    };

    HypothesisReport {
        rho_m,
        rho_h,
        log_moment_estimate: log_moment,
        excluded_degenerate: flags,
        verdicts,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_params(theta: f64, alpha: f64, tau2: f64) -> ModelParams {
        ModelParams::new(
            theta,
            alpha,
            NoiseSpec::gaussian(1.0).unwrap(),
            Some(NoiseSpec::gaussian(tau2).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_moments() {
        let m = noise_moments(&NoiseSpec::gaussian(0.1).unwrap()).unwrap();
        assert!((m.m4 - 0.03).abs() < 1e-15);
        assert!((m.m6 - 15.0 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn uniform_moments() {
        let m = noise_moments(&NoiseSpec::new(NoiseFamily::Uniform, 1.0).unwrap()).unwrap();
        assert!((m.m2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.m4 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_rejected() {
        for family in NoiseFamily::ALL {
            assert!(NoiseSpec::new(family, 0.0).is_err());
        }
        assert!(MomentSet::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kurtosis_matches_closed_forms() {
        for family in NoiseFamily::ALL {
            let m = NoiseSpec::new(family, 0.7).unwrap().moments();
            assert!(
                (m.m4 / (m.m2 * m.m2) - family.kurtosis()).abs() < 1e-12,
                "{family}"
            );
        }
    }

    #[test]
    fn with_variance_round_trips() {
        for family in NoiseFamily::ALL {
            let spec = NoiseSpec::with_variance(family, 0.37).unwrap();
            assert!((spec.moments().m2 - 0.37).abs() < 1e-14, "{family}");
        }
    }

    #[test]
    fn sample_moments_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in NoiseFamily::ALL {
            let spec = NoiseSpec::new(family, 0.8).unwrap();
            let n = 200_000;
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let z = spec.sample(&mut rng);
                s1 += z;
                s2 += z * z;
                s4 += z.powi(4);
            }
            let m = spec.moments();
            let nf = n as f64;
            let se2 = ((m.m4 - m.m2 * m.m2).max(0.0) / nf).sqrt();
            let se4 = ((m.m8 - m.m4 * m.m4).max(0.0) / nf).sqrt();
            assert!((s1 / nf).abs() < 4.0 * (m.m2 / nf).sqrt(), "{family} mean");
            assert!(
                (s2 / nf - m.m2).abs() <= 4.0 * se2 + 1e-9 * m.m2,
                "{family} m2"
            );
            assert!((s4 / nf - m.m4).abs() < 4.0 * se4.max(1e-12), "{family} m4");
        }
    }

    #[test]
    fn parse_noise_specs() {
        let spec: NoiseSpec = "gaussian:0.2".parse().unwrap();
        assert_eq!(spec.family, NoiseFamily::Gaussian);
        assert_eq!(spec.scale, 0.2);
        assert!("cauchy:1".parse::<NoiseSpec>().is_err());
        assert!("gaussian".parse::<NoiseSpec>().is_err());
        assert!("gaussian:-1".parse::<NoiseSpec>().is_err());
    }

    #[test]
    fn deterministic_case_is_excluded() {
        // 2 α τ₂ = 1
        let err = ModelParams::new(
            0.3,
            2.5,
            NoiseSpec::gaussian(1.0).unwrap(),
            Some(NoiseSpec::gaussian(0.2).unwrap()),
        )
        .unwrap_err();
        assert!(matches!(err, RcarError::Pathological(_)));
    }

    #[test]
    fn rho_m_and_rho_h_reduce_without_correlation() {
        let report = check_hypotheses(&gaussian_params(0.3, 0.0, 0.2), 10_000, 1);
        assert!((report.rho_m - 0.29).abs() < 1e-10);
        // θ⁴ + 6θ²τ₂ + τ₄ with τ₄ = 3 · 0.2²
        assert!((report.rho_h - (0.0081 + 0.108 + 0.12)).abs() < 1e-10);
        assert!(report.verdicts.h3.holds() && report.verdicts.h4.holds());
    }

    #[test]
    fn rho_m_is_tau2_at_the_origin() {
        for tau2 in [0.1, 0.5, 0.9] {
            let report = check_hypotheses(&gaussian_params(0.0, 0.0, tau2), 10_000, 2);
            assert!((report.rho_m - tau2).abs() < 1e-10);
        }
    }

    #[test]
    fn log_moment_of_standard_normal() {
        // E ln|N(0,1)| = -(γ_EM + ln 2)/2
        let exact = -(0.577_215_664_901_532_9 + std::f64::consts::LN_2) / 2.0;
        let est = log_moment_estimate(&gaussian_params(0.0, 0.0, 1.0), 200_000, 3);
        assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{est:?}");
        assert!((exact + 0.6351).abs() < 1e-4);
    }

    #[test]
    fn verdicts_flag_nonstationary_parameters() {
        let report = check_hypotheses(&gaussian_params(1.2, 0.0, 0.3), 20_000, 4);
        assert_eq!(report.verdicts.h3, Verdict::Violated);
        assert_eq!(report.verdicts.h4, Verdict::Violated);
    }

    #[test]
    fn sqrt2_boundary_is_flagged() {
        // θ* = 1/√2 with α = 0
        let report = check_hypotheses(
            &gaussian_params(std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.1),
            10_000,
            5,
        );
        assert!(report.excluded_degenerate.sqrt2_theta_boundary);
        let report = check_hypotheses(&gaussian_params(0.3, 0.5, 0.1), 10_000, 5);
        assert!(!report.excluded_degenerate.any());
    }

    #[test]
    fn fixed_coefficient_fails_h3_but_has_moments() {
        let params = ModelParams::new(0.5, 0.0, NoiseSpec::gaussian(1.0).unwrap(), None).unwrap();
        let report = check_hypotheses(&params, 10_000, 6);
        assert_eq!(report.verdicts.h3, Verdict::Violated);
        assert!((report.rho_m - 0.25).abs() < 1e-12);
        assert!(report.warnings.iter().any(|w| w.contains("fixed")));
    }
}
