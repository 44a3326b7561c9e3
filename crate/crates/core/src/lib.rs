//! First-order autoregression with a random coefficient driven by an MA(1)
//! noise:
//!
//! ```text
//! X_t = θ_t X_{t-1} + ε_t,    θ_t = θ + α η_{t-1} + η_t.
//! ```
//!
//! The crate computes the exact second- and fourth-order moments, the
//! asymptotic variances of the mean and of the Yule-Walker type estimators,
//! simulates and ingests series, estimates the parameters and tests `α = 0`.
//! A Monte Carlo harness checks the theory against simulation.
//!
//! ```
//! use rcar_core::{ModelParams, NoiseSpec};
//!
//! let params = ModelParams::new(
//!     0.3,
//!     0.5,
//!     NoiseSpec::gaussian(1.0)?,
//!     Some(NoiseSpec::gaussian(0.1)?),
//! )?;
//! let p = params.moments()?;
//! let so = rcar_core::second_order::build_second_order(&p)?;
//! let lim = rcar_core::asymptotics::limits(&p, &so);
//! assert!((lim.theta_star - 1.0 / 3.0).abs() < 1e-12);
//! # Ok::<(), rcar_core::RcarError>(())
//! ```

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod estimate;
pub mod fourth_order;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod second_order;
pub mod simulate;

pub use asymptotics::{CovarianceStack, LimitSet, MixedMomentKey};
pub use error::{RcarError, Result};
pub use estimate::{EstimationReport, TestOptions, ThetaSource};
pub use fourth_order::FourthOrderTables;
pub use harness::{Experiment, MCConfig, MCReport};
pub use model::{HypothesisReport, ModelParams, MomentSet, NoiseFamily, NoiseSpec, ProcessMoments};
pub use numerics::SmallMatrix;
pub use second_order::{Acvf, SecondOrderTables};
pub use simulate::{CoefficientPath, Trajectory};

/// Second- and fourth-order tables plus the covariance stack for one
/// parameter point.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub moments: ProcessMoments,
    pub second: SecondOrderTables,
    pub fourth: FourthOrderTables,
    pub stack: CovarianceStack,
}

impl Analysis {
    pub fn new(p: &ProcessMoments) -> Result<Self> {
        let second = second_order::build_second_order(p)?;
        let fourth = fourth_order::build_fourth_order(p, &second)?;
        let stack = asymptotics::sigma_psi(p, &second, &fourth)?;
        Ok(Self {
            moments: *p,
            second,
            fourth,
            stack,
        })
    }
}
