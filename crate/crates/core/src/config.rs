//! Flat key-value run files.
//!
//! ```toml
//! theta = 0.3
//! alpha = 0.5
//! eps.family = "gaussian"
//! eps.scale = 1.0
//! eta.family = "gaussian"
//! eta.scale = 0.1
//! n = 5000
//! replicates = 2000
//! seed = 7
//! ```
//!
//! Unknown keys are rejected. `eta.family = "none"` fixes the coefficient.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RcarError, Result};
use crate::model::{ModelParams, NoiseSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseEntry {
    pub family: Option<String>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<NoiseEntry>,
    pub eta: Option<NoiseEntry>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub burn_in: Option<usize>,
    pub mc_draws: Option<usize>,
    pub experiment: Option<String>,
    pub alpha_grid: Option<Vec<f64>>,
    pub double_n: Option<bool>,
    pub workers: Option<usize>,
}

/// Parsed noise entry; `None` inside means a fixed coefficient.
pub type NoiseChoice = Option<NoiseSpec>;

pub fn parse_noise_choice(s: &str) -> Result<NoiseChoice> {
    if s.trim().eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

impl NoiseEntry {
    fn resolve(&self, which: &str) -> Result<NoiseChoice> {
        match (&self.family, self.scale) {
            (Some(f), _) if f.trim().eq_ignore_ascii_case("none") => Ok(None),
            (Some(f), Some(s)) => NoiseSpec::new(f.parse()?, s).map(Some),
            _ => Err(RcarError::Config(format!(
                "{which} needs both family and scale"
            ))),
        }
    }
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RcarError::Config(format!("run file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn eps_spec(&self) -> Result<Option<NoiseSpec>> {
        match &self.eps {
            None => Ok(None),
            Some(e) => e
                .resolve("eps")?
                .map(Some)
                .ok_or_else(|| RcarError::Config("eps cannot be 'none'".into())),
        }
    }

    /// `None` when absent, `Some(None)` for a fixed coefficient.
    pub fn eta_choice(&self) -> Result<Option<NoiseChoice>> {
        self.eta.as_ref().map(|e| e.resolve("eta")).transpose()
    }
}

/// Command-line values layered over a run file; flags win.
#[derive(Debug, Clone, Default)]
pub struct ParamOverrides {
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<NoiseSpec>,
    pub eta: Option<NoiseChoice>,
}

pub fn resolve_params(file: Option<&RunFile>, flags: &ParamOverrides) -> Result<ModelParams> {
    let theta = flags
        .theta
        .or(file.and_then(|f| f.theta))
        .ok_or_else(|| RcarError::Config("theta is required".into()))?;
    let alpha = flags.alpha.or(file.and_then(|f| f.alpha)).unwrap_or(0.0);
    let eps = match flags.eps {
        Some(e) => e,
        None => file
            .map(|f| f.eps_spec())
            .transpose()?
            .flatten()
            .ok_or_else(|| RcarError::Config("eps is required".into()))?,
    };
    let eta = match flags.eta {
        Some(e) => e,
        None => file
            .map(|f| f.eta_choice())
            .transpose()?
            .flatten()
            .ok_or_else(|| {
                RcarError::Config("eta is required (use 'none' for a fixed coefficient)".into())
            })?,
    };
    ModelParams::new(theta, alpha, eps, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseFamily;

    const SAMPLE: &str = r#"
theta = 0.3
alpha = 0.5
eps.family = "gaussian"
eps.scale = 1.0
eta.family = "uniform"
eta.scale = 0.5
n = 100
"#;

    #[test]
    fn parses_flat_keys() {
        let f = RunFile::parse(SAMPLE).unwrap();
        let p = resolve_params(Some(&f), &ParamOverrides::default()).unwrap();
        assert_eq!(p.theta, 0.3);
        assert_eq!(p.eta.unwrap().family, NoiseFamily::Uniform);
        assert_eq!(f.n, Some(100));
    }

    #[test]
    fn flags_override_file() {
        let f = RunFile::parse(SAMPLE).unwrap();
        let flags = ParamOverrides {
            theta: Some(-0.2),
            eta: Some(None),
            ..Default::default()
        };
        let p = resolve_params(Some(&f), &flags).unwrap();
        assert_eq!(p.theta, -0.2);
        assert_eq!(p.alpha, 0.5);
        assert!(p.eta.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunFile::parse("theta = 0.3\nbeta = 1\n").is_err());
        assert!(RunFile::parse("eps.family = \"gaussian\"\neps.shape = 2\n").is_err());
    }

    #[test]
    fn missing_pieces_are_reported() {
        assert!(resolve_params(None, &ParamOverrides::default()).is_err());
        let f = RunFile::parse("theta = 0.1\neps.family = \"gaussian\"\n").unwrap();
        assert!(resolve_params(Some(&f), &ParamOverrides::default()).is_err());
    }

    #[test]
    fn none_selects_fixed_coefficient() {
        assert_eq!(parse_noise_choice("none").unwrap(), None);
        assert!(parse_noise_choice("gaussian:0.1").unwrap().is_some());
        let f = RunFile::parse(
            "theta = 0.5\neps.family = \"laplace\"\neps.scale = 1\neta.family = \"none\"\n",
        )
        .unwrap();
        let p = resolve_params(Some(&f), &ParamOverrides::default()).unwrap();
        assert!(!p.is_random_coefficient());
    }
}
