//! Reproducible simulation of the process and of its coefficient sequence,
//! plus the `t,x` trajectory CSV format.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RcarError, Result};
use crate::model::ModelParams;

pub const DEFAULT_BURN_IN: usize = 2000;
/// Largest burn-in reached by automatic doubling.
pub const MAX_BURN_IN: usize = 1 << 16;
/// Initial offset used by the forgetting check.
const FORGETTING_OFFSET: f64 = 100.0;
const FORGETTING_TOLERANCE: f64 = 1e-8;
pub const EXPLOSION_THRESHOLD: f64 = 1e300;
pub const GENERATOR_ID: &str = "ChaCha8Rng (rand_chacha 0.9)";

/// Seed of replicate `r` under master seed `master` (splitmix64 finalizer
/// over both words).
pub fn replicate_seed(master: u64, r: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ r.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// One transition `X_{t-1} → X_t` with the noises that drove it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub eta_prev: f64,
    pub eta: f64,
    pub eps: f64,
    pub x_prev: f64,
    pub x: f64,
}

impl Step {
    pub fn coefficient(&self, params: &ModelParams) -> f64 {
        params.theta + params.alpha * self.eta_prev + self.eta
    }
}

/// Infinite iterator over transitions, started at `X₀ = x0` with `η₀` drawn
/// from its law. Each step draws `η_t` then `ε_t`.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    rng: ChaCha8Rng,
    eta_prev: f64,
    x: f64,
}

impl Stepper {
    pub fn new(params: &ModelParams, seed: u64, x0: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta_prev = params.eta.map_or(0.0, |e| e.sample(&mut rng));
        Self {
            params: *params,
            rng,
            eta_prev,
            x: x0,
        }
    }

    pub fn state(&self) -> f64 {
        self.x
    }
}

impl Iterator for Stepper {
    type Item = Step;

    fn next(&mut self) -> Option<Step> {
        let eta = self.params.eta.map_or(0.0, |e| e.sample(&mut self.rng));
        let eps = self.params.eps.sample(&mut self.rng);
        let theta_t = self.params.theta + self.params.alpha * self.eta_prev + eta;
        let step = Step {
            eta_prev: self.eta_prev,
            eta,
            eps,
            x_prev: self.x,
            x: theta_t * self.x + eps,
        };
        self.eta_prev = eta;
        self.x = step.x;
        Some(step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `X₀, ..., Xₙ`.
    pub x: Vec<f64>,
    pub seed: Option<u64>,
    pub burn_in: usize,
    pub params_echo: Option<ModelParams>,
}

impl Trajectory {
    pub fn from_values(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(RcarError::Degenerate(
                "a trajectory needs at least X₀ and X₁".into(),
            ));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(RcarError::Degenerate(format!("X_{i} is not finite")));
        }
        Ok(Self {
            x,
            seed: None,
            burn_in: 0,
            params_echo: None,
        })
    }

    /// Number of transitions `n`; the series holds `n + 1` values.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        writeln!(out, "t,x")?;
        for (t, v) in self.x.iter().enumerate() {
            writeln!(out, "{t},{v:.16e}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn check_finite(x: f64, step: usize) -> Result<()> {
    if x.is_finite() && x.abs() <= EXPLOSION_THRESHOLD {
        Ok(())
    } else {
        Err(RcarError::Explosion { step })
    }
}

/// A [`Stepper`] started at zero and run through its burn-in.
///
/// The burn-in is doubled (up to [`MAX_BURN_IN`]) until a start at 100 would
/// have been forgotten to within `1e-8`, i.e. until `100 · Π|θ_s| < 1e-8`
/// over the discarded steps; a zero burn-in is taken literally. Returns the
/// stepper and the burn-in actually used.
pub fn burned_in_stepper(
    params: &ModelParams,
    seed: u64,
    burn_in: usize,
) -> Result<(Stepper, usize)> {
    let mut stepper = Stepper::new(params, seed, 0.0);
    let target_log = (FORGETTING_TOLERANCE / FORGETTING_OFFSET).ln();
    let mut log_product = 0.0f64;
    let mut done = 0usize;
    let mut total = burn_in;
    loop {
        while done < total {
            let s = stepper.next().expect("infinite");
            done += 1;
            check_finite(s.x, done)?;
            log_product += s.coefficient(params).abs().ln();
        }
        if total == 0 || log_product < target_log || total >= MAX_BURN_IN {
            break;
        }
        total = (total * 2).min(MAX_BURN_IN);
    }
    Ok((stepper, total))
}

/// Simulates `X₀..Xₙ` after the burn-in of [`burned_in_stepper`].
pub fn simulate(params: &ModelParams, n: usize, seed: u64, burn_in: usize) -> Result<Trajectory> {
    if n < 1 {
        return Err(RcarError::Config("n must be at least 1".into()));
    }
    let (mut stepper, used) = burned_in_stepper(params, seed, burn_in)?;
    let mut x = Vec::with_capacity(n + 1);
    x.push(stepper.state());
    for s in stepper.by_ref().take(n) {
        check_finite(s.x, used + x.len())?;
        x.push(s.x);
    }
    Ok(Trajectory {
        x,
        seed: Some(seed),
        burn_in: used,
        params_echo: Some(*params),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientPath {
    /// `θ₁, ..., θₙ`.
    pub theta_t: Vec<f64>,
}

/// The coefficients `θ_t = θ + αη_{t-1} + η_t`, `t = 1..n`, that drive
/// `simulate(params, n, seed, 0)`.
pub fn simulate_coefficients(params: &ModelParams, n: usize, seed: u64) -> CoefficientPath {
    CoefficientPath {
        theta_t: Stepper::new(params, seed, 0.0)
            .take(n)
            .map(|s| s.coefficient(params))
            .collect(),
    }
}

/// Reads a `t,x` CSV with `t = 0, 1, 2, ...`.
pub fn ingest_reader<R: Read>(reader: R) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut x = Vec::new();
    let mut saw_header = false;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| RcarError::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if !saw_header {
            if record.len() != 2 || &record[0] != "t" || &record[1] != "x" {
                return Err(RcarError::Parse {
                    line,
                    message: "expected header 't,x'".into(),
                });
            }
            saw_header = true;
            continue;
        }
        if record.len() != 2 {
            return Err(RcarError::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let t: usize = record[0].parse().map_err(|_| RcarError::Parse {
            line,
            message: format!("bad index '{}'", &record[0]),
        })?;
        if t != x.len() {
            return Err(RcarError::Parse {
                line,
                message: format!("expected t = {}, found {t}", x.len()),
            });
        }
        let v: f64 = record[1].parse().map_err(|_| RcarError::Parse {
            line,
            message: format!("bad value '{}'", &record[1]),
        })?;
        if !v.is_finite() {
            return Err(RcarError::Parse {
                line,
                message: format!("non-finite value '{}'", &record[1]),
            });
        }
        x.push(v);
    }
    if !saw_header {
        return Err(RcarError::Parse {
            line: 1,
            message: "empty file".into(),
        });
    }
    if x.is_empty() {
        return Err(RcarError::Parse {
            line: 2,
            message: "no observations".into(),
        });
    }
    Ok(Trajectory {
        x,
        seed: None,
        burn_in: 0,
        params_echo: None,
    })
}

pub fn ingest(path: &Path) -> Result<Trajectory> {
    ingest_reader(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseSpec;

    fn params(theta: f64, alpha: f64, tau2: f64) -> ModelParams {
        ModelParams::new(
            theta,
            alpha,
            NoiseSpec::gaussian(1.0).unwrap(),
            Some(NoiseSpec::gaussian(tau2).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let p = params(0.3, 0.5, 0.1);
        let a = simulate(&p, 1000, 42, DEFAULT_BURN_IN).unwrap();
        let b = simulate(&p, 1000, 42, DEFAULT_BURN_IN).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.x.len(), 1001);
        let c = simulate(&p, 1000, 43, DEFAULT_BURN_IN).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn burn_in_forgets_the_start() {
        let p = params(0.3, 0.5, 0.1);
        let mut from_zero = Stepper::new(&p, 9, 0.0);
        let mut from_hundred = Stepper::new(&p, 9, 100.0);
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..DEFAULT_BURN_IN {
            a = from_zero.next().unwrap().x;
            b = from_hundred.next().unwrap().x;
        }
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn slow_forgetting_doubles_the_burn_in() {
        // |θ_t| ≈ 0.995 forgets a unit offset only after ~4600 steps.
        let p = ModelParams::new(0.995, 0.0, NoiseSpec::gaussian(1.0).unwrap(), None).unwrap();
        let t = simulate(&p, 10, 1, DEFAULT_BURN_IN).unwrap();
        assert!(t.burn_in > DEFAULT_BURN_IN);
        assert!(t.burn_in <= MAX_BURN_IN);
    }

    #[test]
    fn explosive_paths_error() {
        let p = ModelParams::new(3.0, 0.0, NoiseSpec::gaussian(1.0).unwrap(), None).unwrap();
        assert!(matches!(
            simulate(&p, 1000, 1, 0),
            Err(RcarError::Explosion { .. })
        ));
    }

    #[test]
    fn coefficients_match_the_simulation_driver() {
        let p = params(0.3, 0.5, 0.1);
        let c = simulate_coefficients(&p, 50, 5);
        let t = simulate(&p, 50, 5, 0).unwrap();
        let steps: Vec<Step> = Stepper::new(&p, 5, 0.0).take(50).collect();
        for (i, s) in steps.iter().enumerate() {
            assert_eq!(s.coefficient(&p), c.theta_t[i]);
            assert_eq!(s.x, c.theta_t[i] * t.x[i] + s.eps);
            assert_eq!(s.x, t.x[i + 1]);
        }
    }

    #[test]
    fn replicate_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|r| replicate_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(replicate_seed(7, 0), replicate_seed(8, 0));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = params(0.3, 0.5, 0.1);
        let t = simulate(&p, 200, 3, 100).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ingest_reader(buf.as_slice()).unwrap();
        assert_eq!(back.x, t.x);
    }

    #[test]
    fn ingest_errors_carry_line_numbers() {
        let bad = "t,x\n0,1\n1,2\n2,3\n3,4\n4,5\n5,oops\n";
        match ingest_reader(bad.as_bytes()) {
            Err(RcarError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ingest_reader("0,1\n".as_bytes()),
            Err(RcarError::Parse { line: 1, .. })
        ));
        let gap = "t,x\n0,1\n2,3\n";
        assert!(matches!(
            ingest_reader(gap.as_bytes()),
            Err(RcarError::Parse { line: 3, .. })
        ));
        let nan = "t,x\n0,1\n1,NaN\n";
        assert!(matches!(
            ingest_reader(nan.as_bytes()),
            Err(RcarError::Parse { line: 3, .. })
        ));
        let ok = ingest_reader("t,x\n0,1\n1,2\n2,3\n".as_bytes()).unwrap();
        assert_eq!(ok.x.len(), 3);
    }
}
