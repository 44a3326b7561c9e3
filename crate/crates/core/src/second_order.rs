//! Second-order moments: `U₀, U₁, U₂`, the matrices `M` and `N`, the solved
//! vector `Λ = (E[X²], E[ηX²], E[η²X²])` and the autocovariance function.

use serde::Serialize;

use crate::error::{RcarError, Result};
use crate::model::{MomentSet, ProcessMoments};
use crate::numerics::{binomial, mat_power, solve_resolvent, spectral_radius, SmallMatrix};

/// Largest `|h|` accepted by [`autocovariance`].
pub const MAX_LAG: u64 = 1000;
/// `λ₀` at or below this means the process is deterministic.
pub const LAMBDA0_TOLERANCE: f64 = 1e-12;

/// `U_k = (τ_k, τ_{k+1}, τ_{k+2})`, for `k = 0, 1, 2`.
pub fn u_vectors(tau: &MomentSet) -> [[f64; 3]; 3] {
    std::array::from_fn(|k| std::array::from_fn(|i| tau.moment(i + k)))
}

fn combine3(terms: &[(f64, &[f64; 3])]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (c, v) in terms {
        for i in 0..3 {
            out[i] += c * v[i];
        }
    }
    out
}

/// The 3×3 matrix `M` with columns `θ²U₀ + 2θU₁ + U₂`, `2α(θU₀ + U₁)`, `α²U₀`.
pub fn m_matrix(theta: f64, alpha: f64, tau: &MomentSet) -> SmallMatrix {
    let [u0, u1, u2] = u_vectors(tau);
    let c1 = combine3(&[(theta * theta, &u0), (2.0 * theta, &u1), (1.0, &u2)]);
    let c2 = combine3(&[(2.0 * alpha * theta, &u0), (2.0 * alpha, &u1)]);
    let c3 = combine3(&[(alpha * alpha, &u0)]);
    SmallMatrix::from_columns(&[c1, c2, c3]).expect("3x3")
}

/// The 3×3 matrix `N` with columns `θU₀ + U₁`, `αU₀`, `0`.
pub fn n_matrix(theta: f64, alpha: f64, tau: &MomentSet) -> SmallMatrix {
    let [u0, u1, _] = u_vectors(tau);
    let c1 = combine3(&[(theta, &u0), (1.0, &u1)]);
    let c2 = combine3(&[(alpha, &u0)]);
    SmallMatrix::from_columns(&[c1, c2, [0.0; 3]]).expect("3x3")
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondOrderTables {
    #[serde(rename = "U0")]
    pub u0: [f64; 3],
    #[serde(rename = "U1")]
    pub u1: [f64; 3],
    #[serde(rename = "U2")]
    pub u2: [f64; 3],
    #[serde(rename = "M")]
    pub m: SmallMatrix,
    #[serde(rename = "N")]
    pub n: SmallMatrix,
    /// `(λ₀, λ₁, λ₂)` with `λ_a = E[η_t^a X_t²]`.
    #[serde(rename = "Lambda")]
    pub lambda: [f64; 3],
    pub rho_m: f64,
    #[serde(skip)]
    pub moments: ProcessMoments,
}

pub fn build_second_order(p: &ProcessMoments) -> Result<SecondOrderTables> {
    let m = m_matrix(p.theta, p.alpha, &p.tau);
    let n = n_matrix(p.theta, p.alpha, &p.tau);
    let rho_m = spectral_radius(&m)?;
    if rho_m >= 1.0 {
        return Err(RcarError::Hypothesis(format!(
            "no second-order stationary solution (ρ(M) = {rho_m:.6} ≥ 1)"
        )));
    }
    let [u0, u1, u2] = u_vectors(&p.tau);
    let sol = solve_resolvent(&m, &u0, "(I - M) Λ = σ₂ U₀")?;
    let lambda = [
        p.sigma2() * sol[0],
        p.sigma2() * sol[1],
        p.sigma2() * sol[2],
    ];
    if lambda[0] <= LAMBDA0_TOLERANCE {
        return Err(RcarError::Pathological(format!(
            "γ_X(0) = {:e}: the process is deterministic",
            lambda[0]
        )));
    }
    Ok(SecondOrderTables {
        u0,
        u1,
        u2,
        m,
        n,
        lambda,
        rho_m,
        moments: *p,
    })
}

/// `γ_X(h) = [N^|h| Λ]₁`.
pub fn autocovariance(tables: &SecondOrderTables, h: i64) -> Result<f64> {
    let lag = h.unsigned_abs();
    if lag > MAX_LAG {
        return Err(RcarError::Domain(format!(
            "|h| = {lag} exceeds the lag cap {MAX_LAG}"
        )));
    }
    let v = mat_power(&tables.n, lag)?.mul_vec(&tables.lambda)?;
    Ok(v[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Acvf {
    /// `γ_X(0), ..., γ_X(max_lag)`.
    pub values: Vec<f64>,
    /// `γ_X(1) / γ_X(0)`.
    pub theta_star: f64,
    /// `γ_X(2) / γ_X(0)`.
    pub vartheta_star: f64,
}

impl Acvf {
    pub fn at(&self, h: i64) -> Option<f64> {
        self.values.get(h.unsigned_abs() as usize).copied()
    }

    pub fn autocorrelation(&self, h: i64) -> Option<f64> {
        self.at(h).map(|g| g / self.values[0])
    }
}

pub fn acvf(tables: &SecondOrderTables, max_lag: u64) -> Result<Acvf> {
    let max_lag = max_lag.max(2);
    if max_lag > MAX_LAG {
        return Err(RcarError::Domain(format!(
            "max lag {max_lag} exceeds {MAX_LAG}"
        )));
    }
    let mut values = Vec::with_capacity(max_lag as usize + 1);
    let mut v = tables.lambda.to_vec();
    for _ in 0..=max_lag {
        values.push(v[0]);
        v = tables.n.mul_vec(&v)?;
    }
    Ok(Acvf {
        theta_star: values[1] / values[0],
        vartheta_star: values[2] / values[0],
        values,
    })
}

/// `U_{k,h} = Nʰ Mᵏ U₀`.
pub fn lemma1_sequence(p: &ProcessMoments, k: u64, h: u64) -> Result<[f64; 3]> {
    let m = m_matrix(p.theta, p.alpha, &p.tau);
    let n = n_matrix(p.theta, p.alpha, &p.tau);
    let [u0, _, _] = u_vectors(&p.tau);
    let v = mat_power(&m, k)?.mul_vec(&u0)?;
    let v = mat_power(&n, h)?.mul_vec(&v)?;
    Ok([v[0], v[1], v[2]])
}

/// `E[η^a (θ + η)^b] = Σ_k C(b,k) θ^{b-k} τ_{a+k}`, for `a, b ≤ 4`.
pub fn table1_moment(a: usize, b: usize, p: &ProcessMoments) -> Result<f64> {
    if a > 4 || b > 4 {
        return Err(RcarError::Domain(format!(
            "table entry ({a}, {b}) out of range 0..=4"
        )));
    }
    Ok(table_moment(a, b, p.theta, &p.tau))
}

pub(crate) fn table_moment(a: usize, b: usize, theta: f64, tau: &MomentSet) -> f64 {
    (0..=b)
        .map(|k| binomial(b, k) * theta.powi((b - k) as i32) * tau.moment(a + k))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(theta: f64, alpha: f64, tau2: f64) -> ProcessMoments {
        let sigma = MomentSet::new(1.0, 3.0, 15.0, 105.0).unwrap();
        let tau = MomentSet::new(
            tau2,
            3.0 * tau2 * tau2,
            15.0 * tau2.powi(3),
            105.0 * tau2.powi(4),
        )
        .unwrap();
        ProcessMoments::new(theta, alpha, sigma, tau).unwrap()
    }

    #[test]
    fn m_at_origin() {
        let p = gaussian(0.0, 0.0, 0.2);
        let m = m_matrix(0.0, 0.0, &p.tau);
        let expected =
            SmallMatrix::from_rows(&[[0.2, 0.0, 0.0], [0.0, 0.0, 0.0], [0.12, 0.0, 0.0]]).unwrap();
        assert!(m.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn m_explicit_entries() {
        let (th, al, t2) = (0.4, -0.7, 0.15);
        let p = gaussian(th, al, t2);
        let t4 = p.tau4();
        let m = m_matrix(th, al, &p.tau);
        let explicit = [
            [th * th + t2, 2.0 * al * th, al * al],
            [2.0 * th * t2, 2.0 * al * t2, 0.0],
            [th * th * t2 + t4, 2.0 * al * th * t2, al * al * t2],
        ];
        assert!(
            m.sub(&SmallMatrix::from_rows(&explicit).unwrap())
                .unwrap()
                .max_abs()
                < 1e-15
        );
    }

    #[test]
    fn lambda0_without_correlation() {
        let so = build_second_order(&gaussian(0.3, 0.0, 0.2)).unwrap();
        assert!((so.lambda[0] - 1.0 / 0.71).abs() < 1e-12);
        assert!((so.rho_m - 0.29).abs() < 1e-10);
    }

    #[test]
    fn classical_ar1() {
        let p = ProcessMoments::new(
            0.6,
            0.0,
            MomentSet::new(2.0, 12.0, 0.0, 0.0).unwrap(),
            MomentSet::zero(),
        )
        .unwrap();
        let so = build_second_order(&p).unwrap();
        assert!((so.lambda[0] - 2.0 / 0.64).abs() < 1e-12);
        assert_eq!(so.lambda[1], 0.0);
        let g2 = autocovariance(&so, 2).unwrap();
        assert!((g2 - 2.0 * 0.36 / 0.64).abs() < 1e-12);
    }

    #[test]
    fn lag_one_autocorrelation_is_theta_star() {
        let so = build_second_order(&gaussian(0.3, 0.5, 0.1)).unwrap();
        let a = acvf(&so, 5).unwrap();
        assert!((a.theta_star - 1.0 / 3.0).abs() < 1e-12);
        let vs = (0.09 + 0.05 * 0.9) / 0.9;
        assert!((a.vartheta_star - vs).abs() < 1e-12);
    }

    #[test]
    fn acvf_is_even_and_dominated() {
        let so = build_second_order(&gaussian(-0.5, 0.8, 0.2)).unwrap();
        let g0 = autocovariance(&so, 0).unwrap();
        for h in -5..=5 {
            let g = autocovariance(&so, h).unwrap();
            assert_eq!(g, autocovariance(&so, -h).unwrap());
            assert!(g.abs() <= g0 + 1e-15);
        }
        assert!(autocovariance(&so, 1001).is_err());
    }

    #[test]
    fn explosive_parameters_are_rejected() {
        let err = build_second_order(&gaussian(0.9, 0.0, 0.3)).unwrap_err();
        assert!(matches!(err, RcarError::Hypothesis(_)));
    }

    #[test]
    fn lemma1_entries() {
        let (th, al, t2) = (0.3, 0.5, 0.1);
        let p = gaussian(th, al, t2);
        assert_eq!(lemma1_sequence(&p, 0, 0).unwrap(), [1.0, 0.0, t2]);
        let v = lemma1_sequence(&p, 1, 0).unwrap();
        assert!((v[0] - (th * th + t2 + al * al * t2)).abs() < 1e-15);
        assert!((v[1] - 2.0 * th * t2).abs() < 1e-15);
    }

    #[test]
    fn table1_entries() {
        let th = 0.7;
        let p = gaussian(th, 0.0, 0.3);
        let (t2, t4, t6) = (p.tau.m2, p.tau.m4, p.tau.m6);
        assert_eq!(table1_moment(0, 0, &p).unwrap(), 1.0);
        assert!((table1_moment(1, 1, &p).unwrap() - t2).abs() < 1e-15);
        let want = th.powi(4) * t2 + 6.0 * th * th * t4 + t6;
        assert!((table1_moment(2, 4, &p).unwrap() - want).abs() < 1e-14);
        assert!((table1_moment(0, 2, &p).unwrap() - (th * th + t2)).abs() < 1e-15);
        assert!(table1_moment(5, 0, &p).is_err());
    }
}
