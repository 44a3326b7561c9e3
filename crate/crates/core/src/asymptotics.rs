//! Limits and asymptotic variances: `θ*`, `ϑ*`, `σ₂*`, `κ²`, `ω²`, the
//! covariance `Σ` of `(θ̂ₙ, ϑ̂ₙ)`, the covariance `Ψ` of `(θ̃ₙ, γ̃ₙ)` and the
//! closed-form null variance `ψ⁰`.

use serde::Serialize;

use crate::error::{RcarError, Result};
use crate::estimate::{f_jacobian, PATHOLOGICAL_TOLERANCE};
use crate::fourth_order::FourthOrderTables;
use crate::model::ProcessMoments;
use crate::numerics::{binomial, hadamard, SmallMatrix};
use crate::second_order::{table_moment, SecondOrderTables};

/// Guard on `1 - θ - ατ₂` in `κ²`.
pub const KAPPA_DENOMINATOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSet {
    pub theta_star: f64,
    pub vartheta_star: f64,
    pub gamma: f64,
    pub sigma2_star: f64,
}

pub fn limits(p: &ProcessMoments, so: &SecondOrderTables) -> LimitSet {
    let c = p.one_minus_two_gamma();
    let gamma = p.gamma();
    let theta_star = p.theta / c;
    LimitSet {
        theta_star,
        vartheta_star: (p.theta * p.theta + gamma * c) / c,
        gamma,
        sigma2_star: (1.0 - theta_star * theta_star) * so.lambda[0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KbarConstants {
    pub k1: f64,
    pub k12: f64,
    pub k2: f64,
    pub k3: f64,
}

impl KbarConstants {
    pub fn new(p: &ProcessMoments) -> Self {
        let (th, al) = (p.theta, p.alpha);
        let (t2, t4, s2) = (p.tau2(), p.tau4(), p.sigma2());
        let b = 1.0 + al * th;
        Self {
            k1: b * b * t2 + al * al * (t4 - t2 * t2),
            k12: al * al * b * t2,
            k2: al.powi(4) * t2,
            k3: (1.0 + al * al * t2) * s2,
        }
    }

    pub fn matrix(&self) -> SmallMatrix {
        SmallMatrix::from_rows(&[
            [self.k1, self.k12, 0.0],
            [self.k12, self.k2, 0.0],
            [0.0, 0.0, self.k3],
        ])
        .expect("3x3")
    }
}

pub fn gamma_bar(so: &SecondOrderTables) -> SmallMatrix {
    let [l0, l1, l2] = so.lambda;
    SmallMatrix::from_rows(&[[l0, l1, 0.0], [l1, l2, 0.0], [0.0, 0.0, 1.0]]).expect("3x3")
}

/// Asymptotic variance of `√n X̄ₙ`.
pub fn kappa_squared(p: &ProcessMoments, so: &SecondOrderTables) -> Result<f64> {
    let d = 1.0 - p.theta - p.gamma();
    if d.abs() < KAPPA_DENOMINATOR_TOLERANCE {
        return Err(RcarError::Degenerate(format!(
            "1 - θ - ατ₂ = {d:e} leaves κ² undefined"
        )));
    }
    let kg = hadamard(&KbarConstants::new(p).matrix(), &gamma_bar(so))?;
    Ok(kg.total() / (d * d))
}

/// Index `(a, b, c, p, q)` of `μ = E[η_{t-1}^a η_t^b ε_t^c X_{t-1}^p X_t^q]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MixedMomentKey {
    pub a: u8,
    pub b: u8,
    pub c: u8,
    pub p: u8,
    pub q: u8,
}

impl MixedMomentKey {
    pub const fn new(a: u8, b: u8, c: u8, p: u8, q: u8) -> Self {
        Self { a, b, c, p, q }
    }

    /// The distinct keys entering `Υ` and `ℓ`.
    pub const COVARIANCE_KEYS: [MixedMomentKey; 10] = [
        Self::new(0, 0, 0, 2, 2),
        Self::new(0, 1, 0, 2, 2),
        Self::new(1, 0, 0, 2, 2),
        Self::new(0, 0, 1, 1, 2),
        Self::new(0, 2, 0, 2, 2),
        Self::new(1, 1, 0, 2, 2),
        Self::new(0, 1, 1, 1, 2),
        Self::new(0, 3, 0, 2, 2),
        Self::new(1, 2, 0, 2, 2),
        Self::new(0, 2, 1, 1, 2),
    ];

    pub fn label(&self) -> String {
        format!("{}{}{}{}{}", self.a, self.b, self.c, self.p, self.q)
    }
}

impl std::fmt::Display for MixedMomentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{},{},{})",
            self.a, self.b, self.c, self.p, self.q
        )
    }
}

/// `E[η^e X^m]` at a single date, from the solved moment vectors.
fn eta_x_moment(e: usize, m: usize, p: &ProcessMoments, fo: &FourthOrderTables) -> Result<f64> {
    if m % 2 == 1 {
        return Ok(0.0);
    }
    let table: &[f64] = match m {
        0 => return Ok(p.tau.moment(e)),
        2 => &fo.lambda5,
        4 => &fo.delta,
        _ => {
            return Err(RcarError::Domain(format!(
                "E[X^{m}] is not available (order ≤ 4)"
            )));
        }
    };
    table.get(e).copied().ok_or_else(|| {
        RcarError::Domain(format!("E[η^{e} X^{m}] is not available (power of η ≤ 4)"))
    })
}

/// Closed form of `μ_{a,b,c,p,q}`.
///
/// Expands `X_t = θ_t X_{t-1} + ε_t` and `θ_t = αη_{t-1} + (θ + η_t)`; the
/// innovations at `t` are independent of `(η_{t-1}, X_{t-1})`, so
/// `μ = Σ_j Σ_i C(q,j) C(j,i) αⁱ σ_{c+q-j} E[η^b (θ+η)^{j-i}] E[η^{a+i} X^{p+j}]`.
pub fn mixed_moment(
    key: MixedMomentKey,
    p: &ProcessMoments,
    fo: &FourthOrderTables,
) -> Result<f64> {
    let (a, b, c, pp, q) = (
        key.a as usize,
        key.b as usize,
        key.c as usize,
        key.p as usize,
        key.q as usize,
    );
    if b + q > 8 || c + q > 8 {
        return Err(RcarError::Domain(format!(
            "mixed moment {key} needs noise moments above order 8"
        )));
    }
    let mut total = 0.0;
    for j in 0..=q {
        let s = p.sigma.moment(c + q - j);
        if s == 0.0 {
            continue;
        }
        for i in 0..=j {
            let t = table_moment(b, j - i, p.theta, &p.tau);
            if t == 0.0 {
                continue;
            }
            let e = eta_x_moment(a + i, pp + j, p, fo)?;
            total += binomial(q, j) * binomial(j, i) * p.alpha.powi(i as i32) * s * t * e;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KConstants {
    pub k1: f64,
    pub k13: f64,
    pub k2: f64,
    pub k24: f64,
    pub k25: f64,
    pub k26: f64,
    pub k3: f64,
    pub k4: f64,
    pub k45: f64,
    pub k46: f64,
    pub k5: f64,
    pub k56: f64,
    pub k6: f64,
}

impl KConstants {
    pub fn new(p: &ProcessMoments) -> Self {
        let (th, al) = (p.theta, p.alpha);
        let (t2, t4, t6) = (p.tau2(), p.tau4(), p.tau.m6);
        let (s2, s4) = (p.sigma2(), p.sigma4());
        let c = 1.0 - 2.0 * al * t2 + al * th * th;
        let w = th * th * t2 - t2 * t2 + t4;
        Self {
            k1: s2 * (1.0 + 4.0 * al * al * w),
            k13: 4.0 * al.powi(3) * th * t2 * s2,
            k2: c * (2.0 * al * t4 + t2 * c) + al * al * (t6 + 4.0 * th * th * (t4 - t2 * t2)),
            k24: 2.0 * al * al * th * t2 * (1.0 + al * th * th - 4.0 * al * t2)
                + 6.0 * al.powi(3) * th * t4,
            k25: al.powi(3) * (al * t4 + t2 * c),
            k26: al * s2 * (al * t4 + t2 * c),
            k3: 4.0 * al.powi(4) * t2 * s2,
            k4: 4.0 * al.powi(4) * w,
            k45: 2.0 * al.powi(5) * th * t2,
            k46: 2.0 * al.powi(3) * th * t2 * s2,
            k5: al.powi(6) * t2,
            k56: al.powi(4) * t2 * s2,
            k6: al * al * t2 * s4,
        }
    }

    pub fn matrix(&self) -> SmallMatrix {
        let k = self;
        SmallMatrix::from_rows(&[
            [k.k1, 0.0, k.k13, 0.0, 0.0, 0.0],
            [0.0, k.k2, 0.0, k.k24, k.k25, k.k26],
            [k.k13, 0.0, k.k3, 0.0, 0.0, 0.0],
            [0.0, k.k24, 0.0, k.k4, k.k45, k.k46],
            [0.0, k.k25, 0.0, k.k45, k.k5, k.k56],
            [0.0, k.k26, 0.0, k.k46, k.k56, k.k6],
        ])
        .expect("6x6")
    }
}

pub fn gamma_matrix(so: &SecondOrderTables, fo: &FourthOrderTables) -> SmallMatrix {
    let [l0, l1, l2] = so.lambda;
    let [d0, d1, d2, d3, d4] = fo.delta;
    SmallMatrix::from_rows(&[
        [l0, 0.0, l1, 0.0, 0.0, 0.0],
        [0.0, d0, 0.0, d1, d2, l0],
        [l1, 0.0, l2, 0.0, 0.0, 0.0],
        [0.0, d1, 0.0, d2, d3, l1],
        [0.0, d2, 0.0, d3, d4, l2],
        [0.0, l0, 0.0, l1, l2, 1.0],
    ])
    .expect("6x6")
}

/// Asymptotic variance of `√n (θ̂ₙ - θ*)`.
pub fn omega_squared(
    p: &ProcessMoments,
    so: &SecondOrderTables,
    fo: &FourthOrderTables,
) -> Result<f64> {
    let kg = hadamard(&KConstants::new(p).matrix(), &gamma_matrix(so, fo))?;
    let c = p.one_minus_two_gamma();
    Ok(kg.total() / (so.lambda[0].powi(2) * c * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LConstants {
    pub l1_prime: f64,
    pub l1: f64,
    pub l2_prime: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4_prime: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
}

impl LConstants {
    pub fn new(p: &ProcessMoments) -> Self {
        let (th, al) = (p.theta, p.alpha);
        let (t2, t4, s2) = (p.tau2(), p.tau4(), p.sigma2());
        let c = 1.0 - 2.0 * al * t2 + al * th * th;
        Self {
            l1_prime: s2,
            l1: 2.0 * al * al * th * t2 * s2,
            l2_prime: al * th * (t2 * c - al * (2.0 * t2 * t2 - 3.0 * t4)),
            l2: al * t4 + t2 * c,
            l3: 2.0 * al.powi(3) * t2 * s2,
            l4_prime: 2.0 * al.powi(3) * (th * th * t2 - t2 * t2 + t4),
            l4: 2.0 * al * al * th * t2,
            l5: al.powi(4) * t2,
            l6: al * t2 * s2 * (1.0 + al),
        }
    }

    pub fn matrix(&self, p: &ProcessMoments) -> SmallMatrix {
        let (th, al) = (p.theta, p.alpha);
        let l = self;
        let tail = |x: f64| [al * al * x, th * x, x, al * x, x];
        let row = |first: f64, rest: [f64; 5]| [first, rest[0], rest[1], rest[2], rest[3], rest[4]];
        SmallMatrix::from_rows(&[
            [l.l1_prime, l.l1, 0.0, 0.0, 0.0, 0.0],
            row(l.l2_prime, tail(l.l2)),
            [l.l3, 0.0, 0.0, 0.0, 0.0, 0.0],
            row(l.l4_prime, tail(l.l4)),
            row(al * th * l.l5, tail(l.l5)),
            [th * l.l6, al * l.l6, 0.0, 0.0, 0.0, 0.0],
        ])
        .expect("6x6")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MConstants {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
}

impl MConstants {
    pub fn new(p: &ProcessMoments) -> Self {
        let (th, al) = (p.theta, p.alpha);
        let (t2, t4, s2) = (p.tau2(), p.tau4(), p.sigma2());
        let a2 = al * al;
        Self {
            m1: s2 * (1.0 + t2 * (1.0 + a2)),
            m2: th * th * (1.0 + a2) * t2 + (1.0 - a2) * t2 * t2 + a2 * t4,
            m3: 2.0 * al * th * (1.0 + a2) * t2,
            m4: a2 * (1.0 + a2) * t2,
            m5: 2.0 * al * th * t2,
            m6: 2.0 * a2 * t2,
        }
    }
}

/// The ten mixed moments entering `Υ` and `ℓ`, in [`MixedMomentKey::COVARIANCE_KEYS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceMoments {
    pub mu00022: f64,
    pub mu01022: f64,
    pub mu10022: f64,
    pub mu00112: f64,
    pub mu02022: f64,
    pub mu11022: f64,
    pub mu01112: f64,
    pub mu03022: f64,
    pub mu12022: f64,
    pub mu02112: f64,
}

impl CovarianceMoments {
    pub fn new(p: &ProcessMoments, fo: &FourthOrderTables) -> Result<Self> {
        let mut v = [0.0; 10];
        for (slot, key) in v.iter_mut().zip(MixedMomentKey::COVARIANCE_KEYS) {
            *slot = mixed_moment(key, p, fo)?;
        }
        Ok(Self {
            mu00022: v[0],
            mu01022: v[1],
            mu10022: v[2],
            mu00112: v[3],
            mu02022: v[4],
            mu11022: v[5],
            mu01112: v[6],
            mu03022: v[7],
            mu12022: v[8],
            mu02112: v[9],
        })
    }
}

pub fn upsilon_matrix(
    p: &ProcessMoments,
    so: &SecondOrderTables,
    fo: &FourthOrderTables,
    mu: &CovarianceMoments,
) -> SmallMatrix {
    let [l0, l1, _] = so.lambda;
    let [d0, d1, d2, d3, _] = fo.delta;
    let theta_star = p.theta / p.one_minus_two_gamma();
    SmallMatrix::from_rows(&[
        [theta_star * l0, l0, 0.0, 0.0, 0.0, 0.0],
        [d0, d1, mu.mu00022, mu.mu01022, mu.mu10022, mu.mu00112],
        [l1, 0.0, 0.0, 0.0, 0.0, 0.0],
        [d1, d2, mu.mu01022, mu.mu02022, mu.mu11022, mu.mu01112],
        [d2, d3, mu.mu02022, mu.mu03022, mu.mu12022, mu.mu02112],
        [l0, l1, 0.0, 0.0, 0.0, 0.0],
    ])
    .expect("6x6")
}

pub fn ell_scalar(
    p: &ProcessMoments,
    so: &SecondOrderTables,
    fo: &FourthOrderTables,
    mu: &CovarianceMoments,
) -> f64 {
    let m = MConstants::new(p);
    let (th, al) = (p.theta, p.alpha);
    let [d0, d1, d2, _, _] = fo.delta;
    m.m1 * so.lambda[0]
        + m.m2 * d0
        + m.m3 * d1
        + m.m4 * d2
        + th * m.m5 * mu.mu00022
        + al * m.m5 * mu.mu10022
        + (1.0 + al) * m.m5 * mu.mu01022
        + m.m5 * mu.mu00112
        + m.m6 * mu.mu02022
        + al * m.m6 * mu.mu11022
        + m.m6 * mu.mu01112
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceStack {
    pub limits: LimitSet,
    pub kappa2: f64,
    pub omega2: f64,
    #[serde(rename = "Kbar")]
    pub kbar: SmallMatrix,
    #[serde(rename = "Gammabar")]
    pub gammabar: SmallMatrix,
    #[serde(rename = "K")]
    pub k: SmallMatrix,
    #[serde(rename = "Gamma")]
    pub gamma: SmallMatrix,
    #[serde(rename = "L")]
    pub l: SmallMatrix,
    #[serde(rename = "Upsilon")]
    pub upsilon: SmallMatrix,
    pub mixed_moments: CovarianceMoments,
    pub ell: f64,
    #[serde(rename = "SigmaML")]
    pub sigma_ml: SmallMatrix,
    #[serde(rename = "A")]
    pub a: SmallMatrix,
    #[serde(rename = "Sigma")]
    pub sigma: SmallMatrix,
    #[serde(rename = "gradF")]
    pub grad_f: SmallMatrix,
    #[serde(rename = "Psi")]
    pub psi_matrix: SmallMatrix,
    /// Lower-right entry of `Ψ`: the asymptotic variance of `√n γ̃ₙ`.
    pub psi: f64,
    /// Closed-form `ψ⁰` at `(θ, τ₂, τ₄, σ₂, σ₄)`; `None` when its denominator
    /// vanishes.
    pub psi0: Option<f64>,
    pub psi00: f64,
}

/// Assembles `Σ_ML`, `Σ = A Σ_ML Aᵀ` and `Ψ = ∇f Σ ∇fᵀ`, with the Jacobian
/// `∇f` (rows indexed by the components of `f`) taken at `(θ*, ϑ*)`.
pub fn sigma_psi(
    p: &ProcessMoments,
    so: &SecondOrderTables,
    fo: &FourthOrderTables,
) -> Result<CovarianceStack> {
    let lim = limits(p, so);
    let c = p.one_minus_two_gamma();
    let l0 = so.lambda[0];

    let kbar = KbarConstants::new(p).matrix();
    let gammabar = gamma_bar(so);
    let kappa2 = kappa_squared(p, so)?;

    let k = KConstants::new(p).matrix();
    let gamma = gamma_matrix(so, fo);
    let kg = hadamard(&k, &gamma)?;
    let omega2 = kg.total() / (l0 * l0 * c * c);

    let mu = CovarianceMoments::new(p, fo)?;
    let l = LConstants::new(p).matrix(p);
    let upsilon = upsilon_matrix(p, so, fo, &mu);
    let lu = hadamard(&l, &upsilon)?.mul_vec(&[1.0; 6])?;
    let ell = ell_scalar(p, so, fo, &mu);

    let mut sigma_ml = SmallMatrix::zeros(7, 7);
    for i in 0..6 {
        for j in 0..6 {
            sigma_ml[(i, j)] = kg[(i, j)];
        }
        sigma_ml[(i, 6)] = lu[i];
        sigma_ml[(6, i)] = lu[i];
    }
    sigma_ml[(6, 6)] = ell;

    let mut a = SmallMatrix::zeros(2, 7);
    for j in 0..6 {
        a[(0, j)] = 1.0 / (l0 * c);
        a[(1, j)] = p.theta / (l0 * c);
    }
    a[(1, 6)] = 1.0 / l0;
    let sigma = a.mul(&sigma_ml)?.mul(&a.transpose())?;

    if (1.0 - 2.0 * lim.theta_star * lim.theta_star).abs() < PATHOLOGICAL_TOLERANCE {
        return Err(RcarError::Pathological(format!(
            "θ* = {} is at ±1/√2, where the Yule-Walker correction is undefined",
            lim.theta_star
        )));
    }
    let grad_f = f_jacobian(lim.theta_star, lim.vartheta_star)?;
    let psi_matrix = grad_f.mul(&sigma)?.mul(&grad_f.transpose())?;

    let psi00 = psi0_numerator(p.theta, p.tau2(), p.tau4(), p.sigma2(), p.sigma4());
    let psi0 = psi0_closed_form(p.theta, p.tau2(), p.tau4(), p.sigma2(), p.sigma4())
        .ok()
        .map(|(v, _)| v);

    Ok(CovarianceStack {
        limits: lim,
        kappa2,
        omega2,
        kbar,
        gammabar,
        k,
        gamma,
        l,
        upsilon,
        mixed_moments: mu,
        ell,
        sigma_ml,
        a,
        sigma,
        grad_f,
        psi: psi_matrix[(1, 1)],
        psi_matrix,
        psi0,
        psi00,
    })
}

/// Numerator `ψ⁰₀` of the closed-form null variance.
pub fn psi0_numerator(theta: f64, tau2: f64, tau4: f64, sigma2: f64, sigma4: f64) -> f64 {
    let th2 = theta * theta;
    let th4 = th2 * th2;
    let th6 = th4 * th2;
    let s22 = sigma2 * sigma2;
    let a = sigma4
        * tau2
        * ((6.0 * th2 - 1.0) * tau2 * tau2
            + (8.0 * th4 - 9.0 * th2 + 1.0) * tau2
            + 2.0 * th2 * (th2 - 1.0).powi(2));
    let b = s22
        * tau2
        * (-36.0 * tau2 * tau2 * th2 + 6.0 * tau2 * tau2 - 12.0 * tau2 * th4 + 12.0 * tau2 * th2
            - 6.0 * th6
            + 17.0 * th4
            + 6.0 * tau4 * th2
            - 12.0 * th2
            - tau4
            + 1.0);
    let c = s22 * (th6 - th4 + th2 * tau4 - th2 - tau4 + 1.0);
    (tau2 + th2 - 1.0) * (a + b + c)
}

/// `(ψ⁰, ψ⁰₀)`: the asymptotic variance of `√n γ̃ₙ` when `α = 0`.
pub fn psi0_closed_form(
    theta: f64,
    tau2: f64,
    tau4: f64,
    sigma2: f64,
    sigma4: f64,
) -> Result<(f64, f64)> {
    let th2 = theta * theta;
    let fourth = th2 * th2 + 6.0 * th2 * tau2 + tau4 - 1.0;
    if fourth >= 0.0 {
        return Err(RcarError::Hypothesis(format!(
            "θ⁴ + 6θ²τ₂ + τ₄ = {} ≥ 1",
            fourth + 1.0
        )));
    }
    let boundary = 1.0 - 2.0 * th2;
    if boundary.abs() < PATHOLOGICAL_TOLERANCE {
        return Err(RcarError::Pathological(format!("θ = {theta} is at ±1/√2")));
    }
    let denominator = boundary * boundary * sigma2 * sigma2 * fourth;
    if denominator.abs() < PATHOLOGICAL_TOLERANCE {
        return Err(RcarError::Pathological("ψ⁰ denominator vanishes".into()));
    }
    let num = psi0_numerator(theta, tau2, tau4, sigma2, sigma4);
    Ok((num / denominator, num))
}
