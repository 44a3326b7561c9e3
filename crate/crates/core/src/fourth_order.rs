//! Fourth-order moments: `V₀..V₄`, the matrices `H` and `G`, the vector `R`,
//! `Δ = (E[η^a X⁴])_{a ≤ 4}` and the extension `Λ⁵ = (E[η^a X²])_{a ≤ 4}`.

use serde::Serialize;

use crate::error::{RcarError, Result};
use crate::model::{MomentSet, ProcessMoments};
use crate::numerics::{mat_power, solve_resolvent, spectral_radius, SmallMatrix};
use crate::second_order::SecondOrderTables;

/// `V_k = (τ_k, ..., τ_{k+4})`, for `k = 0..4`.
pub fn v_vectors(tau: &MomentSet) -> [[f64; 5]; 5] {
    std::array::from_fn(|k| std::array::from_fn(|i| tau.moment(i + k)))
}

fn combine5(v: &[[f64; 5]; 5], coeffs: [f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| (0..5).map(|k| coeffs[k] * v[k][i]).sum())
}

pub fn h_matrix(theta: f64, alpha: f64, tau: &MomentSet) -> SmallMatrix {
    let v = v_vectors(tau);
    let (t, a) = (theta, alpha);
    let cols = [
        combine5(&v, [t.powi(4), 4.0 * t.powi(3), 6.0 * t * t, 4.0 * t, 1.0]),
        combine5(
            &v,
            [
                4.0 * a * t.powi(3),
                12.0 * a * t * t,
                12.0 * a * t,
                4.0 * a,
                0.0,
            ],
        ),
        combine5(
            &v,
            [6.0 * a * a * t * t, 12.0 * a * a * t, 6.0 * a * a, 0.0, 0.0],
        ),
        combine5(&v, [4.0 * a.powi(3) * t, 4.0 * a.powi(3), 0.0, 0.0, 0.0]),
        combine5(&v, [a.powi(4), 0.0, 0.0, 0.0, 0.0]),
    ];
    SmallMatrix::from_columns(&cols).expect("5x5")
}

pub fn g_matrix(theta: f64, alpha: f64, tau: &MomentSet) -> SmallMatrix {
    let v = v_vectors(tau);
    let (t, a) = (theta, alpha);
    let cols = [
        combine5(&v, [t * t, 2.0 * t, 1.0, 0.0, 0.0]),
        combine5(&v, [2.0 * a * t, 2.0 * a, 0.0, 0.0, 0.0]),
        combine5(&v, [a * a, 0.0, 0.0, 0.0, 0.0]),
        [0.0; 5],
        [0.0; 5],
    ];
    SmallMatrix::from_columns(&cols).expect("5x5")
}

#[derive(Debug, Clone, Serialize)]
pub struct FourthOrderTables {
    #[serde(rename = "V")]
    pub v: [[f64; 5]; 5],
    #[serde(rename = "H")]
    pub h: SmallMatrix,
    #[serde(rename = "G")]
    pub g: SmallMatrix,
    #[serde(rename = "R")]
    pub r: [f64; 5],
    /// `δ_a = E[η_t^a X_t⁴]`.
    #[serde(rename = "Delta")]
    pub delta: [f64; 5],
    /// `E[η_t^a X_t²]` for `a = 0..4`.
    #[serde(rename = "Lambda5")]
    pub lambda5: [f64; 5],
    pub rho_h: f64,
}

pub fn build_fourth_order(p: &ProcessMoments, so: &SecondOrderTables) -> Result<FourthOrderTables> {
    let h = h_matrix(p.theta, p.alpha, &p.tau);
    let g = g_matrix(p.theta, p.alpha, &p.tau);
    let rho_h = spectral_radius(&h)?;
    if rho_h >= 1.0 {
        return Err(RcarError::Hypothesis(format!(
            "fourth moments do not exist (ρ(H) = {rho_h:.6} ≥ 1)"
        )));
    }
    let v = v_vectors(&p.tau);
    let [l0, l1, l2] = so.lambda;
    let r: [f64; 5] =
        std::array::from_fn(|i| 6.0 * (l0 * g[(i, 0)] + l1 * g[(i, 1)] + l2 * g[(i, 2)]));
    let rhs: Vec<f64> = (0..5)
        .map(|i| p.sigma2() * r[i] + p.sigma4() * v[0][i])
        .collect();
    let delta = solve_resolvent(&h, &rhs, "(I - H) Δ = σ₂ R + σ₄ V₀")?;
    let lam5 = solve_resolvent(&g, &v[0], "(I - G) Λ⁵ = σ₂ V₀")?;
    Ok(FourthOrderTables {
        v,
        h,
        g,
        r,
        delta: std::array::from_fn(|i| delta[i]),
        lambda5: std::array::from_fn(|i| p.sigma2() * lam5[i]),
        rho_h,
    })
}

/// `V_k = Hᵏ V₀`.
pub fn lemma2_sequence(p: &ProcessMoments, k: u64) -> Result<[f64; 5]> {
    let h = h_matrix(p.theta, p.alpha, &p.tau);
    let v = mat_power(&h, k)?.mul_vec(&v_vectors(&p.tau)[0])?;
    Ok(std::array::from_fn(|i| v[i]))
}

/// `W_{l,k} = Hᵏ G^{l-k} V₀`, for `1 ≤ k < l`.
pub fn lemma3_sequence(p: &ProcessMoments, l: u64, k: u64) -> Result<[f64; 5]> {
    if k == 0 || k >= l {
        return Err(RcarError::Domain(format!(
            "need 1 ≤ k < l, got l = {l}, k = {k}"
        )));
    }
    let h = h_matrix(p.theta, p.alpha, &p.tau);
    let g = g_matrix(p.theta, p.alpha, &p.tau);
    let w = mat_power(&g, l - k)?.mul_vec(&v_vectors(&p.tau)[0])?;
    let w = mat_power(&h, k)?.mul_vec(&w)?;
    Ok(std::array::from_fn(|i| w[i]))
}
