//! Small dense linear algebra and the chi-square(1) tail.
//!
//! Every matrix the model needs is at most 7x7, so [`SmallMatrix`] stores its
//! entries inline and all kernels are plain loops: Gaussian elimination with
//! partial pivoting for solves, repeated squaring for powers, and the
//! characteristic polynomial (Faddeev-LeVerrier) plus simultaneous root
//! iteration (Durand-Kerner) for spectral radii.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{RcarError, Result};

pub const MAX_DIM: usize = 8;

/// Pivots smaller than this make a solve fail.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_ROOT_SWEEPS: usize = 1000;
/// Roots closer than this (relative to the scaled polynomial) are merged as
/// one multiple root before taking moduli.
const ROOT_CLUSTER_RADIUS: f64 = 1e-4;

/// Row-major dense matrix with at most [`MAX_DIM`] rows and columns.
#[derive(Clone, Copy, PartialEq)]
pub struct SmallMatrix {
    rows: usize,
    cols: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

impl SmallMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows <= MAX_DIM && cols <= MAX_DIM,
            "SmallMatrix is limited to {MAX_DIM}x{MAX_DIM}"
        );
        Self {
            rows,
            cols,
            data: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if nrows > MAX_DIM || ncols > MAX_DIM {
            return Err(RcarError::Domain(format!(
                "{nrows}x{ncols} exceeds the {MAX_DIM}x{MAX_DIM} limit"
            )));
        }
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(RcarError::Domain("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(RcarError::Domain(format!("non-finite entry at ({i}, {j})")));
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Builds a matrix from its columns.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &SmallMatrix) -> Result<SmallMatrix> {
        if self.cols != rhs.rows {
            return Err(RcarError::Domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(RcarError::Domain(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    pub fn sub(&self, rhs: &SmallMatrix) -> Result<SmallMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &SmallMatrix) -> Result<SmallMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> SmallMatrix {
        let mut out = *self;
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Sum of all entries, i.e. `1ᵀ A 1`.
    pub fn total(&self) -> f64 {
        self.data[..self.rows * MAX_DIM]
            .chunks(MAX_DIM)
            .map(|r| r[..self.cols].iter().sum::<f64>())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self[(i, j)].abs());
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    fn zip_with(&self, rhs: &SmallMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SmallMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(RcarError::Domain(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = *self;
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = f(self[(i, j)], rhs[(i, j)]);
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for SmallMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * MAX_DIM + j]
    }
}

impl IndexMut<(usize, usize)> for SmallMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * MAX_DIM + j]
    }
}

impl fmt::Debug for SmallMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Serialized as a list of rows.
impl Serialize for SmallMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(&self.data[i * MAX_DIM..i * MAX_DIM + self.cols])?;
        }
        seq.end()
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `what` names the system in the error returned for a singular matrix.
pub fn solve(a: &SmallMatrix, b: &[f64], what: &'static str) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(RcarError::Domain(format!(
            "{what}: expected a square system, got {}x{} with rhs of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let mut m = *a;
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap_or(col);
        if m[(pivot, col)].abs() <= PIVOT_TOLERANCE {
            return Err(RcarError::numeric(
                what,
                format!(
                    "singular matrix (pivot {:.3e} in column {col})",
                    m[(pivot, col)]
                ),
            ));
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        for i in col + 1..n {
            let factor = m[(i, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= factor * m[(col, j)];
            }
            x[i] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (x[i] - tail) / m[(i, i)];
    }
    Ok(x)
}

/// Solves `(I - A) x = b`.
pub fn solve_resolvent(a: &SmallMatrix, b: &[f64], what: &'static str) -> Result<Vec<f64>> {
    let lhs = SmallMatrix::identity(a.rows()).sub(a)?;
    solve(&lhs, b, what)
}

pub fn hadamard(a: &SmallMatrix, b: &SmallMatrix) -> Result<SmallMatrix> {
    a.zip_with(b, |x, y| x * y)
}

/// `A^k` by repeated squaring; `A^0 = I`.
pub fn mat_power(a: &SmallMatrix, mut k: u64) -> Result<SmallMatrix> {
    if !a.is_square() {
        return Err(RcarError::Domain(
            "matrix power of a non-square matrix".into(),
        ));
    }
    let mut result = SmallMatrix::identity(a.rows());
    let mut base = *a;
    while k > 0 {
        if k & 1 == 1 {
            result = result.mul(&base)?;
        }
        k >>= 1;
        if k > 0 {
            base = base.mul(&base)?;
        }
    }
    Ok(result)
}

/// Coefficients `c[0..n]` of `det(λI - A) = λⁿ + c[n-1] λⁿ⁻¹ + ... + c[0]`,
/// via the Faddeev-LeVerrier recursion. The returned vector has length n + 1
/// with `c[n] = 1`.
pub fn characteristic_polynomial(a: &SmallMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(RcarError::Domain(
            "characteristic polynomial of a non-square matrix".into(),
        ));
    }
    let n = a.rows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = SmallMatrix::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = a.mul(&mk)?;
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        mk = next;
        coeffs[n - k] = -a.mul(&mk)?.trace() / k as f64;
    }
    Ok(coeffs)
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn horner_abs(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// All complex roots of a monic real polynomial (`coeffs[n] = 1`) by
/// Durand-Kerner iteration. Clusters of nearly equal roots are collapsed to
/// their centroid, refined on the matching derivative.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    if (coeffs[n] - 1.0).abs() > 1e-15 {
        return Err(RcarError::Domain("polynomial must be monic".into()));
    }
    if n == 1 {
        return Ok(vec![Complex64::new(-coeffs[0], 0.0)]);
    }
    let bound = 1.0 + coeffs[..n].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) * (bound / seed.norm().powi(k as i32 + 1)).min(bound))
        .collect();

    let converged = |roots: &[Complex64]| {
        roots.iter().all(|&z| {
            horner(coeffs, z).norm() <= ROOT_RESIDUAL_TOLERANCE * horner_abs(coeffs, z.norm())
        })
    };

    let mut done = false;
    for _ in 0..MAX_ROOT_SWEEPS {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(f64::EPSILON, 0.0);
            }
            let step = horner(coeffs, zi) / denom;
            roots[i] = zi - step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= 1e-15 * bound {
            done = true;
            break;
        }
    }
    if !done && !converged(&roots) {
        return Err(RcarError::numeric(
            "spectral_radius",
            format!("root iteration did not converge after {MAX_ROOT_SWEEPS} sweeps"),
        ));
    }

    Ok(collapse_clusters(coeffs, roots))
}

fn collapse_clusters(coeffs: &[f64], roots: Vec<Complex64>) -> Vec<Complex64> {
    let scale = 1.0 + roots.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let radius = ROOT_CLUSTER_RADIUS * scale;
    let mut assigned = vec![false; roots.len()];
    let mut out = Vec::with_capacity(roots.len());
    for i in 0..roots.len() {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        // Grow the cluster transitively.
        let mut k = 0;
        while k < members.len() {
            let zk = roots[members[k]];
            for j in 0..roots.len() {
                if !assigned[j] && (roots[j] - zk).norm() < radius {
                    assigned[j] = true;
                    members.push(j);
                }
            }
            k += 1;
        }
        let m = members.len();
        if m == 1 {
            out.push(roots[i]);
            continue;
        }
        let mut centre = members.iter().map(|&j| roots[j]).sum::<Complex64>() / m as f64;
        // A root of multiplicity m is a simple root of the (m-1)-th derivative.
        let mut d = coeffs.to_vec();
        for _ in 0..m - 1 {
            d = derivative(&d);
        }
        let dd = derivative(&d);
        for _ in 0..8 {
            let slope = horner(&dd, centre);
            if slope.norm() == 0.0 {
                break;
            }
            let step = horner(&d, centre) / slope;
            if !step.re.is_finite() || !step.im.is_finite() || step.norm() > radius {
                break;
            }
            centre -= step;
        }
        out.extend(std::iter::repeat_n(centre, m));
    }
    out
}

/// Largest eigenvalue modulus of a square matrix.
///
/// A root of multiplicity `m` is only resolved to about `ε^(1/m)`.
pub fn spectral_radius(a: &SmallMatrix) -> Result<f64> {
    if !a.is_square() || a.rows() == 0 {
        return Err(RcarError::Domain(
            "spectral radius needs a non-empty square matrix".into(),
        ));
    }
    let s = a.max_abs();
    if s == 0.0 {
        return Ok(0.0);
    }
    let coeffs = characteristic_polynomial(&a.scale(1.0 / s))?;
    let roots = polynomial_roots(&coeffs)?;
    Ok(s * roots.iter().fold(0.0f64, |m, z| m.max(z.norm())))
}

/// Binomial coefficient `C(n, k)` as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `P(χ²₁ > s) = 2 (1 - Φ(√s))`.
pub fn chisq1_tail(s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(RcarError::Domain(format!(
            "chi-square statistic must be non-negative, got {s}"
        )));
    }
    Ok(erfc((s / 2.0).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> SmallMatrix {
        let mut m = SmallMatrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve(&SmallMatrix::identity(3), &[1.0, 2.0, 3.0], "id").unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let x = solve(&diag(&[2.0, 4.0]), &[2.0, 2.0], "diag").unwrap();
        assert_eq!(x, vec![1.0, 0.5]);
    }

    #[test]
    fn singular_solve_names_the_system() {
        let a = SmallMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let err = solve(&a, &[1.0, 1.0], "second moments").unwrap_err();
        assert!(err.to_string().contains("second moments"), "{err}");
    }

    #[test]
    fn spectral_radius_of_simple_matrices() {
        assert!((spectral_radius(&SmallMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-9);
        assert!((spectral_radius(&diag(&[0.5, -0.2, 0.1])).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(spectral_radius(&SmallMatrix::zeros(4, 4)).unwrap(), 0.0);
        // rotation by 90°: eigenvalues ±i
        let rot = SmallMatrix::from_rows(&[[0.0, -2.0], [2.0, 0.0]]).unwrap();
        assert!((spectral_radius(&rot).unwrap() - 2.0).abs() < 1e-12);
        // Jordan block: defective double eigenvalue 0.7
        let jordan = SmallMatrix::from_rows(&[[0.7, 1.0], [0.0, 0.7]]).unwrap();
        assert!((spectral_radius(&jordan).unwrap() - 0.7).abs() < 1e-9);
        let spread: Vec<f64> = (0..8).map(|i| 0.9 - 0.2 * i as f64).collect();
        assert!((spectral_radius(&diag(&spread)).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn characteristic_polynomial_of_diagonal() {
        // (λ-1)(λ-2) = λ² - 3λ + 2
        let c = characteristic_polynomial(&diag(&[1.0, 2.0])).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-14 && (c[1] + 3.0).abs() < 1e-14 && c[2] == 1.0);
    }

    #[test]
    fn hadamard_products() {
        let a = SmallMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = SmallMatrix::from_rows(&[[2.0, 0.0], [0.0, 2.0]]).unwrap();
        let ones = SmallMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        assert_eq!(
            hadamard(&a, &SmallMatrix::zeros(2, 2)).unwrap(),
            SmallMatrix::zeros(2, 2)
        );
        assert_eq!(
            hadamard(&a, &b).unwrap(),
            SmallMatrix::from_rows(&[[2.0, 0.0], [0.0, 8.0]]).unwrap()
        );
        assert!(hadamard(&a, &SmallMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn matrix_powers() {
        let a = SmallMatrix::from_rows(&[[0.3, 0.5], [0.1, 0.2]]).unwrap();
        assert_eq!(mat_power(&a, 0).unwrap(), SmallMatrix::identity(2));
        assert_eq!(mat_power(&a, 1).unwrap(), a);
        assert_eq!(mat_power(&diag(&[2.0]), 3).unwrap(), diag(&[8.0]));
        let mut brute = SmallMatrix::identity(2);
        for _ in 0..7 {
            brute = brute.mul(&a).unwrap();
        }
        let fast = mat_power(&a, 7).unwrap();
        assert!(fast.sub(&brute).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn chisq_tail_values() {
        assert_eq!(chisq1_tail(0.0).unwrap(), 1.0);
        assert!((chisq1_tail(3.841458820694124).unwrap() - 0.05).abs() < 1e-6);
        assert!((chisq1_tail(1.0).unwrap() - 0.3173).abs() < 1e-4);
        assert!(chisq1_tail(-1.0).is_err());
        assert!(chisq1_tail(f64::NAN).is_err());
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(2.0) - 4.677_734_981_047_266e-3).abs() < 1e-17);
        assert!((erfc(0.5) - 0.479_500_122_186_953_5).abs() < 1e-15);
        assert!((erfc(0.0) - 1.0).abs() < 1e-16);
        assert!((erfc(-1.0) + erfc(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn serializes_as_rows() {
        let a = SmallMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), "[[1.0,2.0],[3.0,4.0]]");
    }
}
