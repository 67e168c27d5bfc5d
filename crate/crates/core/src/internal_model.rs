//! Steady-state generators and the matrices of the generic internal model.
//!
//! Coefficient ordering: a `CoeffVector` `(a1, ..., an)` describes the
//! polynomial `s^n + a1 + a2 s + ... + an s^(n-1)`, constant term first. The
//! companion matrix therefore has bottom row `(-a1, ..., -an)`. The explicit
//! closed forms in [`crate::mapping::table1`] rely on this ordering.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{determinant, mat_pow, solve_linear, Matrix, MatrixError};
use crate::roots::monic_roots;

/// Largest real part tolerated on an internal-model eigenvalue.
pub const HURWITZ_MARGIN: f64 = -1e-6;
/// Real-part tolerance for the imaginary-axis admissibility check.
pub const ADMISSIBLE_REAL_TOL: f64 = 1e-8;
/// Minimum pairwise root distance for admissibility.
pub const ADMISSIBLE_SEPARATION: f64 = 1e-6;
/// `|det Xi|` below this is reported as singular.
pub const XI_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("coefficient vector must be non-empty and finite")]
    BadCoefficients,
    #[error("expected {expected} Hurwitz coefficients, got {got}")]
    HurwitzLength { expected: usize, got: usize },
    #[error("internal-model matrix is not Hurwitz: eigenvalue {re:+.6} {im:+.6}i")]
    NotHurwitz { re: f64, im: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Characteristic-polynomial coefficients of a steady-state signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoeffVector(Vec<f64>);

impl CoeffVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, ModelError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::BadCoefficients);
        }
        Ok(Self(coeffs))
    }

    /// Coefficients of `prod_k (s^2 + w_k^2)`, the admissible family for `n` even.
    pub fn from_frequencies(freqs: &[f64]) -> Result<Self, ModelError> {
        // ascending-power product, leading coefficient implicit
        let mut poly = vec![1.0];
        for &w in freqs {
            let mut next = vec![0.0; poly.len() + 2];
            for (k, &c) in poly.iter().enumerate() {
                next[k] += c * w * w;
                next[k + 2] += c;
            }
            poly = next;
        }
        poly.pop();
        Self::new(poly)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Roots of the characteristic polynomial.
    pub fn roots(&self) -> Vec<Complex64> {
        monic_roots(&self.0)
    }

    /// Distinct roots on the imaginary axis, checked numerically.
    pub fn is_admissible(&self) -> bool {
        let roots = self.roots();
        let on_axis = roots.iter().all(|r| r.re.abs() <= ADMISSIBLE_REAL_TOL);
        let distinct = roots.iter().enumerate().all(|(i, a)| {
            roots[i + 1..].iter().all(|b| (a - b).norm() >= ADMISSIBLE_SEPARATION)
        });
        on_axis && distinct
    }
}

/// Companion matrix `Phi(a)`: identity on the superdiagonal, bottom row `-a`.
pub fn companion_matrix(a: &CoeffVector) -> Matrix {
    companion_from_slice(a.as_slice())
}

pub(crate) fn companion_from_slice(a: &[f64]) -> Matrix {
    let n = a.len();
    let mut phi = Matrix::zeros(n, n);
    for r in 0..n.saturating_sub(1) {
        phi.set(r, r + 1, 1.0);
    }
    for (c, &ac) in a.iter().enumerate() {
        phi.set(n - 1, c, -ac);
    }
    phi
}

/// The Hurwitz pair `(M, N)` and output row `Gamma` of one internal model.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModelSpec {
    n: usize,
    m: Vec<f64>,
    gamma: Matrix,
    big_m: Matrix,
    big_n: Matrix,
}

impl InternalModelSpec {
    /// Dimension `n` of the steady-state generator (the filter has `2n` states).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// Row selector `(1, 0, ..., 0)` of length `n`.
    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    /// `2n x 2n` companion matrix with bottom row `(-m1, ..., -m2n)`.
    pub fn hurwitz_matrix(&self) -> &Matrix {
        &self.big_m
    }

    /// Input column `(0, ..., 0, 1)`.
    pub fn input_column(&self) -> &Matrix {
        &self.big_n
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        monic_roots(&self.m)
    }

    /// `M eta + N input`.
    pub fn filter_derivative(&self, eta: &[f64], input: f64) -> Result<Vec<f64>, MatrixError> {
        let mut d = self.big_m.mul_vec(eta)?;
        if let Some(last) = d.last_mut() {
            *last += input;
        }
        Ok(d)
    }
}

/// Builds `(M, N, Gamma)` from `2n` coefficients, rejecting non-Hurwitz choices.
pub fn hurwitz_pair(m: &[f64]) -> Result<InternalModelSpec, ModelError> {
    if m.is_empty() || !m.len().is_multiple_of(2) {
        return Err(ModelError::HurwitzLength { expected: 2 * (m.len() / 2).max(1), got: m.len() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::BadCoefficients);
    }
    let n = m.len() / 2;
    if let Some(bad) = monic_roots(m).into_iter().max_by(|a, b| a.re.total_cmp(&b.re)) {
        if bad.re > HURWITZ_MARGIN {
            return Err(ModelError::NotHurwitz { re: bad.re, im: bad.im });
        }
    }
    let mut big_n = Matrix::zeros(2 * n, 1);
    big_n.set(2 * n - 1, 0, 1.0);
    let mut gamma = Matrix::zeros(1, n);
    gamma.set(0, 0, 1.0);
    Ok(InternalModelSpec {
        n,
        m: m.to_vec(),
        gamma,
        big_m: companion_from_slice(m),
        big_n,
    })
}

/// `Xi(a)` together with its determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub matrix: Matrix,
    pub determinant: f64,
}

impl XiMatrix {
    pub fn is_singular(&self) -> bool {
        !(self.determinant.abs() >= XI_SINGULAR_TOL)
    }
}

/// `Phi^(2n) + sum_j m_j Phi^(j-1)`, i.e. the internal-model polynomial evaluated at `Phi(a)`.
pub(crate) fn xi_from_slices(a: &[f64], m: &[f64]) -> Matrix {
    let phi = companion_from_slice(a);
    let n = a.len();
    let mut xi = mat_pow(&phi, m.len() as u32).expect("companion matrix is square");
    let mut power = Matrix::identity(n);
    for (j, &mj) in m.iter().enumerate() {
        if j > 0 {
            power = &power * &phi;
        }
        for (x, p) in xi.data_mut().iter_mut().zip(power.as_slice()) {
            *x += mj * p;
        }
    }
    xi
}

pub fn xi_matrix(a: &CoeffVector, m: &[f64]) -> Result<XiMatrix, ModelError> {
    check_m_len(a.n(), m)?;
    let matrix = xi_from_slices(a.as_slice(), m);
    let det = determinant(&matrix)?;
    Ok(XiMatrix { matrix, determinant: det })
}

fn check_m_len(n: usize, m: &[f64]) -> Result<(), ModelError> {
    if m.len() != 2 * n {
        return Err(ModelError::HurwitzLength { expected: 2 * n, got: m.len() });
    }
    Ok(())
}

/// `Q = col(Gamma Xi^-1 Phi^(j-1))`, `j = 1..2n`.
pub fn q_matrix(a: &CoeffVector, m: &[f64]) -> Result<Matrix, ModelError> {
    let n = a.n();
    check_m_len(n, m)?;
    let xi = xi_from_slices(a.as_slice(), m);
    let phi = companion_matrix(a);
    // Gamma Xi^-1 is the first row of Xi^-1: solve Xi^T r = e1.
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let first = solve_linear(&xi.transpose(), &e1)?;
    let mut row = Matrix::row(&first)?;
    let mut q = Matrix::zeros(2 * n, n);
    for j in 0..2 * n {
        if j > 0 {
            row = &row * &phi;
        }
        for c in 0..n {
            q.set(j, c, row.get(0, c));
        }
    }
    Ok(q)
}

/// Frobenius norm of `M Q - Q Phi(a) + N Gamma`.
pub fn sylvester_residual(
    spec: &InternalModelSpec,
    q: &Matrix,
    a: &CoeffVector,
) -> Result<f64, ModelError> {
    let n = spec.n();
    if a.n() != n || q.rows() != 2 * n || q.cols() != n {
        return Err(MatrixError::Dimension(format!(
            "spec dimension {n}, Q {}x{}, coefficients {}",
            q.rows(),
            q.cols(),
            a.n()
        ))
        .into());
    }
    let phi = companion_matrix(a);
    let lhs = spec.hurwitz_matrix().try_mul(q)?;
    let rhs = q.try_mul(&phi)?.try_sub(&spec.input_column().try_mul(spec.gamma())?)?;
    Ok(lhs.try_sub(&rhs)?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    const M1: [f64; 4] = [10.0, 18.0, 15.0, 6.0];
    const M2: [f64; 8] = [1.0, 5.0, 13.0, 22.0, 26.0, 22.0, 13.0, 5.0];

    fn cv(v: &[f64]) -> CoeffVector {
        CoeffVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn companion_examples() {
        let phi = companion_matrix(&cv(&[0.25, 0.0]));
        assert_eq!(phi, Matrix::from_rows(&[&[0.0, 1.0], &[-0.25, 0.0]]).unwrap());

        let s: f64 = 0.5;
        let phi = companion_matrix(&cv(&[9.0 * s.powi(4), 0.0, 10.0 * s * s, 0.0]));
        assert_eq!(phi.row_slice(3), &[-0.5625, -0.0, -2.5, -0.0]);
        assert_eq!(phi.row_slice(0), &[0.0, 1.0, 0.0, 0.0]);

        assert_eq!(companion_matrix(&cv(&[0.0])), Matrix::from_rows(&[&[-0.0]]).unwrap());
    }

    #[test]
    fn companion_characteristic_polynomial() {
        // det(sI - Phi) against s^n + a_n s^(n-1) + ... + a_1 at 2n+1 sample points
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in 1..=6 {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let phi = companion_matrix(&cv(&a));
            for k in 0..(2 * n + 1) {
                let s = -1.5 + 0.37 * k as f64;
                let shifted = &Matrix::identity(n).scale(s) - &phi;
                let det = determinant(&shifted).unwrap();
                let target: f64 =
                    s.powi(n as i32) + a.iter().enumerate().map(|(j, c)| c * s.powi(j as i32)).sum::<f64>();
                assert_abs_diff_eq!(det, target, epsilon = 1e-9 * (1.0 + target.abs()));
            }
        }
    }

    #[test]
    fn frequencies_build_the_expected_polynomials() {
        let s = 0.5;
        assert_eq!(CoeffVector::from_frequencies(&[s]).unwrap().as_slice(), &[0.25, 0.0]);
        let a2 = CoeffVector::from_frequencies(&[s, 3.0 * s]).unwrap();
        assert_eq!(a2.as_slice(), &[0.5625, 0.0, 2.5, 0.0]);
        assert!(a2.is_admissible());
        assert!(!cv(&[1.0, 2.0]).is_admissible()); // s^2 + 2s + 1: repeated root -1
        assert!(!cv(&[1.0]).is_admissible());
        assert!(cv(&[0.0]).is_admissible());
        // (s^2+1)^2 has repeated roots on the axis
        assert!(!CoeffVector::from_frequencies(&[1.0, 1.0]).unwrap().is_admissible());
    }

    #[test]
    fn hurwitz_pair_examples() {
        let spec = hurwitz_pair(&M1).unwrap();
        assert_eq!(spec.n(), 2);
        assert_eq!(spec.hurwitz_matrix().row_slice(3), &[-10.0, -18.0, -15.0, -6.0]);
        assert_eq!(spec.input_column().as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(spec.gamma().as_slice(), &[1.0, 0.0]);
        let eig = spec.eigenvalues();
        for t in [(-1.0, 1.0), (-1.0, -1.0), (-2.0, 1.0), (-2.0, -1.0)] {
            assert!(eig.iter().any(|z| (z - Complex64::new(t.0, t.1)).norm() < 1e-9));
        }

        let spec2 = hurwitz_pair(&M2).unwrap();
        assert_eq!(spec2.n(), 4);
        assert!(spec2.eigenvalues().iter().all(|z| z.re < HURWITZ_MARGIN));

        match hurwitz_pair(&[-1.0, 0.0]) {
            Err(ModelError::NotHurwitz { re, .. }) => assert_abs_diff_eq!(re, 1.0, epsilon = 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        // marginal: s^2 + 1
        assert!(matches!(hurwitz_pair(&[1.0, 0.0]), Err(ModelError::NotHurwitz { .. })));
        assert!(matches!(hurwitz_pair(&[1.0, 2.0, 3.0]), Err(ModelError::HurwitzLength { .. })));
    }

    #[test]
    fn xi_first_row_matches_closed_form() {
        let a1 = 0.25;
        let xi = xi_matrix(&cv(&[a1, 0.0]), &M1).unwrap();
        assert_abs_diff_eq!(xi.matrix.get(0, 0), 6.3125, epsilon = 1e-14);
        assert_abs_diff_eq!(xi.matrix.get(0, 1), 16.5, epsilon = 1e-14);
        assert!(!xi.is_singular());

        let xi = xi_matrix(&cv(&[0.0]), &[1.0, 2.0]).unwrap();
        assert_eq!(xi.matrix.as_slice(), &[1.0]);
        assert!(xi_matrix(&cv(&[0.0]), &M1).is_err());
    }

    #[test]
    fn xi_nonsingular_for_random_admissible_coefficients() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let w1 = rng.gen_range(0.1..2.0);
            let w2 = w1 + rng.gen_range(0.05..3.0);
            let a1 = CoeffVector::from_frequencies(&[w1]).unwrap();
            let a2 = CoeffVector::from_frequencies(&[w1, w2]).unwrap();
            assert!(!xi_matrix(&a1, &M1).unwrap().is_singular());
            assert!(!xi_matrix(&a2, &M2).unwrap().is_singular());
        }
    }

    #[test]
    fn q_matrix_structure_and_sylvester_identity() {
        let a = cv(&[0.0]);
        let q = q_matrix(&a, &[1.0, 2.0]).unwrap();
        assert_eq!(q.as_slice(), &[1.0, 0.0]);

        let s: f64 = 0.5;
        let cases: [(CoeffVector, &[f64], f64); 2] = [
            (cv(&[s * s, 0.0]), &M1, 1e-10),
            (cv(&[9.0 * s.powi(4), 0.0, 10.0 * s * s, 0.0]), &M2, 1e-9),
        ];
        for (a, m, tol) in cases {
            let spec = hurwitz_pair(m).unwrap();
            let q = q_matrix(&a, m).unwrap();
            assert_eq!((q.rows(), q.cols()), (2 * a.n(), a.n()));
            assert!(sylvester_residual(&spec, &q, &a).unwrap() <= tol);
            let xi = xi_matrix(&a, m).unwrap().matrix;
            let prod = &q.block(a.n(), a.n()) * &xi;
            for (x, y) in prod.as_slice().iter().zip(Matrix::identity(a.n()).as_slice()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sylvester_residual_of_zero_q_is_unit() {
        let spec = hurwitz_pair(&M1).unwrap();
        let r = sylvester_residual(&spec, &Matrix::zeros(4, 2), &cv(&[0.25, 0.0])).unwrap();
        assert_eq!(r, 1.0);
        assert!(sylvester_residual(&spec, &Matrix::zeros(3, 2), &cv(&[0.25, 0.0])).is_err());
        assert!(sylvester_residual(&spec, &Matrix::zeros(4, 2), &cv(&[0.25])).is_err());
    }

    #[test]
    fn filter_derivative_uses_companion_and_input_column() {
        let spec = hurwitz_pair(&M1).unwrap();
        assert_eq!(spec.filter_derivative(&[0.0; 4], 1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            spec.filter_derivative(&[1.0, 0.0, 0.0, 0.0], 0.0).unwrap(),
            vec![0.0, 0.0, 0.0, -10.0]
        );
        assert!(spec.filter_derivative(&[0.0; 3], 0.0).is_err());
    }
}
