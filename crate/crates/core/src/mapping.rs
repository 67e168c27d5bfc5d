//! Nonadaptive coefficient estimation from internal-model filter states.
//!
//! At steady state the filter state `eta` of a `2n`-dimensional internal model
//! satisfies the Hankel relation `Theta(eta) a + col(eta_{n+1}, ..., eta_{2n}) = 0`
//! for the unknown characteristic coefficients `a`. Solving it through a
//! smooth, globally defined surrogate of `Theta^-1` gives the coefficient
//! estimate `a_hat(eta)` and the output map `chi(eta) = Gamma Xi(a_hat) col(eta_1..eta_n)`
//! without any adaptation dynamics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::internal_model::{xi_from_slices, CoeffVector};
use crate::matrix::{adjugate, determinant, Matrix};

/// Regularisation threshold used by the Duffing benchmark.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("filter state must have {expected} finite entries, got {got}")]
    EtaLength { expected: usize, got: usize },
    #[error("filter state contains a non-finite entry")]
    NonFinite,
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("zero mask has length {got}, expected {expected}")]
    MaskLength { expected: usize, got: usize },
    #[error("Hurwitz coefficient vector must have even, non-zero length, got {0}")]
    CoefficientCount(usize),
}

/// Internal-model filter state `eta` in `R^(2n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EtaState(Vec<f64>);

impl EtaState {
    pub fn new(values: Vec<f64>) -> Result<Self, MappingError> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(MappingError::EtaLength {
                expected: 2 * (values.len() / 2).max(1),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MappingError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; 2 * n])
    }

    /// Half the state dimension.
    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Where the smooth step `Psi` is evaluated inside the scale factor
/// `det / (det^2 + Psi(s))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `s = 1 + det^2 - eps^2`.
    #[default]
    Literal,
    /// `s = det^2 / eps^2`, a transition band spanning `0 <= |det| <= eps`.
    Scaled,
}

impl Regularizer {
    pub fn scale(self, det: f64, epsilon: f64) -> f64 {
        let d2 = det * det;
        let arg = match self {
            Regularizer::Literal => 1.0 + d2 - epsilon * epsilon,
            Regularizer::Scaled => d2 / (epsilon * epsilon),
        };
        det / (d2 + bump_psi(arg))
    }
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regularizer::Literal => "literal",
            Regularizer::Scaled => "scaled",
        })
    }
}

impl std::str::FromStr for Regularizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(Regularizer::Literal),
            "scaled" => Ok(Regularizer::Scaled),
            other => Err(format!("unknown regularizer `{other}` (expected literal or scaled)")),
        }
    }
}

/// Parameters of one nonparametric output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    m: Vec<f64>,
    epsilon: f64,
    zero_mask: Option<Vec<bool>>,
    #[serde(default)]
    regularizer: Regularizer,
}

impl MappingConfig {
    pub fn new(m: Vec<f64>, epsilon: f64, zero_mask: Option<Vec<bool>>) -> Result<Self, MappingError> {
        if m.is_empty() || !m.len().is_multiple_of(2) {
            return Err(MappingError::CoefficientCount(m.len()));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MappingError::Epsilon(epsilon));
        }
        let n = m.len() / 2;
        if let Some(mask) = &zero_mask {
            if mask.len() != n {
                return Err(MappingError::MaskLength { expected: n, got: mask.len() });
            }
        }
        Ok(Self { m, epsilon, zero_mask, regularizer: Regularizer::Literal })
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn n(&self) -> usize {
        self.m.len() / 2
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn zero_mask(&self) -> Option<&[bool]> {
        self.zero_mask.as_deref()
    }

    fn check_eta(&self, eta: &EtaState) -> Result<(), MappingError> {
        if eta.as_slice().len() != self.m.len() {
            return Err(MappingError::EtaLength { expected: self.m.len(), got: eta.as_slice().len() });
        }
        Ok(())
    }
}

/// `Theta[r][c] = eta_{r+c}` (0-indexed); uses the first `2n - 1` entries.
pub fn hankel(eta: &EtaState) -> Matrix {
    hankel_from_slice(eta.as_slice())
}

fn hankel_from_slice(eta: &[f64]) -> Matrix {
    let n = eta.len() / 2;
    Matrix::from_fn(n, n, |r, c| eta[r + c])
}

/// `exp(-1/s)` for `s > 0`, zero otherwise.
pub fn bump_kappa(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step from 1 (at `s <= 0`) down to 0 (at `s >= 1`).
pub fn bump_psi(s: f64) -> f64 {
    let on = bump_kappa(1.0 - s);
    let off = bump_kappa(s);
    on / (off + on)
}

/// Scalar `det / (det^2 + Psi(1 + det^2 - eps^2))` multiplying the adjugate.
pub fn regularized_scale(det: f64, epsilon: f64) -> f64 {
    Regularizer::Literal.scale(det, epsilon)
}

/// Globally defined surrogate of `Theta^-1`: equal to the inverse whenever
/// `det^2 >= eps^2` and to the zero matrix when `det = 0`.
pub fn regularized_inverse(theta: &Matrix, epsilon: f64) -> Matrix {
    let det = determinant(theta).expect("regularized_inverse needs a square matrix");
    let adj = adjugate(theta).expect("regularized_inverse needs a square matrix");
    adj.scale(regularized_scale(det, epsilon))
}

/// Coefficient estimate together with the Hankel determinant it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub coeffs: CoeffVector,
    pub det_theta: f64,
}

/// `a_hat = -O(Theta(eta)) col(eta_{n+1}, ..., eta_{2n})`, masked entries forced to zero.
pub fn estimate_coeffs(eta: &EtaState, cfg: &MappingConfig) -> Result<CoeffVector, MappingError> {
    Ok(estimate_with_det(eta, cfg)?.coeffs)
}

pub fn estimate_with_det(eta: &EtaState, cfg: &MappingConfig) -> Result<Estimate, MappingError> {
    cfg.check_eta(eta)?;
    let (coeffs, det_theta) = estimate_raw(eta.as_slice(), cfg);
    let coeffs = CoeffVector::new(coeffs).map_err(|_| MappingError::NonFinite)?;
    Ok(Estimate { coeffs, det_theta })
}

fn estimate_raw(eta: &[f64], cfg: &MappingConfig) -> (Vec<f64>, f64) {
    let n = eta.len() / 2;
    let theta = hankel_from_slice(eta);
    let det = determinant(&theta).expect("Hankel matrix is square");
    let adj = adjugate(&theta).expect("Hankel matrix is square");
    let scale = cfg.regularizer.scale(det, cfg.epsilon);
    let tail = &eta[n..];
    let mut a: Vec<f64> = adj
        .mul_vec(tail)
        .expect("tail has n entries")
        .into_iter()
        .map(|v| -scale * v)
        .collect();
    if let Some(mask) = &cfg.zero_mask {
        for (ai, &zero) in a.iter_mut().zip(mask) {
            if zero {
                *ai = 0.0;
            }
        }
    }
    (a, det)
}

/// Everything the controller and logger need from one evaluation of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiEvaluation {
    pub value: f64,
    pub a_hat: Vec<f64>,
    pub det_theta: f64,
}

/// `chi(eta) = Gamma Xi(a_hat(eta)) col(eta_1, ..., eta_n)`.
pub fn chi(eta: &EtaState, cfg: &MappingConfig) -> Result<f64, MappingError> {
    Ok(chi_evaluation(eta, cfg)?.value)
}

pub fn chi_evaluation(eta: &EtaState, cfg: &MappingConfig) -> Result<ChiEvaluation, MappingError> {
    cfg.check_eta(eta)?;
    Ok(chi_from_slice(eta.as_slice(), cfg))
}

pub(crate) fn chi_from_slice(eta: &[f64], cfg: &MappingConfig) -> ChiEvaluation {
    let n = eta.len() / 2;
    let (a_hat, det_theta) = estimate_raw(eta, cfg);
    let xi = xi_from_slices(&a_hat, &cfg.m);
    // Gamma picks the first row
    let value = xi.row_slice(0).iter().zip(&eta[..n]).map(|(x, e)| x * e).sum();
    ChiEvaluation { value, a_hat, det_theta }
}

/// Explicit closed forms for the Duffing benchmark dimensions (`n = 2` and `n = 4`,
/// with the structurally zero coefficients dropped). They are written out term
/// by term and serve as independent checks on the generic construction.
pub mod table1 {
    use super::{bump_psi, MappingError};
    use crate::internal_model::CoeffVector;

    fn require(eta: &[f64], len: usize) -> Result<(), MappingError> {
        if eta.len() != len {
            return Err(MappingError::EtaLength { expected: len, got: eta.len() });
        }
        Ok(())
    }

    fn require_m(m: &[f64], len: usize) -> Result<(), MappingError> {
        if m.len() != len {
            return Err(MappingError::CoefficientCount(m.len()));
        }
        Ok(())
    }

    fn gain(det: f64, epsilon: f64) -> f64 {
        det / (det * det + bump_psi(1.0 + det * det - epsilon * epsilon))
    }

    /// `eta_{1,1}(a^2 - m3 a + m1) + eta_{1,2}(m2 - a m4)` with `a = a_hat[0]`.
    pub fn chi1(eta: &[f64], a_hat: &CoeffVector, m: &[f64]) -> Result<f64, MappingError> {
        require(eta, 4)?;
        require_m(m, 4)?;
        let a = a_hat.as_slice()[0];
        Ok(eta[0] * (a * a - m[2] * a + m[0]) + eta[1] * (m[1] - a * m[3]))
    }

    pub fn chi2(eta: &[f64], a_hat: &CoeffVector, m: &[f64]) -> Result<f64, MappingError> {
        require(eta, 8)?;
        require_m(m, 8)?;
        let a = a_hat.as_slice();
        let (a1, a3) = (a[0], a[2]);
        let (e1, e2, e3, e4) = (eta[0], eta[1], eta[2], eta[3]);
        let m = |k: usize| m[k - 1];
        Ok(e3 * (m(3) + a1 * a3 - a3 * m(5) + a3 * (a1 - a3 * a3) - m(7) * (a1 - a3 * a3))
            + e2 * (m(2) - a1 * m(6) + a1 * a3 * m(8))
            + e1 * (a1 * a1 - a1 * a3 * a3 + m(7) * a1 * a3 - m(5) * a1 + m(1))
            - e4 * (a3 * m(6) - m(4) + m(8) * (a1 - a3 * a3)))
    }

    /// `(a_hat_{1,1}, 0)`.
    pub fn ahat1(eta: &[f64], epsilon: f64) -> Result<CoeffVector, MappingError> {
        require(eta, 4)?;
        let e = |k: usize| eta[k - 1];
        let det = e(1) * e(3) - e(2) * e(2);
        let a11 = gain(det, epsilon) * (e(2) * e(4) - e(3) * e(3));
        CoeffVector::new(vec![a11, 0.0]).map_err(|_| MappingError::NonFinite)
    }

    /// `(a_hat_{2,1}, 0, a_hat_{2,3}, 0)`.
    pub fn ahat2(eta: &[f64], epsilon: f64) -> Result<CoeffVector, MappingError> {
        require(eta, 8)?;
        let e = |k: usize| eta[k - 1];
        let det = det4_hankel(eta);
        let g = gain(det, epsilon);

        let a21 = e(5)
            * (e(7) * e(4).powi(2) - 2.0 * e(4) * e(5) * e(6) + e(5).powi(3) - e(3) * e(7) * e(5)
                + e(3) * e(6).powi(2))
            - e(8)
                * (e(6) * e(3).powi(2) - 2.0 * e(3) * e(4) * e(5) + e(4).powi(3) - e(2) * e(6) * e(4)
                    + e(2) * e(5).powi(2))
            - e(7)
                * (-e(7) * e(3).powi(2) + e(6) * e(3) * e(4) + e(3) * e(5).powi(2)
                    - e(4).powi(2) * e(5)
                    + e(2) * e(7) * e(4)
                    - e(2) * e(6) * e(5))
            - e(6)
                * (-e(4).powi(2) * e(6) + e(4) * e(5).powi(2) + e(3) * e(7) * e(4)
                    - e(3) * e(5) * e(6)
                    - e(2) * e(7) * e(5)
                    + e(2) * e(6).powi(2));

        let a23 = e(8)
            * (-e(6) * e(2).powi(2) + e(5) * e(2) * e(3) + e(2) * e(4).powi(2) - e(3).powi(2) * e(4)
                + e(1) * e(6) * e(3)
                - e(1) * e(5) * e(4))
            - e(5)
                * (-e(7) * e(3).powi(2) + e(6) * e(3) * e(4) + e(3) * e(5).powi(2)
                    - e(4).powi(2) * e(5)
                    + e(2) * e(7) * e(4)
                    - e(2) * e(6) * e(5))
            - e(6)
                * (e(4).powi(3) - e(1) * e(4) * e(7) + e(1) * e(5) * e(6) + e(2) * e(3) * e(7)
                    - e(2) * e(4) * e(6)
                    - e(3) * e(4) * e(5))
            + e(7)
                * (e(7) * e(2).powi(2) - 2.0 * e(2) * e(4) * e(5) + e(3) * e(4).powi(2)
                    + e(1) * e(5).powi(2)
                    - e(1) * e(3) * e(7));

        CoeffVector::new(vec![g * a21, 0.0, g * a23, 0.0]).map_err(|_| MappingError::NonFinite)
    }

    /// Laplace expansion of the 4x4 Hankel determinant along the first row.
    fn det4_hankel(eta: &[f64]) -> f64 {
        let t = |r: usize, c: usize| eta[r + c];
        let det3 = |skip: usize| {
            let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
            let m = |r: usize, k: usize| t(r, cols[k]);
            m(1, 0) * (m(2, 1) * m(3, 2) - m(2, 2) * m(3, 1))
                - m(1, 1) * (m(2, 0) * m(3, 2) - m(2, 2) * m(3, 0))
                + m(1, 2) * (m(2, 0) * m(3, 1) - m(2, 1) * m(3, 0))
        };
        (0..4).map(|c| if c % 2 == 0 { 1.0 } else { -1.0 } * t(0, c) * det3(c)).sum()
    }
}
