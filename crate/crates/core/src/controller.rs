//! Output-regulation feedback laws built on the generic internal models.
//!
//! Both laws act on the composite variable `zeta = x2 - chi1(eta1) + rho(e) e`.
//! The nonadaptive law uses a fixed high gain `k0`; the adaptive variant
//! replaces it with `k_hat`, driven by `k_hat' = k(zeta) zeta^2`.

use thiserror::Error;

use crate::gain::Polynomial;
use crate::internal_model::InternalModelSpec;
use crate::mapping::{chi, EtaState, MappingConfig, MappingError};
use crate::matrix::MatrixError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("k0 must be positive and finite, got {0}")]
    BadK0(f64),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Gain functions `rho`, `k` and the constant `k0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    pub rho: Polynomial,
    pub k: Polynomial,
    pub k0: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            rho: Polynomial::new(vec![10.0, 0.0, 0.0, 0.0, 4.0]),
            k: Polynomial::new(vec![1.0, 0.0, 1.0]),
            k0: 1.0,
        }
    }
}

impl GainConfig {
    pub fn new(rho: Polynomial, k: Polynomial, k0: f64) -> Result<Self, ControllerError> {
        if !(k0 > 0.0) || !k0.is_finite() {
            return Err(ControllerError::BadK0(k0));
        }
        Ok(Self { rho, k, k0 })
    }

    /// Conditions under which the gains meet their `>= 1` lower bounds.
    pub fn bound_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.rho.bounded_below_by(1.0) {
            out.push(format!("rho(s) = {} is not provably >= 1", self.rho));
        }
        if !self.k.bounded_below_by(1.0) {
            out.push(format!("k(s) = {} is not provably >= 1", self.k));
        }
        if self.k0 < 1.0 {
            out.push(format!("k0 = {} is below 1", self.k0));
        }
        out
    }
}

/// Filter states of both internal models, plus `k_hat` in the adaptive variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub eta1: EtaState,
    pub eta2: EtaState,
    pub k_hat: Option<f64>,
}

/// `x2 - chi1(eta1) + rho(e) e`.
pub fn zeta(
    x2: f64,
    eta1: &EtaState,
    e: f64,
    gains: &GainConfig,
    map1: &MappingConfig,
) -> Result<f64, ControllerError> {
    Ok(zeta_from_chi(x2, chi(eta1, map1)?, e, gains))
}

pub(crate) fn zeta_from_chi(x2: f64, chi1: f64, e: f64, gains: &GainConfig) -> f64 {
    x2 - chi1 + gains.rho.eval(e) * e
}

/// `u = -k0 k(zeta) zeta + chi2(eta2)`.
pub fn control_nonadaptive(
    zeta_val: f64,
    eta2: &EtaState,
    gains: &GainConfig,
    map2: &MappingConfig,
) -> Result<f64, ControllerError> {
    Ok(-gains.k0 * gains.k.eval(zeta_val) * zeta_val + chi(eta2, map2)?)
}

/// `(u, k_hat')` with `u = -k_hat k(zeta) zeta + chi2(eta2)` and `k_hat' = k(zeta) zeta^2`.
pub fn control_adaptive(
    zeta_val: f64,
    eta2: &EtaState,
    k_hat: f64,
    gains: &GainConfig,
    map2: &MappingConfig,
) -> Result<(f64, f64), ControllerError> {
    let kz = gains.k.eval(zeta_val);
    let u = -k_hat * kz * zeta_val + chi(eta2, map2)?;
    Ok((u, kz * zeta_val * zeta_val))
}

/// `(M1 eta1 + N1 x2, M2 eta2 + N2 u)`.
pub fn eta_derivatives(
    eta1: &EtaState,
    eta2: &EtaState,
    x2: f64,
    u: f64,
    spec1: &InternalModelSpec,
    spec2: &InternalModelSpec,
) -> Result<(Vec<f64>, Vec<f64>), ControllerError> {
    Ok((
        spec1.filter_derivative(eta1.as_slice(), x2)?,
        spec2.filter_derivative(eta2.as_slice(), u)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duffing::{DEFAULT_M1, DEFAULT_M2};
    use crate::internal_model::hurwitz_pair;

    fn maps() -> (MappingConfig, MappingConfig) {
        (
            MappingConfig::new(DEFAULT_M1.to_vec(), 0.1, Some(vec![false, true])).unwrap(),
            MappingConfig::new(DEFAULT_M2.to_vec(), 0.1, Some(vec![false, true, false, true])).unwrap(),
        )
    }

    #[test]
    fn zeta_examples() {
        let (m1, _) = maps();
        let g = GainConfig::default();
        let z = EtaState::zeros(2);
        assert_eq!(zeta(0.0, &z, 1.0, &g, &m1).unwrap(), 14.0);
        assert_eq!(zeta(0.0, &z, 0.0, &g, &m1).unwrap(), 0.0);
        assert_eq!(zeta(1.0, &z, 0.0, &g, &m1).unwrap(), 1.0);
        assert!(zeta(1.0, &EtaState::zeros(4), 0.0, &g, &m1).is_err());
    }

    #[test]
    fn nonadaptive_examples() {
        let (_, m2) = maps();
        let g = GainConfig::default();
        let z = EtaState::zeros(4);
        assert_eq!(control_nonadaptive(0.0, &z, &g, &m2).unwrap(), 0.0);
        assert_eq!(control_nonadaptive(1.0, &z, &g, &m2).unwrap(), -2.0);
        assert_eq!(control_nonadaptive(-1.0, &z, &g, &m2).unwrap(), 2.0);
    }

    #[test]
    fn adaptive_examples() {
        let (_, m2) = maps();
        let g = GainConfig::default();
        let z = EtaState::zeros(4);
        assert_eq!(control_adaptive(0.0, &z, 3.0, &g, &m2).unwrap(), (0.0, 0.0));
        assert_eq!(control_adaptive(1.0, &z, 0.0, &g, &m2).unwrap().1, 2.0);
        assert_eq!(control_adaptive(2.0, &z, 1.0, &g, &m2).unwrap(), (-10.0, 20.0));
        // update is never negative
        for zv in [-3.0, -0.1, 0.0, 0.4, 5.0] {
            assert!(control_adaptive(zv, &z, 1.0, &g, &m2).unwrap().1 >= 0.0);
        }
    }

    #[test]
    fn eta_derivative_examples() {
        let s1 = hurwitz_pair(&DEFAULT_M1).unwrap();
        let s2 = hurwitz_pair(&DEFAULT_M2).unwrap();
        let (d1, d2) = eta_derivatives(&EtaState::zeros(2), &EtaState::zeros(4), 1.0, 0.0, &s1, &s2).unwrap();
        assert_eq!(d1, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(d2, vec![0.0; 8]);
        let e1 = EtaState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let (d1, _) = eta_derivatives(&e1, &EtaState::zeros(4), 0.0, 0.0, &s1, &s2).unwrap();
        assert_eq!(d1, vec![0.0, 0.0, 0.0, -10.0]);
        assert!(eta_derivatives(&EtaState::zeros(4), &EtaState::zeros(4), 0.0, 0.0, &s1, &s2).is_err());
    }

    #[test]
    fn gain_validation() {
        assert!(GainConfig::default().bound_warnings().is_empty());
        assert!(GainConfig::new(Polynomial::constant(1.0), Polynomial::constant(1.0), 0.0).is_err());
        let g = GainConfig::new("1 + s".parse().unwrap(), Polynomial::constant(1.0), 0.5).unwrap();
        assert_eq!(g.bound_warnings().len(), 2);
    }

    #[test]
    fn control_is_locally_lipschitz() {
        let (m1, m2) = maps();
        let g = GainConfig::default();
        let eta1 = EtaState::new(vec![0.3, -0.2, 0.1, 0.05]).unwrap();
        let eta2 = EtaState::new(vec![0.4, 0.1, -0.3, 0.2, 0.1, -0.1, 0.05, 0.02]).unwrap();
        let base = {
            let z = zeta(0.2, &eta1, 0.1, &g, &m1).unwrap();
            control_nonadaptive(z, &eta2, &g, &m2).unwrap()
        };
        let delta = 1e-7;
        let mut bumped = eta2.as_slice().to_vec();
        bumped[3] += delta;
        let eta2b = EtaState::new(bumped).unwrap();
        let z = zeta(0.2 + delta, &eta1, 0.1 + delta, &g, &m1).unwrap();
        let u = control_nonadaptive(z, &eta2b, &g, &m2).unwrap();
        assert!((u - base).abs() < 1e4 * delta, "{} vs {}", u, base);
    }

    /// Zero internal-model maps and a double integrator: the law reduces to pure stabilisation.
    #[test]
    fn stabilises_a_double_integrator() {
        let g = GainConfig::default();
        let (mut x1, mut x2) = (1.0f64, -1.0f64);
        let h = 1e-3;
        let f = |x1: f64, x2: f64| {
            let z = zeta_from_chi(x2, 0.0, x1, &g);
            let u = -g.k0 * g.k.eval(z) * z;
            (x2, u)
        };
        for _ in 0..20_000 {
            let k1 = f(x1, x2);
            let k2 = f(x1 + 0.5 * h * k1.0, x2 + 0.5 * h * k1.1);
            let k3 = f(x1 + 0.5 * h * k2.0, x2 + 0.5 * h * k2.1);
            let k4 = f(x1 + h * k3.0, x2 + h * k3.1);
            x1 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            x2 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        let z = zeta_from_chi(x2, 0.0, x1, &g);
        assert!(x1.abs() < 1e-3 && z.abs() < 1e-3, "e = {x1}, zeta = {z}");
    }
}
