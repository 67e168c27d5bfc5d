//! Controlled Duffing oscillator driven by a rotational exosystem.
//!
//! ```text
//! x1' = x2
//! x2' = -c3 x2 - c1 x1 - c2 x1^3 + u + d,   d = v2
//! v'  = [[0, sigma], [-sigma, 0]] v,         e = x1 - v1
//! ```
//!
//! The regulator equations have the closed-form solution
//! `x1_ss = v1`, `x2_ss = sigma v2` and
//! `u_ss = -sigma^2 v1 + c3 sigma v2 + c1 v1 + c2 v1^3 - v2`, whose
//! characteristic polynomials are `s^2 + sigma^2` and
//! `(s^2 + sigma^2)(s^2 + 9 sigma^2)`.

use serde::{Deserialize, Serialize};

use crate::internal_model::{q_matrix, CoeffVector, InternalModelSpec, ModelError};
use crate::mapping::EtaState;

pub const C_RANGE: (f64, f64) = (-2.0, 2.0);
pub const SIGMA_RANGE: (f64, f64) = (0.1, 2.0);
pub const V0_RANGE: (f64, f64) = (-3.0, 3.0);

/// Hurwitz coefficients of the velocity internal model.
pub const DEFAULT_M1: [f64; 4] = [10.0, 18.0, 15.0, 6.0];
/// Hurwitz coefficients of the input internal model.
pub const DEFAULT_M2: [f64; 8] = [1.0, 5.0, 13.0, 22.0, 26.0, 22.0, 13.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub sigma: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        Self { c1: -2.0, c2: 1.5, c3: 0.5, sigma: 0.5 }
    }
}

impl DuffingParams {
    /// Messages for every parameter outside the benchmark boxes.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(C_RANGE.0..=C_RANGE.1).contains(&value) {
                out.push(format!("{name} = {value} outside [{}, {}]", C_RANGE.0, C_RANGE.1));
            }
        }
        if !(SIGMA_RANGE.0..=SIGMA_RANGE.1).contains(&self.sigma) {
            out.push(format!(
                "sigma = {} outside [{}, {}]",
                self.sigma, SIGMA_RANGE.0, SIGMA_RANGE.1
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExoState {
    pub v1: f64,
    pub v2: f64,
}

impl ExoState {
    pub fn norm(&self) -> f64 {
        self.v1.hypot(self.v2)
    }

    /// Exact flow of the rotation over time `t`.
    pub fn rotated(&self, sigma: f64, t: f64) -> ExoState {
        let (s, c) = (sigma * t).sin_cos();
        ExoState { v1: self.v1 * c + self.v2 * s, v2: -self.v1 * s + self.v2 * c }
    }
}

/// A second-order plant `x1' = x2`, `x2' = f(x, v) + b(v) u` with exosystem-generated disturbance.
pub trait SecondOrderPlant {
    fn drift(&self, x: PlantState, v: ExoState) -> f64;
    fn input_gain(&self, v: ExoState) -> f64;
}

impl SecondOrderPlant for DuffingParams {
    fn drift(&self, x: PlantState, v: ExoState) -> f64 {
        -self.c3 * x.x2 - self.c1 * x.x1 - self.c2 * x.x1.powi(3) + v.v2
    }

    fn input_gain(&self, _v: ExoState) -> f64 {
        1.0
    }
}

/// `(x2, -c3 x2 - c1 x1 - c2 x1^3 + u + d)`.
pub fn duffing_derivative(x: PlantState, u: f64, d: f64, p: &DuffingParams) -> (f64, f64) {
    (x.x2, -p.c3 * x.x2 - p.c1 * x.x1 - p.c2 * x.x1.powi(3) + u + d)
}

pub fn exo_derivative(v: ExoState, sigma: f64) -> (f64, f64) {
    (sigma * v.v2, -sigma * v.v1)
}

/// Steady-state `(x1, x2, u)` on the output-zeroing manifold.
pub fn regulator_solution(v: ExoState, p: &DuffingParams) -> (f64, f64, f64) {
    let s = p.sigma;
    let u = -s * s * v.v1 + p.c3 * s * v.v2 + p.c1 * v.v1 + p.c2 * v.v1.powi(3) - v.v2;
    (v.v1, s * v.v2, u)
}

/// Which steady-state signal an internal model reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// `x2_ss = sigma v2`, generator dimension 2.
    Velocity,
    /// `u_ss`, generator dimension 4.
    Input,
}

impl Channel {
    pub fn dimension(self) -> usize {
        match self {
            Channel::Velocity => 2,
            Channel::Input => 4,
        }
    }
}

/// Characteristic coefficients `a1(sigma) = (sigma^2, 0)`, `a2(sigma) = (9 sigma^4, 0, 10 sigma^2, 0)`.
pub fn true_coeffs(channel: Channel, sigma: f64) -> CoeffVector {
    let s2 = sigma * sigma;
    let v = match channel {
        Channel::Velocity => vec![s2, 0.0],
        Channel::Input => vec![9.0 * s2 * s2, 0.0, 10.0 * s2, 0.0],
    };
    CoeffVector::new(v).expect("finite sigma")
}

/// The steady-state signal and its first `n - 1` time derivatives along the exosystem flow.
pub fn steady_state_xi(v: ExoState, p: &DuffingParams, channel: Channel) -> Vec<f64> {
    let s = p.sigma;
    let (v1, v2) = (v.v1, v.v2);
    match channel {
        Channel::Velocity => vec![s * v2, -s * s * v1],
        Channel::Input => {
            let (c1, c2, c3) = (p.c1, p.c2, p.c3);
            let (s2, s3, s4, s5) = (s * s, s.powi(3), s.powi(4), s.powi(5));
            let u0 = c1 * v1 + c2 * v1.powi(3) + c3 * s * v2 - s2 * v1 - v2;
            let u1 = c1 * s * v2 + 3.0 * c2 * s * v1 * v1 * v2 - c3 * s2 * v1 - s3 * v2 + s * v1;
            let u2 = -c1 * s2 * v1 + c2 * (-3.0 * s2 * v1.powi(3) + 6.0 * s2 * v1 * v2 * v2)
                - c3 * s3 * v2
                + s4 * v1
                + s2 * v2;
            let u3 = -c1 * s3 * v2 + c2 * (-21.0 * s3 * v1 * v1 * v2 + 6.0 * s3 * v2.powi(3))
                + c3 * s4 * v1
                + s5 * v2
                - s3 * v1;
            vec![u0, u1, u2, u3]
        }
    }
}

/// Exact steady-state internal-model state `theta = Q xi`.
pub fn steady_state_theta(
    v: ExoState,
    p: &DuffingParams,
    channel: Channel,
    spec: &InternalModelSpec,
) -> Result<EtaState, ModelError> {
    let a = true_coeffs(channel, p.sigma);
    let q = q_matrix(&a, spec.m())?;
    let xi = steady_state_xi(v, p, channel);
    let theta = q.mul_vec(&xi)?;
    Ok(EtaState::new(theta).expect("Q xi has 2n finite entries"))
}
