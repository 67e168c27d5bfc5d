//! Nonadaptive internal-model output regulation for second-order nonlinear
//! uncertain systems, with the controlled Duffing oscillator as benchmark.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`]: small dense matrices (products, powers, LU, adjugate).
//! * [`internal_model`]: companion matrices, the Hurwitz pair `(M, N)`, `Xi(a)`, `Q`.
//! * [`mapping`]: Hankel coefficient estimation and the output map `chi`.
//! * [`controller`]: the `zeta` variable and the two feedback laws.
//! * [`duffing`]: plant, exosystem and analytic steady-state signals.
//! * [`sim`]: fixed-step closed-loop integration, logs and metrics.
//! * [`scenario`], [`sweep`], [`plot`], [`verify`]: configuration and tooling.

pub mod controller;
pub mod duffing;
pub mod gain;
pub mod internal_model;
pub mod mapping;
pub mod matrix;
pub mod plot;
mod roots;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod verify;

pub use roots::monic_roots;
