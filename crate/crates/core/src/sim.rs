//! Fixed-step closed-loop simulation of the Duffing benchmark.
//!
//! The composite state is `(x1, x2, v1, v2, eta1[4], eta2[8], k_hat)`. The
//! control input is an algebraic function of the state and is re-evaluated at
//! every Runge-Kutta stage.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::controller::{zeta_from_chi, GainConfig};
use crate::duffing::{exo_derivative, true_coeffs, Channel, DuffingParams, ExoState, PlantState, SecondOrderPlant};
use crate::internal_model::{hurwitz_pair, InternalModelSpec, ModelError};
use crate::mapping::{chi_from_slice, MappingConfig, MappingError};
use crate::scenario::{ExtraDisturbance, Mode, ScenarioConfig};

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_BOUND: f64 = 1e9;
/// Fraction of the horizon, counted from the end, used for asymptotic metrics.
pub const TRAILING_FRACTION: f64 = 0.2;

pub const CSV_HEADER: &str = "t,x1,x2,e,zeta,u,a11,a21,a23,detT1,detT2,khat";

const DIM: usize = 17;
const X1: usize = 0;
const X2: usize = 1;
const V1: usize = 2;
const V2: usize = 3;
const ETA1: usize = 4;
const ETA2: usize = 8;
const KHAT: usize = 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("closed loop diverged at t = {time}")]
    Diverged { time: f64, log: Box<SimLog> },
    #[error("invalid internal model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid mapping: {0}")]
    Mapping(#[from] MappingError),
    #[error("invalid state: {0}")]
    State(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub x: PlantState,
    pub v: ExoState,
    pub eta1: [f64; 4],
    pub eta2: [f64; 8],
    pub k_hat: Option<f64>,
}

impl ClosedLoopState {
    /// Number of integrated components.
    pub fn dimension(&self) -> usize {
        16 + usize::from(self.k_hat.is_some())
    }

    fn to_flat(&self) -> [f64; DIM] {
        let mut s = [0.0; DIM];
        s[X1] = self.x.x1;
        s[X2] = self.x.x2;
        s[V1] = self.v.v1;
        s[V2] = self.v.v2;
        s[ETA1..ETA1 + 4].copy_from_slice(&self.eta1);
        s[ETA2..ETA2 + 8].copy_from_slice(&self.eta2);
        s[KHAT] = self.k_hat.unwrap_or(0.0);
        s
    }

    fn from_flat(s: &[f64; DIM], adaptive: bool) -> Self {
        let mut eta1 = [0.0; 4];
        let mut eta2 = [0.0; 8];
        eta1.copy_from_slice(&s[ETA1..ETA1 + 4]);
        eta2.copy_from_slice(&s[ETA2..ETA2 + 8]);
        Self {
            x: PlantState { x1: s[X1], x2: s[X2] },
            v: ExoState { v1: s[V1], v2: s[V2] },
            eta1,
            eta2,
            k_hat: adaptive.then_some(s[KHAT]),
        }
    }

    fn is_bounded(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND)
    }
}

/// Signals computed from a state without integrating.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignals {
    pub e: f64,
    pub zeta: f64,
    pub u: f64,
    pub a_hat1: Vec<f64>,
    pub a_hat2: Vec<f64>,
    pub det_theta1: f64,
    pub det_theta2: f64,
    pub k_hat_rate: f64,
}

/// The assembled closed loop: plant, exosystem, internal models and feedback law.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub plant: DuffingParams,
    pub disturbance: ExtraDisturbance,
    pub spec1: InternalModelSpec,
    pub spec2: InternalModelSpec,
    pub map1: MappingConfig,
    pub map2: MappingConfig,
    pub gains: GainConfig,
    pub mode: Mode,
}

impl ClosedLoop {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        Ok(Self {
            plant: cfg.plant,
            disturbance: cfg.disturbance,
            spec1: hurwitz_pair(&cfg.m1)?,
            spec2: hurwitz_pair(&cfg.m2)?,
            map1: MappingConfig::new(cfg.m1.clone(), cfg.epsilon, cfg.mask1.clone())?.with_regularizer(cfg.regularizer),
            map2: MappingConfig::new(cfg.m2.clone(), cfg.epsilon, cfg.mask2.clone())?.with_regularizer(cfg.regularizer),
            gains: cfg.gains.clone(),
            mode: cfg.sim.mode,
        })
    }

    pub fn initial_state(&self, cfg: &ScenarioConfig) -> Result<ClosedLoopState, SimError> {
        let eta1: [f64; 4] = cfg
            .eta1_0
            .as_slice()
            .try_into()
            .map_err(|_| SimError::State(format!("eta1 needs 4 entries, got {}", cfg.eta1_0.len())))?;
        let eta2: [f64; 8] = cfg
            .eta2_0
            .as_slice()
            .try_into()
            .map_err(|_| SimError::State(format!("eta2 needs 8 entries, got {}", cfg.eta2_0.len())))?;
        Ok(ClosedLoopState {
            x: cfg.x0,
            v: cfg.v0,
            eta1,
            eta2,
            k_hat: (self.mode == Mode::Adaptive).then_some(cfg.k_hat0),
        })
    }

    fn signals_flat(&self, s: &[f64; DIM]) -> ControlSignals {
        let chi1 = chi_from_slice(&s[ETA1..ETA1 + 4], &self.map1);
        let chi2 = chi_from_slice(&s[ETA2..ETA2 + 8], &self.map2);
        let e = s[X1] - s[V1];
        let zeta = zeta_from_chi(s[X2], chi1.value, e, &self.gains);
        let kz = self.gains.k.eval(zeta);
        let (u, k_hat_rate) = match self.mode {
            Mode::Nonadaptive => (-self.gains.k0 * kz * zeta + chi2.value, 0.0),
            Mode::Adaptive => (-s[KHAT] * kz * zeta + chi2.value, kz * zeta * zeta),
            Mode::OpenLoop => (0.0, 0.0),
        };
        ControlSignals {
            e,
            zeta,
            u,
            a_hat1: chi1.a_hat,
            a_hat2: chi2.a_hat,
            det_theta1: chi1.det_theta,
            det_theta2: chi2.det_theta,
            k_hat_rate,
        }
    }

    pub fn signals(&self, state: &ClosedLoopState) -> ControlSignals {
        self.signals_flat(&state.to_flat())
    }

    fn derivative(&self, t: f64, s: &[f64; DIM]) -> [f64; DIM] {
        let sig = self.signals_flat(s);
        let x = PlantState { x1: s[X1], x2: s[X2] };
        let v = ExoState { v1: s[V1], v2: s[V2] };
        let extra = self.disturbance.amplitude * (self.disturbance.frequency * t).sin();
        let mut d = [0.0; DIM];
        d[X1] = s[X2];
        d[X2] = self.plant.drift(x, v) + self.plant.input_gain(v) * sig.u + extra;
        let (dv1, dv2) = exo_derivative(v, self.plant.sigma);
        d[V1] = dv1;
        d[V2] = dv2;
        filter(&self.spec1, &s[ETA1..ETA1 + 4], s[X2], &mut d[ETA1..ETA1 + 4]);
        filter(&self.spec2, &s[ETA2..ETA2 + 8], sig.u, &mut d[ETA2..ETA2 + 8]);
        d[KHAT] = sig.k_hat_rate;
        d
    }

    /// One classical Runge-Kutta step from time `t`.
    pub fn rk4_step(&self, t: f64, state: &ClosedLoopState, h: f64) -> Result<ClosedLoopState, SimError> {
        let adaptive = state.k_hat.is_some();
        let s = state.to_flat();
        let k1 = self.derivative(t, &s);
        let k2 = self.derivative(t + 0.5 * h, &axpy(&s, 0.5 * h, &k1));
        let k3 = self.derivative(t + 0.5 * h, &axpy(&s, 0.5 * h, &k2));
        let k4 = self.derivative(t + h, &axpy(&s, h, &k3));
        let mut next = s;
        for i in 0..DIM {
            next[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !adaptive {
            next[KHAT] = 0.0;
        }
        let out = ClosedLoopState::from_flat(&next, adaptive);
        if !out.is_bounded() {
            return Err(SimError::Diverged { time: t + h, log: Box::default() });
        }
        Ok(out)
    }

    fn record(&self, t: f64, state: &ClosedLoopState) -> Record {
        let sig = self.signals(state);
        Record {
            t,
            x1: state.x.x1,
            x2: state.x.x2,
            e: sig.e,
            zeta: sig.zeta,
            u: sig.u,
            a11: sig.a_hat1[0],
            a21: sig.a_hat2[0],
            a23: sig.a_hat2[2],
            det_theta1: sig.det_theta1,
            det_theta2: sig.det_theta2,
            k_hat: state.k_hat,
        }
    }
}

fn filter(spec: &InternalModelSpec, eta: &[f64], input: f64, out: &mut [f64]) {
    let m = spec.hurwitz_matrix();
    let n = eta.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = m.row_slice(r).iter().zip(eta).map(|(a, b)| a * b).sum();
    }
    out[n - 1] += input;
}

fn axpy(s: &[f64; DIM], h: f64, k: &[f64; DIM]) -> [f64; DIM] {
    let mut out = *s;
    for i in 0..DIM {
        out[i] += h * k[i];
    }
    out
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub e: f64,
    pub zeta: f64,
    pub u: f64,
    pub a11: f64,
    pub a21: f64,
    pub a23: f64,
    pub det_theta1: f64,
    pub det_theta2: f64,
    pub k_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub records: Vec<Record>,
}

impl SimLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// CSV with the fixed header; 17 significant digits; `khat` left empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 260);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            for v in [r.t, r.x1, r.x2, r.e, r.zeta, r.u, r.a11, r.a21, r.a23, r.det_theta1, r.det_theta2] {
                let _ = write!(out, "{v:.16e},");
            }
            if let Some(k) = r.k_hat {
                let _ = write!(out, "{k:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => return Err(format!("unexpected header {other:?}")),
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 12 {
                return Err(format!("row {}: expected 12 fields, got {}", i + 1, fields.len()));
            }
            let num = |k: usize| -> Result<f64, String> {
                fields[k].parse().map_err(|_| format!("row {}: bad number `{}`", i + 1, fields[k]))
            };
            records.push(Record {
                t: num(0)?,
                x1: num(1)?,
                x2: num(2)?,
                e: num(3)?,
                zeta: num(4)?,
                u: num(5)?,
                a11: num(6)?,
                a21: num(7)?,
                a23: num(8)?,
                det_theta1: num(9)?,
                det_theta2: num(10)?,
                k_hat: if fields[11].is_empty() { None } else { Some(num(11)?) },
            });
        }
        Ok(Self { records })
    }
}

/// Integrates the scenario over `[0, t_end]`, logging every `record_stride` steps and the final step.
pub fn run(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    let cl = ClosedLoop::from_scenario(cfg)?;
    let mut state = cl.initial_state(cfg)?;
    let h = cfg.sim.step;
    let steps = (cfg.sim.t_end / h).round() as usize;
    let stride = cfg.sim.record_stride.max(1);
    let mut log = SimLog { records: Vec::with_capacity(steps / stride + 2) };
    log.records.push(cl.record(0.0, &state));
    for k in 0..steps {
        let t = k as f64 * h;
        state = match cl.rk4_step(t, &state, h) {
            Ok(s) => s,
            Err(SimError::Diverged { time, .. }) => {
                return Err(SimError::Diverged { time, log: Box::new(log) });
            }
            Err(e) => return Err(e),
        };
        if (k + 1) % stride == 0 || k + 1 == steps {
            log.records.push(cl.record((k + 1) as f64 * h, &state));
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub t_end: f64,
    pub trailing_window_start: f64,
    pub trailing_sup_abs_e: f64,
    pub trailing_a11_error: f64,
    pub trailing_a21_error: f64,
    pub trailing_a23_error: f64,
    pub max_abs_u: f64,
    pub min_abs_det_theta1: f64,
    pub min_abs_det_theta2: f64,
    pub settle_threshold: f64,
    /// First time after which `|e|` stays within the threshold.
    pub settling_time: Option<f64>,
    pub final_k_hat: Option<f64>,
    pub k_hat_nondecreasing: Option<bool>,
}

/// Summary figures over a log; coefficient errors are measured against the exact `a(sigma)`.
pub fn metrics(log: &SimLog, cfg: &ScenarioConfig) -> MetricsReport {
    assert!(!log.is_empty(), "metrics need at least one record");
    let t_end = log.last().map_or(0.0, |r| r.t);
    let start = t_end * (1.0 - TRAILING_FRACTION);
    let a1 = true_coeffs(Channel::Velocity, cfg.plant.sigma);
    let a2 = true_coeffs(Channel::Input, cfg.plant.sigma);
    let tail: Vec<&Record> = log.records.iter().filter(|r| r.t >= start).collect();
    let sup = |f: &dyn Fn(&Record) -> f64| tail.iter().map(|r| f(r)).fold(0.0, f64::max);

    let threshold = cfg.sim.settle_threshold;
    let settling_time = match log.records.iter().rposition(|r| !(r.e.abs() <= threshold)) {
        None => Some(log.records[0].t),
        Some(i) if i + 1 < log.records.len() => Some(log.records[i + 1].t),
        Some(_) => None,
    };
    let k_hats: Vec<f64> = log.records.iter().filter_map(|r| r.k_hat).collect();

    MetricsReport {
        t_end,
        trailing_window_start: start,
        trailing_sup_abs_e: sup(&|r| r.e.abs()),
        trailing_a11_error: sup(&|r| (r.a11 - a1.as_slice()[0]).abs()),
        trailing_a21_error: sup(&|r| (r.a21 - a2.as_slice()[0]).abs()),
        trailing_a23_error: sup(&|r| (r.a23 - a2.as_slice()[2]).abs()),
        max_abs_u: log.records.iter().map(|r| r.u.abs()).fold(0.0, f64::max),
        min_abs_det_theta1: log.records.iter().map(|r| r.det_theta1.abs()).fold(f64::INFINITY, f64::min),
        min_abs_det_theta2: log.records.iter().map(|r| r.det_theta2.abs()).fold(f64::INFINITY, f64::min),
        settle_threshold: threshold,
        settling_time,
        final_k_hat: k_hats.last().copied(),
        k_hat_nondecreasing: (!k_hats.is_empty()).then(|| k_hats.windows(2).all(|w| w[1] >= w[0])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // benchmark plant with an active regularizer and a gain that keeps the transient bounded
    fn short(mode: Mode, t_end: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.regularizer = crate::mapping::Regularizer::Scaled;
        cfg.epsilon = 1e-4;
        cfg.gains.k0 = 150.0;
        cfg.sim.mode = mode;
        cfg.sim.t_end = t_end;
        cfg
    }

    #[test]
    fn zero_state_with_zero_gains_stays_at_rest() {
        let mut cfg = short(Mode::Nonadaptive, 1.0);
        cfg.x0 = PlantState::default();
        cfg.v0 = ExoState::default();
        cfg.plant = DuffingParams { c1: 0.0, c2: 0.0, c3: 0.0, sigma: 0.5 };
        cfg.gains.rho = crate::gain::Polynomial::constant(0.0);
        cfg.gains.k = crate::gain::Polynomial::constant(0.0);
        let log = run(&cfg).unwrap();
        for r in &log.records {
            assert_eq!((r.x1, r.x2, r.u), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn log_shape_and_time_grid() {
        let cfg = short(Mode::Nonadaptive, 0.5);
        let log = run(&cfg).unwrap();
        // 500 steps, stride 10
        assert_eq!(log.len(), 51);
        assert!(log.records.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(log.last().unwrap().t, 0.5);
        assert!(log.records.iter().all(|r| r.k_hat.is_none()));

        let mut cfg = short(Mode::Nonadaptive, 0.0105);
        cfg.sim.record_stride = 1;
        assert_eq!(run(&cfg).unwrap().len(), 12); // 10.5 steps round to 11
    }

    #[test]
    fn exosystem_rotation_is_preserved() {
        let cfg = short(Mode::OpenLoop, 5.0);
        let cl = ClosedLoop::from_scenario(&cfg).unwrap();
        let mut s = cl.initial_state(&cfg).unwrap();
        let r0 = s.v.norm();
        for k in 0..5000 {
            s = cl.rk4_step(k as f64 * 1e-3, &s, 1e-3).unwrap();
        }
        let exact = cfg.v0.rotated(0.5, 5.0);
        assert!((s.v.norm() - r0).abs() / r0 < 1e-12);
        assert!((s.v.v1 - exact.v1).abs() < 1e-12 && (s.v.v2 - exact.v2).abs() < 1e-12);
    }

    #[test]
    fn csv_format_and_round_trip() {
        let log = run(&short(Mode::Adaptive, 0.05)).unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with("t,x1,x2,e,zeta,u,a11,a21,a23,detT1,detT2,khat\n"));
        assert!(csv.ends_with('\n'));
        let first_row = csv.lines().nth(1).unwrap();
        assert!(first_row.starts_with("0.0000000000000000e0,1.0000000000000000e0,"), "{first_row}");
        assert_eq!(SimLog::from_csv(&csv).unwrap(), log);

        let log = run(&short(Mode::Nonadaptive, 0.05)).unwrap();
        let csv = log.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(SimLog::from_csv(&csv).unwrap(), log);
        assert!(SimLog::from_csv("t,x\n").is_err());
    }

    #[test]
    fn divergence_is_reported_with_partial_log() {
        let mut cfg = short(Mode::OpenLoop, 20.0);
        // x2' = x1^3 blows up in finite time
        cfg.plant = DuffingParams { c1: 0.0, c2: -2.0, c3: 0.0, sigma: 0.5 };
        cfg.x0 = PlantState { x1: 3.0, x2: 3.0 };
        match run(&cfg) {
            Err(SimError::Diverged { time, log }) => {
                assert!(time > 0.0 && time < 20.0);
                assert!(!log.is_empty());
                assert!(log.last().unwrap().t <= time);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn metrics_on_a_synthetic_log() {
        let cfg = ScenarioConfig::default();
        let mk = |t: f64, e: f64| Record {
            t,
            x1: 0.0,
            x2: 0.0,
            e,
            zeta: 0.0,
            u: -e,
            a11: 0.25 + e,
            a21: 0.5625,
            a23: 2.5,
            det_theta1: 1.0 + t,
            det_theta2: -2.0,
            k_hat: None,
        };
        let log = SimLog {
            records: (0..=10).map(|k| mk(k as f64, if k < 5 { 1.0 } else { 0.001 })).collect(),
        };
        let m = metrics(&log, &cfg);
        assert_eq!(m.trailing_window_start, 8.0);
        assert_eq!(m.trailing_sup_abs_e, 0.001);
        assert!((m.trailing_a11_error - 0.001).abs() < 1e-15);
        assert_eq!(m.settling_time, Some(5.0));
        assert_eq!(m.max_abs_u, 1.0);
        assert_eq!(m.min_abs_det_theta1, 1.0);
        assert_eq!(m.min_abs_det_theta2, 2.0);
        assert_eq!(m.k_hat_nondecreasing, None);
    }
}
