//! Scenario files: a flat `key = value` format with dotted section keys.
//!
//! ```text
//! # comments run to end of line
//! plant.sigma = 0.5
//! init.eta1 = 0, 0, 0, 0
//! model.m1 = 10, 18, 15, 6
//! mapping.mask2 = false, true, false, true   # or `none`
//! mapping.regularizer = literal              # or `scaled`
//! gains.rho = 10 + 4*s^4
//! sim.mode = nonadaptive                     # adaptive | open-loop
//! ```
//!
//! Every key is optional; missing keys take the Duffing benchmark defaults.
//! Unknown keys, duplicate keys and malformed values are errors reported with
//! their line number. Range problems on the plant parameters are warnings.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::controller::GainConfig;
use crate::duffing::{DuffingParams, ExoState, PlantState, DEFAULT_M1, DEFAULT_M2};
use crate::gain::Polynomial;
use crate::internal_model::{hurwitz_pair, ModelError};
use crate::mapping::{Regularizer, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Eq, Copy, Default)]
pub enum Mode {
    #[default]
    Nonadaptive,
    Adaptive,
    /// Controller output forced to zero; filters still run.
    OpenLoop,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nonadaptive => "nonadaptive",
            Mode::Adaptive => "adaptive",
            Mode::OpenLoop => "open-loop",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonadaptive" => Ok(Mode::Nonadaptive),
            "adaptive" => Ok(Mode::Adaptive),
            "open-loop" => Ok(Mode::OpenLoop),
            other => Err(format!("unknown mode `{other}` (nonadaptive | adaptive | open-loop)")),
        }
    }
}

/// An extra `amplitude * sin(frequency * t)` added to the velocity equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtraDisturbance {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub step: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub mode: Mode,
    /// Tracking threshold used for the settling-time metric.
    pub settle_threshold: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { step: 1e-3, t_end: 100.0, record_stride: 10, mode: Mode::Nonadaptive, settle_threshold: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plant: DuffingParams,
    pub disturbance: ExtraDisturbance,
    pub x0: PlantState,
    pub v0: ExoState,
    pub eta1_0: Vec<f64>,
    pub eta2_0: Vec<f64>,
    pub k_hat0: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub epsilon: f64,
    pub regularizer: Regularizer,
    pub mask1: Option<Vec<bool>>,
    pub mask2: Option<Vec<bool>>,
    pub gains: GainConfig,
    pub sim: SimSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            plant: DuffingParams::default(),
            disturbance: ExtraDisturbance::default(),
            x0: PlantState { x1: 1.0, x2: -1.0 },
            v0: ExoState { v1: 1.0, v2: 1.0 },
            eta1_0: vec![0.0; 4],
            eta2_0: vec![0.0; 8],
            k_hat0: 0.0,
            m1: DEFAULT_M1.to_vec(),
            m2: DEFAULT_M2.to_vec(),
            epsilon: DEFAULT_EPSILON,
            regularizer: Regularizer::Literal,
            mask1: Some(vec![false, true]),
            mask2: Some(vec![false, true, false, true]),
            gains: GainConfig::default(),
            sim: SimSettings::default(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

const KEYS: &[&str] = &[
    "plant.c1",
    "plant.c2",
    "plant.c3",
    "plant.sigma",
    "plant.disturbance_amplitude",
    "plant.disturbance_frequency",
    "init.x1",
    "init.x2",
    "init.v1",
    "init.v2",
    "init.eta1",
    "init.eta2",
    "init.khat",
    "model.m1",
    "model.m2",
    "mapping.epsilon",
    "mapping.mask1",
    "mapping.mask2",
    "mapping.regularizer",
    "gains.rho",
    "gains.k",
    "gains.k0",
    "sim.step",
    "sim.t_end",
    "sim.record_stride",
    "sim.mode",
    "sim.settle_threshold",
    "output.dir",
];

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| parse_f64(t.trim())).collect()
}

fn parse_mask(s: &str) -> Result<Option<Vec<bool>>, String> {
    if s == "none" {
        return Ok(None);
    }
    s.split(',')
        .map(|t| match t.trim() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(format!("`{other}` is not a boolean")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn fmt_mask(m: &Option<Vec<bool>>) -> String {
    match m {
        None => "none".into(),
        Some(v) => v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", "),
    }
}

impl ScenarioConfig {
    /// Parses scenario text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| ConfigError::Parse { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| perr(format!("unknown key `{key}`")))?;
            if seen.contains(known) {
                return Err(perr(format!("duplicate key `{key}`")));
            }
            seen.push(known);
            cfg.apply(key, value).map_err(|m| perr(format!("{key}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Sets one field from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "plant.c1" => self.plant.c1 = parse_f64(value)?,
            "plant.c2" => self.plant.c2 = parse_f64(value)?,
            "plant.c3" => self.plant.c3 = parse_f64(value)?,
            "plant.sigma" => self.plant.sigma = parse_f64(value)?,
            "plant.disturbance_amplitude" => self.disturbance.amplitude = parse_f64(value)?,
            "plant.disturbance_frequency" => self.disturbance.frequency = parse_f64(value)?,
            "init.x1" => self.x0.x1 = parse_f64(value)?,
            "init.x2" => self.x0.x2 = parse_f64(value)?,
            "init.v1" => self.v0.v1 = parse_f64(value)?,
            "init.v2" => self.v0.v2 = parse_f64(value)?,
            "init.eta1" => self.eta1_0 = parse_list(value)?,
            "init.eta2" => self.eta2_0 = parse_list(value)?,
            "init.khat" => self.k_hat0 = parse_f64(value)?,
            "model.m1" => self.m1 = parse_list(value)?,
            "model.m2" => self.m2 = parse_list(value)?,
            "mapping.epsilon" => self.epsilon = parse_f64(value)?,
            "mapping.mask1" => self.mask1 = parse_mask(value)?,
            "mapping.mask2" => self.mask2 = parse_mask(value)?,
            "mapping.regularizer" => self.regularizer = value.parse()?,
            "gains.rho" => self.gains.rho = value.parse::<Polynomial>().map_err(|e| e.to_string())?,
            "gains.k" => self.gains.k = value.parse::<Polynomial>().map_err(|e| e.to_string())?,
            "gains.k0" => self.gains.k0 = parse_f64(value)?,
            "sim.step" => self.sim.step = parse_f64(value)?,
            "sim.t_end" => self.sim.t_end = parse_f64(value)?,
            "sim.record_stride" => {
                self.sim.record_stride = value.parse().map_err(|_| format!("`{value}` is not a count"))?
            }
            "sim.mode" => self.sim.mode = value.parse()?,
            "sim.settle_threshold" => self.sim.settle_threshold = parse_f64(value)?,
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Hard errors, all collected. Range issues are left to [`ScenarioConfig::warnings`].
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        for (label, m, len) in [("M1", &self.m1, 4usize), ("M2", &self.m2, 8)] {
            if m.len() != len {
                errs.push(format!("{label} needs {len} coefficients, got {}", m.len()));
                continue;
            }
            match hurwitz_pair(m) {
                Ok(_) => {}
                Err(ModelError::NotHurwitz { re, im }) => {
                    errs.push(format!("{label} not Hurwitz (eigenvalue {re:+.4} {im:+.4}i)"))
                }
                Err(e) => errs.push(format!("{label}: {e}")),
            }
        }
        if self.eta1_0.len() != 4 {
            errs.push(format!("init.eta1 needs 4 entries, got {}", self.eta1_0.len()));
        }
        if self.eta2_0.len() != 8 {
            errs.push(format!("init.eta2 needs 8 entries, got {}", self.eta2_0.len()));
        }
        if !(self.epsilon > 0.0) {
            errs.push(format!("mapping.epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(m) = &self.mask1 {
            if m.len() != 2 {
                errs.push(format!("mapping.mask1 needs 2 entries, got {}", m.len()));
            }
        }
        if let Some(m) = &self.mask2 {
            if m.len() != 4 {
                errs.push(format!("mapping.mask2 needs 4 entries, got {}", m.len()));
            }
        }
        if !(self.gains.k0 > 0.0) {
            errs.push(format!("gains.k0 must be positive, got {}", self.gains.k0));
        }
        if !(self.sim.step > 0.0) {
            errs.push(format!("sim.step must be positive, got {}", self.sim.step));
        }
        if !(self.sim.t_end > 0.0) {
            errs.push(format!("sim.t_end must be positive, got {}", self.sim.t_end));
        } else if self.sim.step > 0.0 && self.sim.step > self.sim.t_end {
            errs.push("sim.step exceeds sim.t_end".into());
        }
        if self.sim.record_stride == 0 {
            errs.push("sim.record_stride must be at least 1".into());
        }
        if !(self.sim.settle_threshold > 0.0) {
            errs.push(format!("sim.settle_threshold must be positive, got {}", self.sim.settle_threshold));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// Soft problems: parameters outside the benchmark boxes, unbounded gains.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = self.plant.range_warnings();
        for (name, value) in [("v1", self.v0.v1), ("v2", self.v0.v2)] {
            if !(-3.0..=3.0).contains(&value) {
                out.push(format!("init.{name} = {value} outside [-3, 3]"));
            }
        }
        out.extend(self.gains.bound_warnings());
        out
    }

    /// Renders every field; `parse(serialize(cfg)) == cfg`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("plant.c1", format!("{:?}", self.plant.c1));
        kv("plant.c2", format!("{:?}", self.plant.c2));
        kv("plant.c3", format!("{:?}", self.plant.c3));
        kv("plant.sigma", format!("{:?}", self.plant.sigma));
        kv("plant.disturbance_amplitude", format!("{:?}", self.disturbance.amplitude));
        kv("plant.disturbance_frequency", format!("{:?}", self.disturbance.frequency));
        kv("init.x1", format!("{:?}", self.x0.x1));
        kv("init.x2", format!("{:?}", self.x0.x2));
        kv("init.v1", format!("{:?}", self.v0.v1));
        kv("init.v2", format!("{:?}", self.v0.v2));
        kv("init.eta1", fmt_list(&self.eta1_0));
        kv("init.eta2", fmt_list(&self.eta2_0));
        kv("init.khat", format!("{:?}", self.k_hat0));
        kv("model.m1", fmt_list(&self.m1));
        kv("model.m2", fmt_list(&self.m2));
        kv("mapping.epsilon", format!("{:?}", self.epsilon));
        kv("mapping.mask1", fmt_mask(&self.mask1));
        kv("mapping.mask2", fmt_mask(&self.mask2));
        kv("mapping.regularizer", self.regularizer.to_string());
        kv("gains.rho", self.gains.rho.to_string());
        kv("gains.k", self.gains.k.to_string());
        kv("gains.k0", format!("{:?}", self.gains.k0));
        kv("sim.step", format!("{:?}", self.sim.step));
        kv("sim.t_end", format!("{:?}", self.sim.t_end));
        kv("sim.record_stride", self.sim.record_stride.to_string());
        kv("sim.mode", self.sim.mode.to_string());
        kv("sim.settle_threshold", format!("{:?}", self.sim.settle_threshold));
        if let Some(dir) = &self.output_dir {
            kv("output.dir", dir.display().to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_benchmark_defaults() {
        let cfg = ScenarioConfig::parse("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.plant, DuffingParams { c1: -2.0, c2: 1.5, c3: 0.5, sigma: 0.5 });
        assert_eq!(cfg.m1, vec![10.0, 18.0, 15.0, 6.0]);
        assert_eq!(cfg.m2, vec![1.0, 5.0, 13.0, 22.0, 26.0, 22.0, 13.0, 5.0]);
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.gains.rho.eval(1.0), 14.0);
        assert_eq!(cfg.gains.k.eval(1.0), 2.0);
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn overrides_merge_with_defaults() {
        let cfg = ScenarioConfig::parse("# faster exosystem\nplant.sigma = 1.0\n\n").unwrap();
        assert_eq!(cfg.plant.sigma, 1.0);
        assert_eq!(cfg.plant.c1, -2.0);
        assert_eq!(cfg.m1, DEFAULT_M1.to_vec());
    }

    #[test]
    fn non_hurwitz_model_is_rejected() {
        let err = ScenarioConfig::parse("model.m1 = -1, 0, 0, 0").unwrap_err();
        assert!(err.to_string().contains("M1 not Hurwitz"), "{err}");
    }

    #[test]
    fn validation_lists_every_violation() {
        let err = ScenarioConfig::parse("sim.step = 0\nmodel.m2 = 1, 2\nmapping.epsilon = -1").unwrap_err();
        match err {
            ConfigError::Invalid(list) => assert_eq!(list.len(), 3, "{list:?}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ScenarioConfig::parse("plant.c1 = 1\nplant.bogus = 2").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
        let err = ScenarioConfig::parse("\n\nplant.c1 = abc").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }));
        let err = ScenarioConfig::parse("plant.c1 1").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
        let err = ScenarioConfig::parse("plant.c1 = 1\nplant.c1 = 2").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let err = ScenarioConfig::parse("gains.rho = 1 + ").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn out_of_box_values_only_warn() {
        let cfg = ScenarioConfig::parse("plant.sigma = 3\nplant.c2 = 5").unwrap();
        assert_eq!(cfg.warnings().len(), 2);
    }

    #[test]
    fn masks_and_modes() {
        let cfg = ScenarioConfig::parse("mapping.mask2 = none\nsim.mode = adaptive").unwrap();
        assert_eq!(cfg.mask2, None);
        assert_eq!(cfg.sim.mode, Mode::Adaptive);
        assert!(ScenarioConfig::parse("sim.mode = fast").is_err());
        assert!(ScenarioConfig::parse("mapping.mask1 = true").is_err());
        let cfg = ScenarioConfig::parse("mapping.regularizer = scaled").unwrap();
        assert_eq!(cfg.regularizer, Regularizer::Scaled);
        assert!(ScenarioConfig::parse("mapping.regularizer = exact").is_err());
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, 0.1f64..2.0),
            (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
            prop::collection::vec(-1.0f64..1.0, 4),
            prop::collection::vec(-1.0f64..1.0, 8),
            (0.01f64..1.0, 1e-4f64..1e-2, 1.0f64..200.0, 1usize..50),
            prop::collection::vec(-10.0f64..10.0, 1..5),
            (any::<bool>(), any::<bool>()),
            0u8..3,
        )
            .prop_map(|(c, iv, e1, e2, (eps, h, t, stride), rho, (mask, scaled), mode)| {
                let mut cfg = ScenarioConfig::default();
                cfg.plant = DuffingParams { c1: c.0, c2: c.1, c3: c.2, sigma: c.3 };
                cfg.x0 = PlantState { x1: iv.0, x2: iv.1 };
                cfg.v0 = ExoState { v1: iv.2, v2: iv.3 };
                cfg.eta1_0 = e1;
                cfg.eta2_0 = e2;
                cfg.epsilon = eps;
                cfg.sim.step = h;
                cfg.sim.t_end = t;
                cfg.sim.record_stride = stride;
                cfg.sim.mode = [Mode::Nonadaptive, Mode::Adaptive, Mode::OpenLoop][mode as usize];
                cfg.gains.rho = Polynomial::new(rho);
                if mask {
                    cfg.mask1 = None;
                }
                if scaled {
                    cfg.regularizer = Regularizer::Scaled;
                }
                cfg
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trips(cfg in arb_config()) {
            let back = ScenarioConfig::parse(&cfg.serialize()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
