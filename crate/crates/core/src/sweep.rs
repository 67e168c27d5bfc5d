//! Parameter sweeps: Cartesian grids over plant parameters and initial
//! conditions, executed in parallel on top of a base scenario.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::ScenarioConfig;
use crate::sim::{metrics, run, MetricsReport, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("no grid points")]
    Empty,
    #[error("bad grid axis `{spec}`: {reason}")]
    Axis { spec: String, reason: String },
    #[error("axis `{0}` given twice")]
    Duplicate(GridKey),
}

/// Scenario field a grid axis may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKey {
    C1,
    C2,
    C3,
    Sigma,
    X1,
    X2,
    V1,
    V2,
}

impl GridKey {
    pub const ALL: [GridKey; 8] =
        [GridKey::C1, GridKey::C2, GridKey::C3, GridKey::Sigma, GridKey::X1, GridKey::X2, GridKey::V1, GridKey::V2];

    pub fn name(self) -> &'static str {
        match self {
            GridKey::C1 => "c1",
            GridKey::C2 => "c2",
            GridKey::C3 => "c3",
            GridKey::Sigma => "sigma",
            GridKey::X1 => "x1",
            GridKey::X2 => "x2",
            GridKey::V1 => "v1",
            GridKey::V2 => "v2",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            GridKey::C1 => cfg.plant.c1 = value,
            GridKey::C2 => cfg.plant.c2 = value,
            GridKey::C3 => cfg.plant.c3 = value,
            GridKey::Sigma => cfg.plant.sigma = value,
            GridKey::X1 => cfg.x0.x1 = value,
            GridKey::X2 => cfg.x0.x2 = value,
            GridKey::V1 => cfg.v0.v1 = value,
            GridKey::V2 => cfg.v0.v2 = value,
        }
    }
}

impl fmt::Display for GridKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GridKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown key `{s}` (expected one of c1, c2, c3, sigma, x1, x2, v1, v2)"))
    }
}

/// Cartesian product of axes; the first axis varies slowest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterGrid {
    axes: Vec<(GridKey, Vec<f64>)>,
}

impl ParameterGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(mut self, key: GridKey, values: Vec<f64>) -> Result<Self, SweepError> {
        if self.axes.iter().any(|(k, _)| *k == key) {
            return Err(SweepError::Duplicate(key));
        }
        self.axes.push((key, values));
        Ok(self)
    }

    /// Parses `key=v1,v2,...`.
    pub fn parse_axis(self, spec: &str) -> Result<Self, SweepError> {
        let bad = |reason: String| SweepError::Axis { spec: spec.to_string(), reason };
        let (key, values) = spec.split_once('=').ok_or_else(|| bad("expected key=v1,v2,...".into()))?;
        let key: GridKey = key.trim().parse().map_err(bad)?;
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(format!("`{v}` is not a finite number"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.axis(key, values)
    }

    pub fn keys(&self) -> Vec<GridKey> {
        self.axes.iter().map(|(k, _)| *k).collect()
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Result<Vec<Vec<f64>>, SweepError> {
        if self.is_empty() {
            return Err(SweepError::Empty);
        }
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for (_, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }

    pub fn scenarios(&self, base: &ScenarioConfig) -> Result<Vec<(Vec<f64>, ScenarioConfig)>, SweepError> {
        Ok(self
            .points()?
            .into_iter()
            .map(|p| {
                let mut cfg = base.clone();
                for ((key, _), &v) in self.axes.iter().zip(&p) {
                    key.apply(&mut cfg, v);
                }
                (p, cfg)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged { time: f64 },
    Failed(String),
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Diverged { time } => write!(f, "diverged@{time}"),
            RunStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub status: RunStatus,
    pub metrics: Option<MetricsReport>,
}

impl SweepRow {
    /// Completed without divergence and with trailing `sup|e|` at most `threshold`.
    pub fn converged(&self, threshold: f64) -> bool {
        self.status == RunStatus::Ok && self.metrics.as_ref().is_some_and(|m| m.trailing_sup_abs_e <= threshold)
    }
}

fn run_one(point: Vec<f64>, cfg: &ScenarioConfig) -> SweepRow {
    if let Err(e) = cfg.validate() {
        return SweepRow { point, status: RunStatus::Failed(e.to_string()), metrics: None };
    }
    match run(cfg) {
        Ok(log) => SweepRow { point, status: RunStatus::Ok, metrics: Some(metrics(&log, cfg)) },
        Err(SimError::Diverged { time, .. }) => SweepRow { point, status: RunStatus::Diverged { time }, metrics: None },
        Err(e) => SweepRow { point, status: RunStatus::Failed(e.to_string()), metrics: None },
    }
}

/// Runs every grid point in parallel; rows come back in grid order.
pub fn run_sweep(base: &ScenarioConfig, grid: &ParameterGrid) -> Result<Vec<SweepRow>, SweepError> {
    let jobs = grid.scenarios(base)?;
    Ok(jobs.into_par_iter().map(|(p, cfg)| run_one(p, &cfg)).collect())
}

/// One CSV line per row: the grid coordinates, the status, then the headline metrics.
pub fn summary_csv(grid: &ParameterGrid, rows: &[SweepRow]) -> String {
    let mut s = String::new();
    for k in grid.keys() {
        let _ = write!(s, "{k},");
    }
    s.push_str("status,sup_e,err_a11,err_a21,err_a23,max_u,settling_time\n");
    for row in rows {
        for v in &row.point {
            let _ = write!(s, "{v:?},");
        }
        let status = row.status.to_string().replace(',', ";");
        match &row.metrics {
            Some(m) => {
                let settle = m.settling_time.map_or(String::from("nan"), |t| format!("{t:?}"));
                let _ = writeln!(
                    s,
                    "{status},{:e},{:e},{:e},{:e},{:e},{settle}",
                    m.trailing_sup_abs_e, m.trailing_a11_error, m.trailing_a21_error, m.trailing_a23_error, m.max_abs_u
                );
            }
            None => {
                let _ = writeln!(s, "{status},nan,nan,nan,nan,nan,nan");
            }
        }
    }
    s
}
