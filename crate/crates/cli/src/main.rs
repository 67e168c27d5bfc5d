use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use imreg::plot::render_all;
use imreg::scenario::{Mode, ScenarioConfig};
use imreg::sim::{metrics, run, SimError, SimLog};
use imreg::sweep::{run_sweep, summary_csv, ParameterGrid, RunStatus};
use imreg::verify::run_checks;
use serde_json::json;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

/// Internal-model output regulation of uncertain second-order plants.
#[derive(Debug, Parser)]
#[command(name = "imreg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario; writes log.csv, metrics.json and SVG plots.
    Run(RunArgs),
    /// Run a parameter grid in parallel; writes summary.csv.
    Sweep(SweepArgs),
    /// Self-check the numerical building blocks against independent oracles.
    Check {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file; benchmark defaults when omitted.
    #[arg(long, short)]
    scenario: Option<PathBuf>,
    /// Override a scenario key, e.g. `--set plant.sigma=1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Integration step.
    #[arg(long)]
    step: Option<f64>,
    /// Final time.
    #[arg(long = "tend")]
    t_end: Option<f64>,
    /// Output directory; falls back to `output.dir`, then `./imreg-out`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Grid axis `key=v1,v2,...` over c1, c2, c3, sigma, x1, x2, v1, v2. Repeatable.
    #[arg(long = "grid", value_name = "AXIS")]
    grid: Vec<String>,
    /// Trailing sup|e| a run must reach to count as converged.
    #[arg(long, default_value_t = 5e-2)]
    threshold: f64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, PathBuf), Failure> {
        let mut cfg = match &self.scenario {
            Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
                imreg::scenario::ConfigError::Io { .. } => fail(EXIT_IO, e.to_string()),
                _ => fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
            })?,
            None => ScenarioConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| fail(EXIT_CONFIG, format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.apply(k.trim(), v.trim()).map_err(|m| fail(EXIT_CONFIG, format!("--set {kv}: {m}")))?;
        }
        if let Some(mode) = self.mode {
            cfg.sim.mode = mode;
        }
        if let Some(h) = self.step {
            cfg.sim.step = h;
        }
        if let Some(t) = self.t_end {
            cfg.sim.t_end = t;
        }
        cfg.validate().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
        let out = self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("imreg-out"));
        Ok((cfg, out))
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn write_artifacts(dir: &Path, log: &SimLog, cfg: &ScenarioConfig, status: serde_json::Value) -> Result<(), Failure> {
    write(dir, "log.csv", &log.to_csv())?;
    let report = json!({
        "status": status,
        "mode": cfg.sim.mode.to_string(),
        "step": cfg.sim.step,
        "records": log.len(),
        "metrics": (!log.is_empty()).then(|| metrics(log, cfg)),
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| fail(EXIT_IO, e.to_string()))?;
    write(dir, "metrics.json", &(text + "\n"))?;
    if !log.is_empty() {
        for (name, svg) in render_all(log, cfg.plant.sigma) {
            write(dir, name, &svg)?;
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| fail(EXIT_IO, format!("cannot create {}: {e}", dir.display())))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, out) = args.scenario.load()?;
    create_dir(&out)?;
    let start = Instant::now();
    match run(&cfg) {
        Ok(log) => {
            write_artifacts(&out, &log, &cfg, json!("ok"))?;
            let m = metrics(&log, &cfg);
            println!(
                "ok: {} records in {:.2}s, trailing sup|e| = {:.3e}, written to {}",
                log.len(),
                start.elapsed().as_secs_f64(),
                m.trailing_sup_abs_e,
                out.display()
            );
            Ok(())
        }
        Err(SimError::Diverged { time, log }) => {
            write_artifacts(&out, &log, &cfg, json!({ "diverged_at": time }))?;
            Err(fail(
                EXIT_DIVERGED,
                format!("closed loop diverged at t = {time}; partial log ({} records) written to {}", log.len(), out.display()),
            ))
        }
        Err(e) => Err(fail(EXIT_CONFIG, e.to_string())),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let (base, out) = args.scenario.load()?;
    let mut grid = ParameterGrid::new();
    for spec in &args.grid {
        grid = grid.parse_axis(spec).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    }
    let start = Instant::now();
    let rows = run_sweep(&base, &grid).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    create_dir(&out)?;
    write(&out, "summary.csv", &summary_csv(&grid, &rows))?;

    let failed = rows.iter().filter(|r| r.status != RunStatus::Ok).count();
    let converged = rows.iter().filter(|r| r.converged(args.threshold)).count();
    println!(
        "{} runs in {:.2}s: {converged} converged (sup|e| <= {:e}), {failed} diverged or failed; summary in {}",
        rows.len(),
        start.elapsed().as_secs_f64(),
        args.threshold,
        out.join("summary.csv").display()
    );
    if failed > 0 {
        return Err(fail(EXIT_DIVERGED, format!("{failed} of {} runs did not complete", rows.len())));
    }
    Ok(())
}

fn cmd_check(seed: u64) -> Result<(), Failure> {
    let outcomes = run_checks(seed);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(fail(1, format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check { seed } => cmd_check(*seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
