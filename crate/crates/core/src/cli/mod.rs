//! Command-line front end: `simulate`, `validate` and `report`.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when a
//! simulation or output step fails.

mod config;
mod csv;
mod plot;
mod report;
mod validate;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::scenarios::build_scenario;
use crate::sim::{fit_decay_rate, run_closed_loop, ConstraintSet, Scenario, TrajectoryLog};

pub use config::{CliConfig, DEFAULT_VALIDATION_SAMPLES, DEFAULT_VALIDATION_TOL};
pub use csv::{format_number, trajectory_csv, trajectory_header, write_trajectory_csv, CsvTable};
pub use plot::{Chart, Series};
pub use report::{build_report, parse_summary, sibling_summary, Check, Report, Verdict, FIT_WINDOW};
pub use validate::{validate_scenario, ScenarioValidation};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation failed{}: {source}", at(source.time()))]
    Simulation { source: crate::Error },
    #[error("output error: {0}")]
    Output(String),
}

fn at(t: Option<f64>) -> String {
    t.filter(|t| t.is_finite()).map(|t| format!(" at t = {t:.6}")).unwrap_or_default()
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Simulation { .. } | CliError::Output(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "flatopt", version, about = "Simulate optimization-based feedback for flat systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write trajectory.csv and summary.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        plot: bool,
    },
    /// Check problem derivatives and flatness maps without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute the decay fit and verdicts from a trajectory CSV.
    Report {
        log: PathBuf,
        /// Designed decay rate; read from summary.txt beside the log if omitted.
        #[arg(long)]
        alpha: Option<f64>,
        /// Multiplier bound L d / eps; read from summary.txt if omitted.
        #[arg(long)]
        multiplier_bound: Option<f64>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, out, plot } => simulate_command(&config, out, plot),
        Command::Validate { config } => validate_command(&config),
        Command::Report { log, alpha, multiplier_bound } => report_command(&log, alpha, multiplier_bound),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_config(path: &Path) -> Result<CliConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    CliConfig::parse(&text)
}

fn scenario_for(cfg: &CliConfig) -> Result<Scenario, CliError> {
    build_scenario(cfg.scenario.name(), Some(&cfg.scenario)).map_err(|e| CliError::Config(format!("scenario: {e}")))
}

/// Builds and runs the configured scenario.
pub fn simulate(cfg: &CliConfig) -> Result<(Scenario, TrajectoryLog), CliError> {
    let scenario = scenario_for(cfg)?;
    let log = run_closed_loop(&scenario, &cfg.run).map_err(|e| match e {
        crate::Error::InvalidArgument(msg) => CliError::Config(msg),
        source => CliError::Simulation { source },
    })?;
    Ok((scenario, log))
}

fn simulate_command(path: &Path, out: Option<PathBuf>, plot: bool) -> Result<String, CliError> {
    let cfg = load_config(path)?;
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let started = Instant::now();
    let (scenario, log) = simulate(&cfg)?;
    let runtime = started.elapsed();
    write_outputs(&scenario, &log, &dir, plot || cfg.plot, runtime)?;
    Ok(format!("{}wrote {}\n", summary_text(&log, runtime), dir.display()))
}

/// Writes `trajectory.csv`, `summary.txt` and optionally SVG plots.
pub fn write_outputs(scenario: &Scenario, log: &TrajectoryLog, dir: &Path, plot: bool, runtime: Duration) -> Result<(), CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    write_trajectory_csv(log, &dir.join("trajectory.csv"))?;
    let summary = dir.join("summary.txt");
    fs::write(&summary, summary_text(log, runtime)).map_err(|e| io(&summary, e))?;
    if plot {
        for (name, chart) in charts(scenario, log) {
            let p = dir.join(name);
            fs::write(&p, chart.to_svg()).map_err(|e| io(&p, e))?;
        }
    }
    Ok(())
}

pub fn summary_text(log: &TrajectoryLog, runtime: Duration) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("scenario", log.scenario.clone());
    kv("order", log.order.to_string());
    kv("target_coeffs", format!("{:?}", log.target_coeffs));
    kv("alpha", format!("{:.12}", log.decay_rate));
    kv("strong_convexity", log.strong_convexity.to_string());
    kv("lipschitz", log.lipschitz.to_string());
    if let Some(b) = log.multiplier_bound {
        kv("multiplier_bound", format!("{b:.12}"));
    }
    if log.has_barrier() {
        kv("s0", log.s0.to_string());
    }
    kv("samples", log.len().to_string());
    if let Some(t) = log.times.last() {
        kv("t_final", t.to_string());
    }
    if let Some(e) = log.errors.last() {
        kv("final_error", format!("{e:.6e}"));
    }
    match fit_decay_rate(log, FIT_WINDOW) {
        Ok(fit) => {
            kv("fitted_rate", format!("{:.6}", fit.rate));
            kv("fit_constant", format!("{:.6e}", fit.constant()));
        }
        Err(e) => kv("fitted_rate", format!("n/a ({e})")),
    }
    if let Some(v) = log.max_constraint_value() {
        kv("max_constraint", format!("{v:.6e}"));
    }
    if let Some(l1) = log.multipliers.iter().map(|l| l.iter().map(|x| x.abs()).sum::<f64>()).reduce(f64::max) {
        kv("max_multiplier_l1", format!("{l1:.6e}"));
    }
    if let Some(c) = log.clearance.iter().copied().reduce(f64::min) {
        kv("min_clearance", format!("{c:.6e}"));
    }
    if let Some(e) = log.plant_errors.iter().copied().reduce(f64::max) {
        kv("max_plant_error", format!("{e:.6e}"));
    }
    kv("accepted_steps", log.stats.accepted.to_string());
    kv("rejected_steps", log.stats.rejected.to_string());
    kv("domain_rejections", log.stats.domain_rejections.to_string());
    kv("rhs_evals", log.stats.rhs_evals.to_string());
    kv("runtime_s", format!("{:.3}", runtime.as_secs_f64()));
    s
}

/// The plots written by `simulate --plot`, keyed by file name.
pub fn charts(scenario: &Scenario, log: &TrajectoryLog) -> Vec<(&'static str, Chart)> {
    let mut out = Vec::new();
    let m = log.output_dim;
    if m % 2 == 0 {
        let mut series = Vec::new();
        for i in 0..m / 2 {
            let path = |rows: &[Vec<f64>]| rows.iter().map(|y| (y[2 * i], y[2 * i + 1])).collect();
            series.push(Series::new(format!("robot {}", i + 1), path(&log.outputs)));
            if !log.reference.is_empty() {
                series.push(Series::new(format!("target {}", i + 1), path(&log.reference)).dashed());
            }
        }
        let disks = match &scenario.constraints {
            ConstraintSet::LocalWorkspace(lw) => lw.obstacles.iter().map(|o| (o.center[0], o.center[1], o.radius)).collect(),
            _ => Vec::new(),
        };
        out.push((
            "trajectory.svg",
            Chart {
                title: format!("{}: paths in the plane", log.scenario),
                x_label: "x".into(),
                y_label: "y".into(),
                equal_aspect: true,
                series,
                disks,
                ..Default::default()
            },
        ));
    }
    let err = log.times.iter().copied().zip(log.errors.iter().copied()).collect();
    out.push((
        "error.svg",
        Chart {
            title: format!("{}: distance to the optimum", log.scenario),
            x_label: "t".into(),
            y_label: "|y - y*|".into(),
            log_y: true,
            series: vec![Series::new("error", err)],
            ..Default::default()
        },
    ));
    if log.has_barrier() {
        let series = (0..log.constraint_count())
            .map(|i| Series::new(format!("f_{}", i + 1), log.times.iter().zip(&log.constraint_values).map(|(t, f)| (*t, f[i])).collect()))
            .collect();
        out.push((
            "constraints.svg",
            Chart {
                title: format!("{}: constraint values", log.scenario),
                x_label: "t".into(),
                y_label: "f_i(y, t)".into(),
                series,
                h_lines: vec![0.0],
                ..Default::default()
            },
        ));
    }
    out
}

fn validate_command(path: &Path) -> Result<String, CliError> {
    let cfg = load_config(path)?;
    let scenario = scenario_for(&cfg)?;
    let v = validate_scenario(&scenario, cfg.run.t_final, cfg.validation_samples, cfg.seed, cfg.validation_tol).map_err(|e| match e {
        e @ crate::Error::ValidationFailed { .. } => CliError::Simulation { source: e },
        other => CliError::Config(other.to_string()),
    })?;
    let mut s = String::new();
    for (name, report) in &v.callbacks {
        let _ = writeln!(s, "{name}: max relative error {:.3e} over {} callbacks", report.max_error(), report.checks.len());
    }
    let _ = writeln!(s, "flatness round trip: max relative error {:.3e}", v.flatness_error);
    let _ = writeln!(s, "output map: max error {:.3e}", v.output_error);
    let _ = writeln!(s, "all checks passed at tol {:e}", cfg.validation_tol);
    Ok(s)
}

fn report_command(log: &Path, alpha: Option<f64>, bound: Option<f64>) -> Result<String, CliError> {
    let table = CsvTable::read(log)?;
    let summary = sibling_summary(log).unwrap_or_default();
    let from_summary = |k: &str| summary.get(k).and_then(|v| v.parse::<f64>().ok());
    let alpha = alpha.or_else(|| from_summary("alpha"));
    let bound = bound.or_else(|| from_summary("multiplier_bound"));
    Ok(build_report(&table, alpha, bound)?.to_string())
}
