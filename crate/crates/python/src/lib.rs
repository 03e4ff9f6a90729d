//! Python bindings: run configured scenarios and read back the sampled
//! trajectory as plain lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use flatopt::cli::{build_report, simulate as run_config, summary_text, validate_scenario, CliConfig, CliError, CsvTable, FIT_WINDOW};
use flatopt::scenarios::build_scenario;
use flatopt::sim::{fit_decay_rate, TrajectoryLog};
use flatopt::target::TargetSystemSpec;

fn to_py(e: CliError) -> PyErr {
    match e {
        CliError::Config(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Parses a TOML config and runs it.
pub fn run_text(config: &str) -> Result<TrajectoryLog, CliError> {
    let cfg = CliConfig::parse(config)?;
    Ok(run_config(&cfg)?.1)
}

/// Validation summary lines for a TOML config.
pub fn validate_text(config: &str) -> Result<Vec<String>, CliError> {
    let cfg = CliConfig::parse(config)?;
    let scenario = build_scenario(cfg.scenario.name(), Some(&cfg.scenario)).map_err(|e| CliError::Config(e.to_string()))?;
    let v = validate_scenario(&scenario, cfg.run.t_final, cfg.validation_samples, cfg.seed, cfg.validation_tol)
        .map_err(|source| CliError::Simulation { source })?;
    let mut lines: Vec<String> = v.callbacks.iter().map(|(n, r)| format!("{n}: {:.3e}", r.max_error())).collect();
    lines.push(format!("flatness: {:.3e}", v.flatness_error));
    Ok(lines)
}

/// Runs the scenario described by a TOML config and returns its samples.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let log = run_text(config).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("scenario", &log.scenario)?;
    d.set_item("decay_rate", log.decay_rate)?;
    d.set_item("t", &log.times)?;
    d.set_item("y", &log.outputs)?;
    d.set_item("ystar", &log.optimum)?;
    d.set_item("err", &log.errors)?;
    d.set_item("u", &log.inputs)?;
    if log.has_barrier() {
        d.set_item("f", &log.constraint_values)?;
        d.set_item("lam", &log.multipliers)?;
        d.set_item("c", &log.barrier_c)?;
        d.set_item("s", &log.barrier_s)?;
    }
    let rate = fit_decay_rate(&log, FIT_WINDOW).ok().map(|f| f.rate);
    d.set_item("fitted_rate", rate)?;
    d.set_item("summary", summary_text(&log, Default::default()))?;
    Ok(d)
}

/// Checks callbacks and flatness maps; returns one line per check.
#[pyfunction]
fn validate(config: &str) -> PyResult<Vec<String>> {
    validate_text(config).map_err(to_py)
}

/// Verdicts for trajectory CSV text, as printed by `flatopt report`.
#[pyfunction]
#[pyo3(signature = (csv, alpha=None, multiplier_bound=None))]
fn report(csv: &str, alpha: Option<f64>, multiplier_bound: Option<f64>) -> PyResult<(bool, String)> {
    let table = CsvTable::parse(csv).map_err(to_py)?;
    let r = build_report(&table, alpha, multiplier_bound).map_err(to_py)?;
    Ok((r.passed(), r.to_string()))
}

/// Guaranteed decay rate of the target system with the given coefficients.
#[pyfunction]
fn decay_rate(coeffs: Vec<f64>) -> PyResult<f64> {
    TargetSystemSpec::hurwitz(coeffs, 1)
        .and_then(|s| s.decay_rate())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyflatopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate, m)?)?;
    Ok(())
}
