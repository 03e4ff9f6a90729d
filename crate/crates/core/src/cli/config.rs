//! Run configuration files.
//!
//! A config is TOML restricted to dotted keys under six sections, e.g.
//!
//! ```toml
//! scenario.name = "formation"
//! scenario.max_distance = 3
//! run.t_final = 10
//! target.coeffs = [2, 3]
//! barrier.c0 = 1
//! output.plot = true
//! ```
//!
//! Every key is optional except `scenario.name`; unknown keys are rejected
//! with a message naming them.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::numerics::IntegratorConfig;
use crate::scenarios::{ParamValue, ScenarioParams};
use crate::sim::RunConfig;

use super::CliError;

pub const DEFAULT_VALIDATION_SAMPLES: usize = 20;
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub scenario: ScenarioParams,
    pub run: RunConfig,
    pub output_dir: Option<PathBuf>,
    pub plot: bool,
    /// Seed for randomized checks in `validate`.
    pub seed: u64,
    pub validation_samples: usize,
    pub validation_tol: f64,
}

impl CliConfig {
    pub fn new(scenario: ScenarioParams) -> Self {
        Self {
            scenario,
            run: RunConfig::default(),
            output_dir: None,
            plot: false,
            seed: 0,
            validation_samples: DEFAULT_VALIDATION_SAMPLES,
            validation_tol: DEFAULT_VALIDATION_TOL,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(format!("malformed config: {}", e.message())))?;
        let entries = flatten(&table)?;
        let name = match entries.iter().find(|(k, _)| k == "scenario.name") {
            Some((_, Value::String(s))) => s.clone(),
            Some(_) => return Err(config("scenario.name must be a string")),
            None => return Err(config("scenario.name is required")),
        };
        let params = ScenarioParams::defaults(&name).map_err(|e| CliError::Config(format!("scenario.name: {e}")))?;
        let mut cfg = Self::new(params);
        for (key, value) in &entries {
            if key != "scenario.name" {
                cfg.set(key, value)?;
            }
        }
        cfg.run.validate().map_err(|e| CliError::Config(strip_prefix(e)))?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &Value) -> Result<(), CliError> {
        let (section, field) = key.split_once('.').unwrap_or((key, ""));
        let run = &mut self.run;
        let integ = &mut run.integrator;
        let barrier = &mut run.barrier;
        match (section, field) {
            ("scenario", f) => {
                let v = param(key, value)?;
                self.scenario.set(f, &v).map_err(|e| CliError::Config(strip_prefix(e)))?;
            }
            ("run", "t_final") => run.t_final = float(key, value)?,
            ("run", "sample_dt") => run.sample_dt = float(key, value)?,
            ("run", "abs_tol") => integ.abs_tol = float(key, value)?,
            ("run", "rel_tol") => integ.rel_tol = float(key, value)?,
            ("run", "min_step") => integ.min_step = float(key, value)?,
            ("run", "max_step") => integ.max_step = float(key, value)?,
            ("run", "fixed_step") => integ.fixed_step = Some(float(key, value)?),
            ("run", "verify_plant") => run.verify_plant = boolean(key, value)?,
            ("run", "plant_tol") => run.plant_tol = Some(float(key, value)?),
            ("run", "barrier_optimum") => run.log_barrier_optimum = boolean(key, value)?,
            ("target", "coeffs") => run.target_coeffs = Some(floats(key, value)?),
            ("barrier", "c0") => barrier.c0 = float(key, value)?,
            ("barrier", "alpha_c") => barrier.alpha_c = float(key, value)?,
            ("barrier", "alpha_s") => barrier.alpha_s = float(key, value)?,
            ("barrier", "eps_s") => barrier.eps_s = float(key, value)?,
            ("output", "dir") => match value {
                Value::String(s) => self.output_dir = Some(PathBuf::from(s)),
                _ => return Err(config("output.dir must be a string")),
            },
            ("output", "plot") => self.plot = boolean(key, value)?,
            ("validate", "seed") => match value {
                Value::Integer(i) if *i >= 0 => self.seed = *i as u64,
                _ => return Err(config("validate.seed must be a nonnegative integer")),
            },
            ("validate", "samples") => match value {
                Value::Integer(i) if *i > 0 => self.validation_samples = *i as usize,
                _ => return Err(config("validate.samples must be a positive integer")),
            },
            ("validate", "tol") => self.validation_tol = float(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Serializes every setting, defaults included, so that parsing the
    /// result reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("scenario.name", format!("\"{}\"", self.scenario.name()));
        for (k, v) in self.scenario.entries() {
            line(&format!("scenario.{k}"), v.to_string());
        }
        let run = &self.run;
        let IntegratorConfig { abs_tol, rel_tol, min_step, max_step, fixed_step } = run.integrator;
        line("run.t_final", num(run.t_final));
        line("run.sample_dt", num(run.sample_dt));
        line("run.abs_tol", num(abs_tol));
        line("run.rel_tol", num(rel_tol));
        line("run.min_step", num(min_step));
        line("run.max_step", num(max_step));
        if let Some(h) = fixed_step {
            line("run.fixed_step", num(h));
        }
        line("run.verify_plant", run.verify_plant.to_string());
        if let Some(tol) = run.plant_tol {
            line("run.plant_tol", num(tol));
        }
        line("run.barrier_optimum", run.log_barrier_optimum.to_string());
        if let Some(c) = &run.target_coeffs {
            line("target.coeffs", ParamValue::List(c.clone()).to_string());
        }
        let b = &run.barrier;
        line("barrier.c0", num(b.c0));
        line("barrier.alpha_c", num(b.alpha_c));
        line("barrier.alpha_s", num(b.alpha_s));
        line("barrier.eps_s", num(b.eps_s));
        if let Some(dir) = &self.output_dir {
            line("output.dir", format!("{:?}", dir.to_string_lossy()));
        }
        line("output.plot", self.plot.to_string());
        line("validate.seed", self.seed.to_string());
        line("validate.samples", self.validation_samples.to_string());
        line("validate.tol", num(self.validation_tol));
        out
    }
}

fn config(msg: &str) -> CliError {
    CliError::Config(msg.to_string())
}

/// Library validation messages carry an "invalid argument: " prefix that
/// reads poorly in a config error.
fn strip_prefix(e: crate::Error) -> String {
    match e {
        crate::Error::InvalidArgument(msg) => msg,
        other => other.to_string(),
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn flatten(table: &Table) -> Result<Vec<(String, Value)>, CliError> {
    const SECTIONS: [&str; 6] = ["scenario", "run", "target", "barrier", "output", "validate"];
    let mut out = Vec::new();
    for (section, body) in table {
        if !SECTIONS.contains(&section.as_str()) {
            return Err(CliError::Config(format!("unknown key {section}")));
        }
        let Value::Table(inner) = body else {
            return Err(CliError::Config(format!("{section} must be a section of dotted keys")));
        };
        for (k, v) in inner {
            if matches!(v, Value::Table(_)) {
                return Err(CliError::Config(format!("unknown key {section}.{k}")));
            }
            out.push((format!("{section}.{k}"), v.clone()));
        }
    }
    Ok(out)
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn float(key: &str, v: &Value) -> Result<f64, CliError> {
    as_f64(v).ok_or_else(|| CliError::Config(format!("{key} must be a number")))
}

fn floats(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    match v {
        Value::Array(xs) => xs.iter().map(as_f64).collect::<Option<Vec<_>>>(),
        _ => None,
    }
    .ok_or_else(|| CliError::Config(format!("{key} must be a list of numbers")))
}

fn boolean(key: &str, v: &Value) -> Result<bool, CliError> {
    match v {
        Value::Boolean(b) => Ok(*b),
        _ => Err(CliError::Config(format!("{key} must be true or false"))),
    }
}

fn param(key: &str, v: &Value) -> Result<ParamValue, CliError> {
    match v {
        Value::String(s) => Ok(ParamValue::Text(s.clone())),
        Value::Array(_) => floats(key, v).map(ParamValue::List),
        _ => float(key, v).map(ParamValue::Number),
    }
}
