//! Verdicts recomputed from a trajectory CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::Error;
use crate::sim::{fit_decay, DecayFit, CONVERGED_ERROR};

use super::csv::CsvTable;
use super::CliError;

/// Slack allowed between the fitted and the designed decay rate.
pub const RATE_SLACK: f64 = 0.05;
/// Factor on the fitted envelope that samples must stay under.
pub const ENVELOPE_FACTOR: f64 = 1.1;
/// Fraction of the horizon used for fitting.
pub const FIT_WINDOW: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIP",
        })
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `None` when the error has converged below the fitting floor.
    pub fit: Option<DecayFit>,
    pub final_error: f64,
    pub max_constraint_violation: Option<f64>,
    pub max_multiplier_l1: Option<f64>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.fit {
            Some(fit) => writeln!(f, "fitted_rate = {:.6}\nfit_constant = {:.6e}", fit.rate, fit.constant())?,
            None => writeln!(f, "fitted_rate = converged")?,
        }
        writeln!(f, "final_error = {:.6e}", self.final_error)?;
        if let Some(v) = self.max_constraint_violation {
            writeln!(f, "max_constraint_violation = {v:.6e}")?;
        }
        if let Some(v) = self.max_multiplier_l1 {
            writeln!(f, "max_multiplier_l1 = {v:.6e}")?;
        }
        for c in &self.checks {
            writeln!(f, "{:<11} {}  {}", c.name, c.verdict, c.detail)?;
        }
        Ok(())
    }
}

/// Reads `key = value` lines of a run summary.
pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Looks for `summary.txt` next to the log and returns its entries.
pub fn sibling_summary(log: &Path) -> Option<BTreeMap<String, String>> {
    let path = log.with_file_name("summary.txt");
    std::fs::read_to_string(path).ok().map(|t| parse_summary(&t))
}

/// Computes all verdicts. `alpha` enables the rate check; for barrier runs
/// the expected rate is `min(alpha, alpha_c, alpha_s)` with the schedule
/// rates read off the `c` and `s` columns. `bound` enables the multiplier
/// check.
pub fn build_report(table: &CsvTable, alpha: Option<f64>, bound: Option<f64>) -> Result<Report, CliError> {
    let missing = |c: &str| CliError::Config(format!("trajectory file has no `{c}` column"));
    let times = table.column("t").ok_or_else(|| missing("t"))?;
    let errors = table.column("err").ok_or_else(|| missing("err"))?;
    let final_error = *errors.last().ok_or_else(|| CliError::Config("trajectory file has no rows".into()))?;
    let fit = match fit_decay(&times, &errors, FIT_WINDOW) {
        Ok(fit) => Some(fit),
        Err(Error::InsufficientSamples(_)) if final_error < CONVERGED_ERROR => None,
        Err(e) => return Err(CliError::Config(format!("cannot fit the err column: {e}"))),
    };

    // With a barrier, y* is approached no faster than the barrier sharpens
    // and the slack shrinks; both rates are recoverable from the c, s columns.
    let schedule_rate = |col: &str, sign: f64| -> Option<f64> {
        let v = table.column(col)?;
        let (v0, v1) = (*v.first()?, *v.last()?);
        let span = times[times.len() - 1] - times[0];
        (v0 > 0.0 && v1 > 0.0 && span > 0.0).then(|| sign * (v1 / v0).ln() / span)
    };
    let alpha = alpha.map(|a| {
        [schedule_rate("c", 1.0), schedule_rate("s", -1.0)]
            .into_iter()
            .flatten()
            .fold(a, f64::min)
    });
    let mut checks = Vec::new();
    match (alpha, &fit) {
        (None, _) => checks.push(Check { name: "decay", verdict: Verdict::Skipped, detail: "no alpha (pass --alpha or keep summary.txt beside the log)".into() }),
        (Some(_), None) => checks.push(Check { name: "decay", verdict: Verdict::Pass, detail: format!("error below {CONVERGED_ERROR:e} over the window") }),
        (Some(a), Some(fit)) => checks.push(Check {
            name: "decay",
            verdict: verdict(fit.rate >= a - RATE_SLACK),
            detail: format!("rate {:.4} vs expected {a:.4} - {RATE_SLACK}", fit.rate),
        }),
    }
    if let Some(fit) = &fit {
        let start = times[times.len() - 1] - FIT_WINDOW * (times[times.len() - 1] - times[0]);
        let worst = times
            .iter()
            .zip(&errors)
            .filter(|(t, e)| **t >= start - 1e-12 && **e >= CONVERGED_ERROR)
            .map(|(t, e)| e / (ENVELOPE_FACTOR * fit.envelope(*t)))
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "envelope",
            verdict: verdict(worst <= 1.0),
            detail: format!("max err / ({ENVELOPE_FACTOR} C e^(-rate t)) = {worst:.4}"),
        });
    }

    let f = table.indexed("f");
    let max_constraint_violation = f.iter().flatten().copied().reduce(f64::max).map(|m| m.max(0.0));
    if let Some(v) = max_constraint_violation {
        checks.push(Check { name: "feasible", verdict: verdict(v <= 0.0), detail: format!("max_t max_i f_i = {v:.3e}") });
    }
    let lam = table.indexed("lam");
    let max_multiplier_l1 = lam.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).reduce(f64::max).filter(|_| !lam[0].is_empty());
    if let Some(l1) = max_multiplier_l1 {
        checks.push(match bound {
            Some(b) => Check { name: "multiplier", verdict: verdict(l1 <= b), detail: format!("max |lambda|_1 = {l1:.4} vs L d / eps = {b:.4}") },
            None => Check { name: "multiplier", verdict: Verdict::Skipped, detail: "no multiplier bound".into() },
        });
    }
    Ok(Report { fit, final_error, max_constraint_violation, max_multiplier_l1, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rate: f64, with_f: bool) -> CsvTable {
        let mut header = vec!["t".to_string(), "err".to_string()];
        if with_f {
            header.extend(["f_1".into(), "lam_1".into(), "c".into(), "s".into()]);
        }
        let rows = (0..=1000)
            .map(|i| {
                let t = i as f64 * 0.01;
                let mut r = vec![t, 2.0 * (-rate * t).exp()];
                if with_f {
                    r.extend([-0.1 - t, 0.5, t.exp(), 0.0]);
                }
                r
            })
            .collect();
        CsvTable { header, rows }
    }

    #[test]
    fn rate_close_to_alpha_passes() {
        let r = build_report(&table(0.97, false), Some(1.0), None).unwrap();
        assert!((r.fit.as_ref().unwrap().rate - 0.97).abs() < 1e-9);
        assert_eq!(r.checks[0].verdict, Verdict::Pass);
        assert!(r.passed());
    }

    #[test]
    fn slow_decay_fails() {
        let r = build_report(&table(0.9, false), Some(1.0), None).unwrap();
        assert_eq!(r.checks[0].verdict, Verdict::Fail);
        assert!(!r.passed());
    }

    #[test]
    fn constraint_and_multiplier_checks() {
        let r = build_report(&table(1.0, true), Some(1.0), Some(0.25)).unwrap();
        assert_eq!(r.max_constraint_violation, Some(0.0));
        assert_eq!(r.max_multiplier_l1, Some(0.5));
        let m = r.checks.iter().find(|c| c.name == "multiplier").unwrap();
        assert_eq!(m.verdict, Verdict::Fail);
    }

    #[test]
    fn barrier_schedule_caps_the_expected_rate() {
        // c = e^t in the fixture, so alpha_c = 1 and alpha = 3 is capped.
        let mut t = table(0.97, true);
        let r = build_report(&t, Some(3.0), None).unwrap();
        assert_eq!(r.checks[0].verdict, Verdict::Pass);
        for row in &mut t.rows {
            row[4] = (0.5 * row[0]).exp();
        }
        let r = build_report(&t, Some(3.0), None).unwrap();
        assert!(r.checks[0].detail.contains("expected 0.5000"), "{}", r.checks[0].detail);
    }

    #[test]
    fn without_alpha_the_rate_check_is_skipped() {
        let r = build_report(&table(1.0, false), None, None).unwrap();
        assert_eq!(r.checks[0].verdict, Verdict::Skipped);
        assert!(r.passed());
    }

    #[test]
    fn summary_lines() {
        let s = parse_summary("alpha = 0.999999\nscenario = tracking\n");
        assert_eq!(s["alpha"], "0.999999");
        assert_eq!(s["scenario"], "tracking");
    }
}
