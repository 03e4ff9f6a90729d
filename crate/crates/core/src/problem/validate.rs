//! Finite-difference validation of derivative callbacks.

use super::TvFunction;
use crate::error::{Error, Result};
use crate::numerics::{try_finite_difference, DenseMatrix, Vector};

/// Base finite-difference step. Each check also tries `h/10` and `h/100`
/// and keeps the best agreement, which handles points close to a barrier
/// boundary where large steps leave the domain or hit strong curvature.
const BASE_STEP: f64 = 1e-5;
const STEP_LADDER: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Debug, Clone, PartialEq)]
pub struct CallbackCheck {
    pub callback: &'static str,
    pub max_error: f64,
    pub worst_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CallbackCheck>,
    /// Callbacks the function does not supply (checked nowhere).
    pub skipped: Vec<&'static str>,
}

impl ValidationReport {
    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_error).fold(0.0, f64::max)
    }

    pub fn first_failure(&self, tol: f64) -> Option<&CallbackCheck> {
        self.checks.iter().find(|c| !(c.max_error <= tol))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.first_failure(tol).is_none()
    }

    fn record(&mut self, callback: &'static str, sample: usize, error: f64) {
        match self.checks.iter_mut().find(|c| c.callback == callback) {
            Some(c) => {
                if error > c.max_error || error.is_nan() {
                    c.max_error = error;
                    c.worst_sample = sample;
                }
            }
            None => self.checks.push(CallbackCheck {
                callback,
                max_error: error,
                worst_sample: sample,
            }),
        }
    }
}

/// `‖a − b‖ / max(‖b‖, 1)`.
fn rel_err(analytic: &[f64], estimate: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = estimate.iter().map(|b| b * b).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

/// Smallest relative error over the step ladder. Steps that leave the domain
/// are skipped; if all do, the domain error is returned.
fn best_error(analytic: &[f64], fd: impl Fn(f64) -> Result<Vector>) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut last_err = None;
    for scale in STEP_LADDER {
        match fd(BASE_STEP * scale) {
            Ok(est) => best = best.min(rel_err(analytic, &est)),
            Err(e) if e.is_domain_error() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (best.is_finite(), last_err) {
        (false, Some(e)) => Err(e),
        _ => Ok(best),
    }
}

fn shifted(y: &[f64], dir: &[f64], s: f64) -> Vector {
    y.iter().zip(dir).map(|(a, d)| a + s * d).collect()
}

fn unit(n: usize, i: usize) -> Vector {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Column-by-column finite-difference Jacobian of `g` at `y`, flattened row
/// major to match [`DenseMatrix::as_slice`].
fn fd_jacobian(g: &dyn Fn(&[f64]) -> Result<Vector>, y: &[f64], h: f64) -> Result<Vector> {
    let n = y.len();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let e = unit(n, i);
        cols.push(try_finite_difference(|s| g(&shifted(y, &e, s)), 0.0, 1, h)?);
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DenseMatrix::from_fn(rows, n, |r, c| cols[c][r]).as_slice().to_vec())
}

fn probe_direction(n: usize) -> Vector {
    let v: Vector = (0..n).map(|i| (1.0 + 0.7 * i as f64).cos()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::MissingCallback(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Compares every derivative callback of `func` against finite differences
/// of the next-lower callback at each sample.
pub fn check_derivatives(func: &dyn TvFunction, samples: &[(Vector, f64)]) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let n = func.dim();
    let v = probe_direction(n);
    for (idx, (y, t)) in samples.iter().enumerate() {
        let t = *t;
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "sample {idx} has {} entries, function expects {n}",
                y.len()
            )));
        }
        let value = |z: &[f64]| func.value(z, t).map(|f| vec![f]);
        let grad = |z: &[f64]| func.grad(z, t);
        let hess = |z: &[f64]| func.hess(z, t).map(|m| m.as_slice().to_vec());
        let grad_t = |z: &[f64]| func.grad_t(z, t);

        let e = best_error(&func.grad(y, t)?, |h| fd_jacobian(&value, y, h))?;
        report.record("grad", idx, e);
        let e = best_error(func.hess(y, t)?.as_slice(), |h| fd_jacobian(&grad, y, h))?;
        report.record("hess", idx, e);
        let e = best_error(&func.grad_t(y, t)?, |h| {
            try_finite_difference(|s| func.grad(y, s), t, 1, h)
        })?;
        report.record("grad_t", idx, e);
        let e = best_error(func.hess_dir(y, t, &v)?.as_slice(), |h| {
            try_finite_difference(|s| hess(&shifted(y, &v, s)), 0.0, 1, h)
        })?;
        report.record("hess_dir", idx, e);
        let e = best_error(func.hess_t(y, t)?.as_slice(), |h| {
            try_finite_difference(|s| func.hess(y, s).map(|m| m.as_slice().to_vec()), t, 1, h)
        })?;
        report.record("hess_t", idx, e);
        let e = best_error(func.grad_ty(y, t)?.as_slice(), |h| fd_jacobian(&grad_t, y, h))?;
        report.record("grad_ty", idx, e);
        let e = best_error(&func.grad_tt(y, t)?, |h| {
            try_finite_difference(|s| func.grad_t(y, s), t, 1, h)
        })?;
        report.record("grad_tt", idx, e);

        match optional(func.value_t(y, t))? {
            Some(vt) => {
                let e = best_error(&[vt], |h| {
                    try_finite_difference(|s| func.value(y, s).map(|f| vec![f]), t, 1, h)
                })?;
                report.record("value_t", idx, e);
            }
            None if !report.skipped.contains(&"value_t") => report.skipped.push("value_t"),
            None => {}
        }
        match optional(func.value_tt(y, t))? {
            Some(vtt) => {
                let e = best_error(&[vtt], |h| {
                    try_finite_difference(|s| func.value_t(y, s).map(|f| vec![f]), t, 1, h)
                })?;
                report.record("value_tt", idx, e);
            }
            None if !report.skipped.contains(&"value_tt") => report.skipped.push("value_tt"),
            None => {}
        }
    }
    Ok(report)
}

/// Runs [`check_derivatives`] and fails with the first callback whose worst
/// relative error exceeds `tol`.
pub fn validate_problem(
    func: &dyn TvFunction,
    samples: &[(Vector, f64)],
    tol: f64,
) -> Result<ValidationReport> {
    let report = check_derivatives(func, samples)?;
    if let Some(bad) = report.first_failure(tol) {
        return Err(Error::ValidationFailed {
            callback: bad.callback.to_string(),
            sample: bad.worst_sample,
            error: bad.max_error,
            tol,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LogCoshObjective, ObjectiveJet};
    use std::sync::Arc;

    /// Wraps a function and scales one callback to inject a fault.
    struct Faulty {
        inner: Arc<dyn TvFunction>,
        target: &'static str,
    }

    impl Faulty {
        fn k(&self, name: &str) -> f64 {
            if self.target == name {
                1.1
            } else {
                1.0
            }
        }
        fn sv(&self, name: &str, v: Vector) -> Vector {
            v.into_iter().map(|x| x * self.k(name)).collect()
        }
        fn sm(&self, name: &str, mut m: DenseMatrix) -> DenseMatrix {
            m.scale(self.k(name));
            m
        }
    }

    impl TvFunction for Faulty {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn value(&self, y: &[f64], t: f64) -> Result<f64> {
            self.inner.value(y, t)
        }
        fn grad(&self, y: &[f64], t: f64) -> Result<Vector> {
            Ok(self.sv("grad", self.inner.grad(y, t)?))
        }
        fn hess(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
            Ok(self.sm("hess", self.inner.hess(y, t)?))
        }
        fn grad_t(&self, y: &[f64], t: f64) -> Result<Vector> {
            Ok(self.sv("grad_t", self.inner.grad_t(y, t)?))
        }
        fn hess_dir(&self, y: &[f64], t: f64, v: &[f64]) -> Result<DenseMatrix> {
            Ok(self.sm("hess_dir", self.inner.hess_dir(y, t, v)?))
        }
        fn hess_t(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
            Ok(self.sm("hess_t", self.inner.hess_t(y, t)?))
        }
        fn grad_tt(&self, y: &[f64], t: f64) -> Result<Vector> {
            Ok(self.sv("grad_tt", self.inner.grad_tt(y, t)?))
        }
    }

    fn samples() -> Vec<(Vector, f64)> {
        vec![(vec![0.3, -0.4], 0.5), (vec![1.2, 0.7], 2.0), (vec![-0.8, 0.1], 4.0)]
    }

    #[test]
    fn consistent_function_passes() {
        let f = LogCoshObjective::random(2, 3, 9, true);
        let report = validate_problem(&f, &samples(), 1e-5).unwrap();
        assert!(report.max_error() < 1e-6);
        assert!(report.skipped.is_empty());
    }

    #[test]
    fn every_injected_fault_is_caught() {
        let inner: Arc<dyn TvFunction> = Arc::new(LogCoshObjective::random(2, 3, 9, true));
        for target in ["grad", "hess", "grad_t", "hess_dir", "hess_t", "grad_tt"] {
            let f = Faulty {
                inner: inner.clone(),
                target,
            };
            match validate_problem(&f, &samples(), 1e-5) {
                Err(Error::ValidationFailed { callback, .. }) => {
                    // Scaling a callback also breaks the check that uses it
                    // as the finite-difference source.
                    let ok = callback == target
                        || matches!(
                            (target, callback.as_str()),
                            ("grad", "hess") | ("grad_t", "grad_ty")
                        );
                    assert!(ok, "fault in {target} reported as {callback}");
                }
                other => panic!("fault in {target} not caught: {other:?}"),
            }
        }
    }

    #[test]
    fn grad_fault_is_reported_on_grad() {
        let f = Faulty {
            inner: Arc::new(LogCoshObjective::random(2, 3, 9, true)),
            target: "grad",
        };
        let report = check_derivatives(&f, &samples()).unwrap();
        assert_eq!(report.first_failure(1e-5).unwrap().callback, "grad");
    }

    #[test]
    fn missing_time_value_callbacks_are_skipped() {
        let f = Faulty {
            inner: Arc::new(LogCoshObjective::random(2, 1, 2, false)),
            target: "",
        };
        let report = validate_problem(&f, &samples(), 1e-5).unwrap();
        assert_eq!(report.skipped, vec!["value_t", "value_tt"]);
        let jet: ObjectiveJet = f.eval_jet(&[0.0, 0.0], 0.0).unwrap();
        assert_eq!(jet.grad.len(), 2);
    }
}
