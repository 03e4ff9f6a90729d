//! Embedded Dormand–Prince 5(4) integrator with proportional step control.
//!
//! The right-hand side may fail. Domain errors (see
//! [`Error::is_domain_error`]) reject the trial step and halve it; if that
//! drives the step below the minimum, the domain error itself is returned.
//! Any other error aborts the integration.

use crate::error::{Error, Result};
use crate::numerics::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Disables error control and marches with this step.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            min_step: 1e-10,
            max_step: 0.1,
            fixed_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(self.min_step > 0.0) {
            return bad("min_step must be positive");
        }
        if !(self.max_step >= self.min_step) {
            return bad("max_step must be at least min_step");
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0) {
                return bad("fixed_step must be positive");
            }
        }
        Ok(())
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub domain_rejections: usize,
    pub rhs_evals: usize,
}

/// Stateful stepper. Keeps the controlled step size and the FSAL stage
/// between calls to [`OdeStepper::advance_to`], so integrating over a grid
/// of sample times costs the same as one long integration.
pub struct OdeStepper<F> {
    rhs: F,
    cfg: IntegratorConfig,
    t: f64,
    y: Vector,
    h: Option<f64>,
    k1: Option<Vector>,
    pub stats: OdeStats,
}

fn lincomb(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vector {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        let s = h * c;
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += s * ki;
        }
    }
    out
}

enum Trial {
    Done { y: Vector, k7: Vector, err: f64 },
    Domain(Error),
}

impl<F> OdeStepper<F>
where
    F: FnMut(f64, &[f64]) -> Result<Vector>,
{
    pub fn new(rhs: F, t0: f64, y0: Vector, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rhs,
            cfg,
            t: t0,
            y: y0,
            h: None,
            k1: None,
            stats: OdeStats::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    fn eval(&mut self, t: f64, y: &[f64]) -> Result<Vector> {
        self.stats.rhs_evals += 1;
        (self.rhs)(t, y)
    }

    fn first_stage(&mut self) -> Result<Vector> {
        match self.k1.take() {
            Some(k) => Ok(k),
            None => {
                let (t, y) = (self.t, self.y.clone());
                self.eval(t, &y)
            }
        }
    }

    fn initial_step(&mut self, k1: &[f64], span: f64) -> f64 {
        if let Some(h) = self.cfg.fixed_step {
            return h;
        }
        let scale = |y: f64| self.cfg.abs_tol + self.cfg.rel_tol * y.abs();
        let n = self.y.len().max(1) as f64;
        let d0 = (self.y.iter().map(|y| (y / scale(*y)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self
            .y
            .iter()
            .zip(k1)
            .map(|(y, f)| (f / scale(*y)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(self.cfg.max_step).min(span).max(self.cfg.min_step)
    }

    fn trial(&mut self, k1: &[f64], h: f64) -> Result<Trial> {
        let t = self.t;
        let y = self.y.clone();
        macro_rules! stage {
            ($tt:expr, $yy:expr) => {
                match self.eval($tt, &$yy) {
                    Ok(k) => k,
                    Err(e) if e.is_domain_error() => return Ok(Trial::Domain(e)),
                    Err(e) => return Err(e),
                }
            };
        }
        let y2 = lincomb(&y, h, &[(A21, k1)]);
        let k2 = stage!(t + C2 * h, y2);
        let y3 = lincomb(&y, h, &[(A31, k1), (A32, &k2)]);
        let k3 = stage!(t + C3 * h, y3);
        let y4 = lincomb(&y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
        let k4 = stage!(t + C4 * h, y4);
        let y5 = lincomb(&y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = stage!(t + C5 * h, y5);
        let y6 = lincomb(
            &y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let k6 = stage!(t + h, y6);
        let y_new = lincomb(
            &y,
            h,
            &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = stage!(t + h, y_new);

        let n = y.len().max(1) as f64;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            acc += (e / sc).powi(2);
        }
        let err = (acc / n).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Ok(Trial::Done {
                y: y_new,
                k7,
                err: f64::INFINITY,
            });
        }
        Ok(Trial::Done { y: y_new, k7, err })
    }

    /// Integrates up to exactly `t_end`, invoking `observer(t, y)` after
    /// every accepted step.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        mut observer: impl FnMut(f64, &[f64]),
    ) -> Result<&[f64]> {
        let mut k1 = self.first_stage()?;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(&k1, t_end - self.t),
        };
        while self.t < t_end {
            let remaining = t_end - self.t;
            let controlled = h.min(self.cfg.max_step);
            // Land exactly on t_end when we are within a hair of it.
            let (step, hits_end) = if controlled >= remaining * (1.0 - 1e-12) {
                (remaining, true)
            } else {
                (controlled, false)
            };
            if !hits_end && step < self.cfg.min_step {
                return Err(Error::StepUnderflow { t: self.t, step });
            }
            match self.trial(&k1, step)? {
                Trial::Domain(e) => {
                    self.stats.domain_rejections += 1;
                    h = step * 0.5;
                    if h < self.cfg.min_step {
                        // The domain violation explains the underflow better.
                        return Err(e);
                    }
                }
                Trial::Done { y, k7, err } => {
                    let fixed = self.cfg.fixed_step.is_some();
                    if fixed || err <= 1.0 {
                        self.stats.accepted += 1;
                        self.t = if hits_end { t_end } else { self.t + step };
                        self.y = y;
                        k1 = k7;
                        observer(self.t, &self.y);
                        h = match self.cfg.fixed_step {
                            Some(hf) => hf,
                            None => {
                                let factor = if err == 0.0 {
                                    MAX_FACTOR
                                } else {
                                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                                };
                                // A step clipped to reach t_end says nothing
                                // about the controller's preferred size.
                                if hits_end && step < controlled {
                                    controlled.max(step * factor)
                                } else {
                                    step * factor
                                }
                            }
                        };
                    } else {
                        self.stats.rejected += 1;
                        let factor = if err.is_finite() {
                            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                        } else {
                            MIN_FACTOR
                        };
                        h = step * factor;
                        if h < self.cfg.min_step {
                            return Err(Error::StepUnderflow { t: self.t, step: h });
                        }
                    }
                }
            }
        }
        self.h = Some(h);
        self.k1 = Some(k1);
        Ok(&self.y)
    }
}

/// One-shot integration of `rhs` over `[t0, t1]`.
pub fn integrate_ode<F>(
    rhs: F,
    state0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    observer: impl FnMut(f64, &[f64]),
) -> Result<Vector>
where
    F: FnMut(f64, &[f64]) -> Result<Vector>,
{
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "integration span must satisfy t1 > t0, got [{t0}, {t1}]"
        )));
    }
    let mut stepper = OdeStepper::new(rhs, t0, state0.to_vec(), *cfg)?;
    stepper.advance_to(t1, observer)?;
    Ok(stepper.y)
}
