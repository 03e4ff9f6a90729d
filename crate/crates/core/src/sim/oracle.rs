//! Independent per-time solver for the instantaneous optimum. It shares no
//! solution path with the closed loop: Newton iterations here, ODE flow
//! there.

use crate::dynamics::{BarrierObjective, BarrierSchedule};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm2, singular_values, solve_linear, DenseMatrix, Vector};
use crate::problem::{TvEqualityConstraints, TvFunction, TvInequalityConstraints, TvObjective};

pub const GRAD_TOL: f64 = 1e-12;
pub const MAX_NEWTON: usize = 200;
/// Final barrier weight of the path-following oracle.
pub const FINAL_BARRIER: f64 = 1e8;
const BARRIER_GROWTH: f64 = 10.0;
/// Squared Newton decrement below which a full step is taken without line
/// search (the iterate is inside the quadratic-convergence region).
const FULL_STEP_DECREMENT: f64 = 1e-12;
const TINY_DECREMENT: f64 = 1e-26;
const STEP_RESOLUTION: f64 = 1e-15;

#[derive(Clone, Copy)]
pub enum OracleProblem<'a> {
    Unconstrained(&'a TvObjective),
    Equality(&'a TvObjective, &'a TvEqualityConstraints),
    Inequality(&'a TvObjective, &'a TvInequalityConstraints),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub y: Vector,
    /// Equality multipliers.
    pub nu: Option<Vector>,
    /// Inequality multipliers recovered from the final barrier stage.
    pub lambda: Option<Vector>,
    pub iterations: usize,
}

type Model = (f64, Vector, DenseMatrix);

/// Damped Newton minimization. `value` is used for the line search and may
/// fail with a domain error, which shortens the step.
fn newton_minimize(
    model: impl Fn(&[f64]) -> Result<Model>,
    value: impl Fn(&[f64]) -> Result<f64>,
    x0: &[f64],
    t: f64,
    budget: &mut usize,
) -> Result<Vector> {
    let mut x = x0.to_vec();
    loop {
        let (f, g, h) = model(&x)?;
        let gnorm = norm2(&g);
        if gnorm <= GRAD_TOL {
            return Ok(x);
        }
        if *budget == 0 {
            return Err(Error::NoConvergence { t, iterations: MAX_NEWTON, residual: gnorm });
        }
        *budget -= 1;
        let d = solve_linear(&h, &g.iter().map(|v| -v).collect::<Vector>())?;
        let dec2 = -dot(&g, &d);
        // Near a stiff barrier the gradient carries roundoff far above
        // GRAD_TOL; a step at the resolution of x means nothing is left.
        if dec2 <= TINY_DECREMENT || norm2(&d) <= STEP_RESOLUTION * (1.0 + norm2(&x)) {
            return Ok(x);
        }
        let mut step = 1.0;
        loop {
            let trial: Vector = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let accept = match value(&trial) {
                Ok(ft) => dec2 < FULL_STEP_DECREMENT && step == 1.0 || ft <= f - 1e-4 * step * dec2,
                Err(e) if e.is_domain_error() => false,
                Err(e) => return Err(e),
            };
            if accept {
                x = trial;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(Error::NoConvergence { t, iterations: MAX_NEWTON - *budget, residual: gnorm });
            }
        }
    }
}

fn objective_model(f: &dyn TvFunction, t: f64) -> impl Fn(&[f64]) -> Result<Model> + '_ {
    move |y| Ok((f.value(y, t)?, f.grad(y, t)?, f.hess(y, t)?))
}

fn unconstrained(obj: &TvObjective, t: f64, x0: &[f64]) -> Result<OracleSolution> {
    let f = obj.func.as_ref();
    let mut budget = MAX_NEWTON;
    let y = newton_minimize(objective_model(f, t), |y| f.value(y, t), x0, t, &mut budget)?;
    Ok(OracleSolution { y, nu: None, lambda: None, iterations: MAX_NEWTON - budget })
}

fn equality(obj: &TvObjective, eq: &TvEqualityConstraints, t: f64, y0: &[f64]) -> Result<OracleSolution> {
    let f = obj.func.as_ref();
    let a = eq.func.matrix(t);
    let b = eq.func.rhs(t);
    let (m, q) = (f.dim(), eq.count());
    let sigma_min = *singular_values(&a).last().unwrap_or(&0.0);
    if sigma_min < crate::dynamics::RANK_THRESHOLD {
        return Err(Error::RankDeficient { t, sigma_min });
    }
    let residual = |z: &[f64]| -> Result<Vector> {
        let (y, nu) = z.split_at(m);
        let mut r = f.grad(y, t)?;
        for (ri, v) in r.iter_mut().zip(a.tr_matvec(nu)) {
            *ri += v;
        }
        r.extend(a.matvec(y).iter().zip(&b).map(|(l, r)| l - r));
        Ok(r)
    };
    let mut z: Vector = y0.iter().copied().chain(std::iter::repeat_n(0.0, q)).collect();
    let mut r = residual(&z)?;
    for it in 0..MAX_NEWTON {
        let rn = norm2(&r);
        if rn <= GRAD_TOL {
            let (y, nu) = z.split_at(m);
            return Ok(OracleSolution { y: y.to_vec(), nu: Some(nu.to_vec()), lambda: None, iterations: it });
        }
        let mut k = DenseMatrix::zeros(m + q, m + q);
        k.set_block(0, 0, &f.hess(&z[..m], t)?);
        k.set_block(0, m, &a.transpose());
        k.set_block(m, 0, &a);
        let dz = solve_linear(&k, &r.iter().map(|v| -v).collect::<Vector>())?;
        let mut step = 1.0;
        loop {
            let trial: Vector = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
            let rt = residual(&trial)?;
            if norm2(&rt) <= (1.0 - 0.01 * step) * rn || step < 1e-10 {
                z = trial;
                r = rt;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::NoConvergence { t, iterations: MAX_NEWTON, residual: norm2(&r) })
}

fn constraint_values(ineq: &TvInequalityConstraints, y: &[f64], t: f64) -> Result<Vector> {
    ineq.funcs.iter().map(|c| c.value(y, t)).collect()
}

/// Finds a strictly feasible point by minimizing `τσ − Σ log(σ − f_i(y))`
/// plus a small proximal term over `(y, σ)`, stopping at the first
/// iterate with every `f_i(y) < 0`.
fn phase_one(ineq: &TvInequalityConstraints, t: f64, y0: &[f64]) -> Result<Vector> {
    const PROX: f64 = 1e-3;
    let m = y0.len();
    let worst = constraint_values(ineq, y0, t)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut x: Vector = y0.iter().copied().chain([worst + 1.0]).collect();
    let margins = |x: &[f64]| -> Result<Vector> {
        let (y, s) = x.split_at(m);
        let mut w = Vec::with_capacity(ineq.len());
        for (i, c) in ineq.funcs.iter().enumerate() {
            let wi = s[0] - c.value(y, t)?;
            if !(wi > 0.0) {
                return Err(Error::BarrierDomain { t, index: i, margin: wi });
            }
            w.push(wi);
        }
        Ok(w)
    };
    let mut tau = 1.0;
    let mut budget = MAX_NEWTON;
    while tau <= FINAL_BARRIER {
        let value = |x: &[f64]| -> Result<f64> {
            let w = margins(x)?;
            let prox: f64 = x[..m].iter().zip(y0).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(tau * x[m] - w.iter().map(|v| v.ln()).sum::<f64>() + 0.5 * PROX * prox)
        };
        let model = |x: &[f64]| -> Result<Model> {
            let w = margins(x)?;
            let y = &x[..m];
            let mut g = vec![0.0; m + 1];
            let mut h = DenseMatrix::zeros(m + 1, m + 1);
            for i in 0..m {
                g[i] = PROX * (y[i] - y0[i]);
                h[(i, i)] = PROX;
            }
            g[m] = tau;
            for (c, wi) in ineq.funcs.iter().zip(&w) {
                let gi: Vector = c.grad(y, t)?.into_iter().chain([-1.0]).collect();
                let mut hi = DenseMatrix::zeros(m + 1, m + 1);
                hi.set_block(0, 0, &c.hess(y, t)?);
                // −log(σ − f): gradient (∇f, −1)/w, Hessian (H_f ⊕ 0)/w + ggᵀ/w².
                for (gk, v) in g.iter_mut().zip(&gi) {
                    *gk += v / wi;
                }
                h.add_scaled(1.0 / wi, &hi);
                h.add_outer(1.0 / (wi * wi), &gi, &gi);
            }
            Ok((value(x)?, g, h))
        };
        // Centre, but stop as soon as the iterate is strictly feasible.
        let mut stage_budget = budget;
        match newton_minimize(&model, &value, &x, t, &mut stage_budget) {
            Ok(next) => x = next,
            Err(Error::NoConvergence { .. }) if stage_budget == 0 => {}
            Err(e) => return Err(e),
        }
        budget = stage_budget;
        if constraint_values(ineq, &x[..m], t)?.iter().all(|v| *v < 0.0) {
            return Ok(x[..m].to_vec());
        }
        if budget == 0 {
            break;
        }
        tau *= BARRIER_GROWTH;
    }
    Err(Error::NoConvergence { t, iterations: MAX_NEWTON, residual: x[m] })
}

fn inequality(obj: &TvObjective, ineq: &TvInequalityConstraints, t: f64, y0: &[f64]) -> Result<OracleSolution> {
    let mut y = if constraint_values(ineq, y0, t)?.iter().all(|v| *v < 0.0) {
        y0.to_vec()
    } else {
        phase_one(ineq, t, y0)?
    };
    let f = obj.func.as_ref();
    let mut tau = 1.0;
    let mut iterations = 0;
    loop {
        let value = |y: &[f64]| -> Result<f64> {
            let mut v = f.value(y, t)?;
            for (i, c) in ineq.funcs.iter().enumerate() {
                let w = -c.value(y, t)?;
                if !(w > 0.0) {
                    return Err(Error::BarrierDomain { t, index: i, margin: w });
                }
                v -= w.ln() / tau;
            }
            Ok(v)
        };
        let model = |y: &[f64]| -> Result<Model> {
            let mut g = f.grad(y, t)?;
            let mut h = f.hess(y, t)?;
            for (i, c) in ineq.funcs.iter().enumerate() {
                let w = -c.value(y, t)?;
                if !(w > 0.0) {
                    return Err(Error::BarrierDomain { t, index: i, margin: w });
                }
                let gi = c.grad(y, t)?;
                crate::numerics::axpy(1.0 / (tau * w), &gi, &mut g);
                h.add_scaled(1.0 / (tau * w), &c.hess(y, t)?);
                h.add_outer(1.0 / (tau * w * w), &gi, &gi);
            }
            Ok((value(y)?, g, h))
        };
        let mut budget = MAX_NEWTON;
        y = newton_minimize(model, value, &y, t, &mut budget)?;
        iterations += MAX_NEWTON - budget;
        if tau >= FINAL_BARRIER {
            break;
        }
        tau = (tau * BARRIER_GROWTH).min(FINAL_BARRIER);
    }
    let lambda = constraint_values(ineq, &y, t)?.iter().map(|v| 1.0 / (tau * -v)).collect();
    Ok(OracleSolution { y, nu: None, lambda: Some(lambda), iterations })
}

/// Minimizer of the problem at time `t`. The first solve of a run starts
/// from the origin; later ones may warm-start from the previous oracle
/// solution, never from closed-loop state.
pub fn solve_optimum_oracle(problem: OracleProblem<'_>, t: f64, warm_start: Option<&[f64]>) -> Result<OracleSolution> {
    let dim = match problem {
        OracleProblem::Unconstrained(o) | OracleProblem::Equality(o, _) | OracleProblem::Inequality(o, _) => o.dim(),
    };
    let zero = vec![0.0; dim];
    let x0 = warm_start.unwrap_or(&zero);
    if x0.len() != dim {
        return Err(Error::Dimension(format!("warm start has {} entries, expected {dim}", x0.len())));
    }
    match problem {
        OracleProblem::Unconstrained(obj) => unconstrained(obj, t, x0),
        OracleProblem::Equality(obj, eq) => equality(obj, eq, t, x0),
        OracleProblem::Inequality(obj, ineq) => inequality(obj, ineq, t, x0),
    }
}

/// Minimizer `ŷ*(t)` of the barrier-augmented objective, by damped Newton
/// from a point inside the shifted domain.
pub fn solve_barrier_optimum(
    obj: &TvObjective,
    ineq: &TvInequalityConstraints,
    sched: &BarrierSchedule,
    t: f64,
    start: &[f64],
) -> Result<Vector> {
    let phi = BarrierObjective::new(obj.func.clone(), ineq.funcs.clone(), *sched)?;
    let mut budget = MAX_NEWTON;
    newton_minimize(objective_model(&phi, t), |y| phi.value(y, t), start, t, &mut budget)
}
