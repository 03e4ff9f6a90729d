//! Optimization dynamics: the implicit equations that force the gradient
//! stack onto the target system, solved for the highest output derivative.

mod barrier;
mod jet;
mod lagrangian;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{solve_linear, DenseMatrix, Vector};
use crate::problem::{flow_remainder, TvEqualityConstraints, TvFunction, TvInequalityConstraints, TvObjective};
use crate::target::TargetSystemSpec;

pub use barrier::{barrier_objective, multiplier_diagnostics, slack_initial, BarrierObjective, BarrierSchedule, MultiplierDiagnostics};
pub use jet::{OutputJet, PrimalDualJet};
pub use lagrangian::{check_rank, initial_dual_jet, kkt_matrix, Lagrangian, RANK_THRESHOLD};

/// Hessian, the running gradient derivatives `∇^{(0)}..∇^{(k-1)}` and the
/// order-`k` remainder at one jet.
struct FlowTerms {
    hessian: DenseMatrix,
    running: Vec<Vector>,
    remainder: Vector,
}

fn flow_terms(func: &dyn TvFunction, spec: &TargetSystemSpec, jet: &OutputJet, t: f64) -> Result<FlowTerms> {
    let k = spec.order();
    if jet.order() != k {
        return Err(Error::Dimension(format!(
            "jet order {} does not match target order {k}",
            jet.order()
        )));
    }
    if jet.dim() != func.dim() {
        return Err(Error::Dimension(format!(
            "jet dimension {} does not match problem dimension {}",
            jet.dim(),
            func.dim()
        )));
    }
    let y = jet.value(0);
    let hessian = func.hess(y, t)?;
    let mut running = vec![func.grad(y, t)?];
    for i in 1..k {
        // ∇^{(i)} = H y^{(i)} + remainder at order i.
        let mut d = hessian.matvec(jet.value(i));
        crate::numerics::axpy(1.0, &flow_remainder(func, &jet.truncated(i), t, i)?, &mut d);
        running.push(d);
    }
    let remainder = flow_remainder(func, jet, t, k)?;
    Ok(FlowTerms {
        hessian,
        running,
        remainder,
    })
}

/// `Σ a_i ∇^{(i)} + remainder`, the part of the implicit equation that does
/// not depend on `y^{(k)}`.
fn known_part(terms: &FlowTerms, spec: &TargetSystemSpec) -> Vector {
    let mut rhs = terms.remainder.clone();
    for (a, d) in spec.coeffs().iter().zip(&terms.running) {
        crate::numerics::axpy(*a, d, &mut rhs);
    }
    rhs
}

/// Solves `∇^{(k)} f + Σ a_i ∇^{(i)} f = 0` for `y^{(k)}` with an arbitrary
/// smooth function (objective, barrier-augmented objective or Lagrangian).
pub fn flow_highest_derivative(func: &dyn TvFunction, spec: &TargetSystemSpec, jet: &OutputJet, t: f64) -> Result<Vector> {
    let terms = flow_terms(func, spec, jet, t)?;
    let rhs = known_part(&terms, spec);
    let neg: Vector = rhs.iter().map(|v| -v).collect();
    solve_linear(&terms.hessian, &neg)
}

/// Residual of the implicit optimization dynamics at a candidate highest
/// derivative: `H y^{(k)} + remainder + Σ a_i ∇^{(i)}`.
pub fn flow_residual(func: &dyn TvFunction, spec: &TargetSystemSpec, jet: &OutputJet, highest: &[f64], t: f64) -> Result<Vector> {
    let terms = flow_terms(func, spec, jet, t)?;
    let mut r = terms.hessian.matvec(highest);
    crate::numerics::axpy(1.0, &known_part(&terms, spec), &mut r);
    Ok(r)
}

/// Unconstrained controller: `y^{(k)}` that makes the gradient stack obey
/// the target system.
pub fn g_unc(obj: &TvObjective, spec: &TargetSystemSpec, jet: &OutputJet, t: f64) -> Result<Vector> {
    flow_highest_derivative(obj.func.as_ref(), spec, jet, t)
}

/// Equality-constrained controller on `z = (y, ν)`: returns `z^{(k)}`.
pub fn g_eq(obj: &TvObjective, eq: &TvEqualityConstraints, spec: &TargetSystemSpec, zjet: &PrimalDualJet, t: f64) -> Result<Vector> {
    check_rank(eq, t)?;
    if zjet.dual_dim() != eq.count() {
        return Err(Error::Dimension(format!(
            "jet carries {} multipliers, problem has {} constraints",
            zjet.dual_dim(),
            eq.count()
        )));
    }
    let lag = Lagrangian::new(obj.func.clone(), eq.func.clone())?;
    flow_highest_derivative(&lag, &spec.with_dim(lag.dim()), zjet.jet(), t)
}

/// Inequality-constrained controller: the unconstrained law applied to the
/// barrier-augmented objective.
pub fn g_ineq(
    obj: &TvObjective,
    ineq: &TvInequalityConstraints,
    sched: &BarrierSchedule,
    spec: &TargetSystemSpec,
    jet: &OutputJet,
    t: f64,
) -> Result<Vector> {
    let phi = barrier_objective(obj, ineq, sched)?;
    g_unc(&phi, spec, jet, t)
}

/// Convenience wrapper used by the equality path and tests.
pub fn lagrangian_function(obj: &TvObjective, eq: &TvEqualityConstraints) -> Result<Arc<dyn TvFunction>> {
    Ok(Arc::new(Lagrangian::new(obj.func.clone(), eq.func.clone())?))
}
