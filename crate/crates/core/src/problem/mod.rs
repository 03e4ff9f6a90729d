//! Time-varying objectives and constraints with analytic partial-derivative
//! callbacks, and the gradient-flow split that drives every controller.

mod functions;
mod validate;

use std::fmt;
use std::sync::Arc;

use crate::dynamics::OutputJet;
use crate::error::{Error, Result};
use crate::numerics::{singular_values, symmetric_eigenvalues, DenseMatrix, Vector};

pub use functions::{
    AffineConstraint, LogCoshObjective, PairDistanceConstraint, Reference, SinusoidalEquality,
    SinusoidalReference, StackedReference, TrackingObjective,
};
pub use validate::{check_derivatives, validate_problem, CallbackCheck, ValidationReport};

/// A smooth scalar function `f(y, t)` together with the partial derivatives
/// the controllers consume.
///
/// `hess_dir(y, t, v)` is the third-derivative tensor contracted with `v`,
/// i.e. the directional derivative of the Hessian along `v`. `grad_ty` is
/// `∂_y ∇_yt f`, which equals `hess_t` for smooth functions; implementors may
/// override it but rarely need to.
pub trait TvFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64], t: f64) -> Result<f64>;
    fn grad(&self, y: &[f64], t: f64) -> Result<Vector>;
    fn hess(&self, y: &[f64], t: f64) -> Result<DenseMatrix>;
    fn grad_t(&self, y: &[f64], t: f64) -> Result<Vector>;
    fn hess_dir(&self, y: &[f64], t: f64, v: &[f64]) -> Result<DenseMatrix>;
    fn hess_t(&self, y: &[f64], t: f64) -> Result<DenseMatrix>;
    fn grad_tt(&self, y: &[f64], t: f64) -> Result<Vector>;

    fn grad_ty(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        self.hess_t(y, t)
    }

    /// `∂_t f`. Required for functions used as inequality constraints.
    fn value_t(&self, _y: &[f64], _t: f64) -> Result<f64> {
        Err(Error::MissingCallback("value_t"))
    }

    /// `∂_tt f`. Required for functions used as inequality constraints.
    fn value_tt(&self, _y: &[f64], _t: f64) -> Result<f64> {
        Err(Error::MissingCallback("value_tt"))
    }

    /// Bundled first-order evaluation. Override when the four quantities
    /// share expensive subexpressions.
    fn eval_jet(&self, y: &[f64], t: f64) -> Result<ObjectiveJet> {
        Ok(ObjectiveJet {
            value: self.value(y, t)?,
            grad: self.grad(y, t)?,
            hess: self.hess(y, t)?,
            grad_t: self.grad_t(y, t)?,
        })
    }

    /// Extension hook for flat orders above two: the part of the `order`-th
    /// total time derivative of `∇_y f` that does not involve `y^{(order)}`.
    /// `jet` carries `y^{(0)}..y^{(order-1)}`.
    fn flow_remainder(&self, _jet: &OutputJet, _t: f64, _order: usize) -> Option<Result<Vector>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveJet {
    pub value: f64,
    pub grad: Vector,
    pub hess: DenseMatrix,
    pub grad_t: Vector,
}

/// Strongly convex time-varying objective with its declared regularity
/// constants (strong convexity `m_f` and gradient Lipschitz constant `L`).
#[derive(Clone)]
pub struct TvObjective {
    pub func: Arc<dyn TvFunction>,
    pub strong_convexity: f64,
    pub lipschitz: f64,
}

impl fmt::Debug for TvObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TvObjective")
            .field("dim", &self.func.dim())
            .field("strong_convexity", &self.strong_convexity)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl TvObjective {
    pub fn new(func: Arc<dyn TvFunction>, strong_convexity: f64, lipschitz: f64) -> Result<Self> {
        if !(strong_convexity > 0.0) {
            return Err(Error::InvalidArgument("m_f must be positive".into()));
        }
        if !(lipschitz >= strong_convexity) {
            return Err(Error::InvalidArgument("L must be at least m_f".into()));
        }
        Ok(Self {
            func,
            strong_convexity,
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    /// Spot-checks symmetry and `m_f I ⪯ ∇_yy f ⪯ L I` at the given samples.
    /// Returns the extreme eigenvalues seen.
    pub fn check_curvature(&self, samples: &[(Vector, f64)]) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, (y, t)) in samples.iter().enumerate() {
            let h = self.func.hess(y, *t)?;
            if h.asymmetry() > 1e-9 * (1.0 + h.max_abs()) {
                return Err(Error::InvalidArgument(format!(
                    "Hessian not symmetric at sample {i}"
                )));
            }
            let ev = symmetric_eigenvalues(&h);
            lo = lo.min(ev[0]);
            hi = hi.max(*ev.last().unwrap());
        }
        let slack = 1e-9 * (1.0 + self.lipschitz);
        if lo < self.strong_convexity - slack || hi > self.lipschitz + slack {
            return Err(Error::InvalidArgument(format!(
                "sampled Hessian spectrum [{lo}, {hi}] outside declared [{}, {}]",
                self.strong_convexity, self.lipschitz
            )));
        }
        Ok((lo, hi))
    }
}

/// Time-varying affine equality constraints `A(t) y = b(t)` and their time
/// derivatives.
pub trait EqualityConstraintFn: Send + Sync {
    fn dim(&self) -> usize;
    fn count(&self) -> usize;
    fn matrix(&self, t: f64) -> DenseMatrix;
    fn rhs(&self, t: f64) -> Vector;
    fn matrix_dot(&self, t: f64) -> DenseMatrix;
    fn rhs_dot(&self, t: f64) -> Vector;
    fn matrix_ddot(&self, t: f64) -> DenseMatrix;
    fn rhs_ddot(&self, t: f64) -> Vector;
}

/// Equality constraints with declared singular-value bounds
/// `τ_min ≤ σ(A(t)) ≤ τ_max`.
#[derive(Clone)]
pub struct TvEqualityConstraints {
    pub func: Arc<dyn EqualityConstraintFn>,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl fmt::Debug for TvEqualityConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TvEqualityConstraints")
            .field("count", &self.func.count())
            .field("tau_min", &self.tau_min)
            .field("tau_max", &self.tau_max)
            .finish()
    }
}

impl TvEqualityConstraints {
    pub fn new(func: Arc<dyn EqualityConstraintFn>, tau_min: f64, tau_max: f64) -> Result<Self> {
        if func.count() >= func.dim() {
            return Err(Error::InvalidArgument(format!(
                "need fewer equality constraints ({}) than outputs ({})",
                func.count(),
                func.dim()
            )));
        }
        if !(tau_min > 0.0 && tau_max >= tau_min) {
            return Err(Error::InvalidArgument(
                "need 0 < tau_min <= tau_max".into(),
            ));
        }
        Ok(Self {
            func,
            tau_min,
            tau_max,
        })
    }

    pub fn count(&self) -> usize {
        self.func.count()
    }

    /// Checks the declared singular-value bounds at sampled times.
    pub fn check_singular_values(&self, times: &[f64]) -> Result<()> {
        for &t in times {
            let sv = singular_values(&self.func.matrix(t));
            let (hi, lo) = (sv[0], *sv.last().unwrap());
            if lo < self.tau_min * (1.0 - 1e-12) || hi > self.tau_max * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "singular values [{lo}, {hi}] of A({t}) outside [{}, {}]",
                    self.tau_min, self.tau_max
                )));
            }
        }
        Ok(())
    }
}

/// Convex inequality constraints `f_i(y, t) ≤ 0` with the declared uniform
/// MFCQ constants `d` (direction bound) and `ε` (descent margin).
#[derive(Clone)]
pub struct TvInequalityConstraints {
    pub funcs: Vec<Arc<dyn TvFunction>>,
    pub mfcq_d: f64,
    pub mfcq_eps: f64,
}

impl fmt::Debug for TvInequalityConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TvInequalityConstraints")
            .field("count", &self.funcs.len())
            .field("mfcq_d", &self.mfcq_d)
            .field("mfcq_eps", &self.mfcq_eps)
            .finish()
    }
}

impl TvInequalityConstraints {
    pub fn new(funcs: Vec<Arc<dyn TvFunction>>, mfcq_d: f64, mfcq_eps: f64) -> Result<Self> {
        if !(mfcq_d > 0.0 && mfcq_eps > 0.0) {
            return Err(Error::InvalidArgument("MFCQ constants must be positive".into()));
        }
        Ok(Self {
            funcs,
            mfcq_d,
            mfcq_eps,
        })
    }

    pub fn empty() -> Self {
        Self {
            funcs: Vec::new(),
            mfcq_d: 1.0,
            mfcq_eps: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn values(&self, y: &[f64], t: f64) -> Result<Vector> {
        self.funcs.iter().map(|f| f.value(y, t)).collect()
    }

    /// Sampled midpoint convexity check on every constraint.
    pub fn check_convexity(&self, pairs: &[(Vector, Vector, f64)]) -> Result<()> {
        for (i, f) in self.funcs.iter().enumerate() {
            for (a, b, t) in pairs {
                let mid: Vector = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                let lhs = f.value(&mid, *t)?;
                let rhs = 0.5 * (f.value(a, *t)? + f.value(b, *t)?);
                if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
                    return Err(Error::InvalidArgument(format!(
                        "constraint {i} fails the midpoint convexity check"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Decomposition `∇_y^{(k)} f = hessian · y^{(k)} + remainder`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientFlowSplit {
    pub hessian: DenseMatrix,
    pub remainder: Vector,
}

/// Part of the `order`-th total derivative of `∇_y f(y(t), t)` that does not
/// involve `y^{(order)}`. `jet` must carry at least `order` entries.
pub(crate) fn flow_remainder(
    func: &dyn TvFunction,
    jet: &OutputJet,
    t: f64,
    order: usize,
) -> Result<Vector> {
    let y = jet.value(0);
    match order {
        1 => func.grad_t(y, t),
        2 => {
            let v = jet.value(1);
            let mut mixed = func.hess_dir(y, t, v)?;
            mixed.add_scaled(1.0, &func.hess_t(y, t)?);
            mixed.add_scaled(1.0, &func.grad_ty(y, t)?);
            let mut r = mixed.matvec(v);
            for (ri, g) in r.iter_mut().zip(func.grad_tt(y, t)?) {
                *ri += g;
            }
            Ok(r)
        }
        k => func
            .flow_remainder(jet, t, k)
            .unwrap_or(Err(Error::UnsupportedOrder(k))),
    }
}

/// Splits the `order`-th total time derivative of the gradient into the
/// Hessian (coefficient of `y^{(order)}`) and everything else.
pub fn gradient_flow_split(
    func: &dyn TvFunction,
    jet: &OutputJet,
    t: f64,
    order: usize,
) -> Result<GradientFlowSplit> {
    if order == 0 {
        return Err(Error::InvalidArgument("flow split needs order >= 1".into()));
    }
    if jet.order() < order {
        return Err(Error::Dimension(format!(
            "jet carries {} derivatives, order {order} needs {order}",
            jet.order()
        )));
    }
    if jet.dim() != func.dim() {
        return Err(Error::Dimension(format!(
            "jet dimension {} does not match function dimension {}",
            jet.dim(),
            func.dim()
        )));
    }
    let remainder = flow_remainder(func, jet, t, order)?;
    Ok(GradientFlowSplit {
        hessian: func.hess(jet.value(0), t)?,
        remainder,
    })
}

/// Value, gradient, Hessian and `∇_yt` in one call.
pub fn eval_objective_jet(obj: &TvObjective, y: &[f64], t: f64) -> Result<ObjectiveJet> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite output".into()));
    }
    obj.func.eval_jet(y, t)
}
