use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{least_squares, singular_values, DenseMatrix, Vector};
use crate::problem::{EqualityConstraintFn, TvEqualityConstraints, TvFunction, TvObjective};

use super::{OutputJet, PrimalDualJet};

/// Below this smallest singular value `A(t)` is treated as rank deficient.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// `L(z, t) = f(y, t) + νᵀ(A(t) y − b(t))` as a function of `z = (y, ν)`,
/// so the unconstrained machinery applies unchanged.
#[derive(Clone)]
pub struct Lagrangian {
    pub objective: Arc<dyn TvFunction>,
    pub constraints: Arc<dyn EqualityConstraintFn>,
}

impl Lagrangian {
    pub fn new(objective: Arc<dyn TvFunction>, constraints: Arc<dyn EqualityConstraintFn>) -> Result<Self> {
        if objective.dim() != constraints.dim() {
            return Err(Error::Dimension(format!(
                "objective has {} outputs, constraints {}",
                objective.dim(),
                constraints.dim()
            )));
        }
        Ok(Self {
            objective,
            constraints,
        })
    }

    fn m(&self) -> usize {
        self.objective.dim()
    }

    fn split<'a>(&self, z: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        if z.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} primal-dual entries, got {}",
                self.dim(),
                z.len()
            )));
        }
        Ok(z.split_at(self.m()))
    }

    /// `(primal + Mᵀν, M y − r)` for a matrix/vector pair.
    fn stack(&self, primal: Vector, mat: &DenseMatrix, y: &[f64], nu: &[f64], rhs: &[f64]) -> Vector {
        let mut out = primal;
        for (o, v) in out.iter_mut().zip(mat.tr_matvec(nu)) {
            *o += v;
        }
        out.extend(mat.matvec(y).iter().zip(rhs).map(|(a, b)| a - b));
        out
    }

    /// `[[block, Mᵀ], [M, 0]]`.
    fn bordered(&self, block: &DenseMatrix, mat: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        let m = self.m();
        let mut k = DenseMatrix::zeros(n, n);
        k.set_block(0, 0, block);
        k.set_block(0, m, &mat.transpose());
        k.set_block(m, 0, mat);
        k
    }
}

impl TvFunction for Lagrangian {
    fn dim(&self) -> usize {
        self.objective.dim() + self.constraints.count()
    }

    fn value(&self, z: &[f64], t: f64) -> Result<f64> {
        let (y, nu) = self.split(z)?;
        let r = self.stack(vec![0.0; self.m()], &self.constraints.matrix(t), y, nu, &self.constraints.rhs(t));
        Ok(self.objective.value(y, t)? + crate::numerics::dot(nu, &r[self.m()..]))
    }

    fn value_t(&self, z: &[f64], t: f64) -> Result<f64> {
        let (y, nu) = self.split(z)?;
        let c = &self.constraints;
        let r = self.stack(vec![0.0; self.m()], &c.matrix_dot(t), y, nu, &c.rhs_dot(t));
        Ok(self.objective.value_t(y, t)? + crate::numerics::dot(nu, &r[self.m()..]))
    }

    fn value_tt(&self, z: &[f64], t: f64) -> Result<f64> {
        let (y, nu) = self.split(z)?;
        let c = &self.constraints;
        let r = self.stack(vec![0.0; self.m()], &c.matrix_ddot(t), y, nu, &c.rhs_ddot(t));
        Ok(self.objective.value_tt(y, t)? + crate::numerics::dot(nu, &r[self.m()..]))
    }

    fn grad(&self, z: &[f64], t: f64) -> Result<Vector> {
        let (y, nu) = self.split(z)?;
        let c = &self.constraints;
        Ok(self.stack(self.objective.grad(y, t)?, &c.matrix(t), y, nu, &c.rhs(t)))
    }

    fn hess(&self, z: &[f64], t: f64) -> Result<DenseMatrix> {
        let (y, _) = self.split(z)?;
        Ok(self.bordered(&self.objective.hess(y, t)?, &self.constraints.matrix(t)))
    }

    fn grad_t(&self, z: &[f64], t: f64) -> Result<Vector> {
        let (y, nu) = self.split(z)?;
        let c = &self.constraints;
        Ok(self.stack(self.objective.grad_t(y, t)?, &c.matrix_dot(t), y, nu, &c.rhs_dot(t)))
    }

    fn hess_dir(&self, z: &[f64], t: f64, v: &[f64]) -> Result<DenseMatrix> {
        let (y, _) = self.split(z)?;
        let (vy, _) = self.split(v)?;
        let mut k = DenseMatrix::zeros(self.dim(), self.dim());
        k.set_block(0, 0, &self.objective.hess_dir(y, t, vy)?);
        Ok(k)
    }

    fn hess_t(&self, z: &[f64], t: f64) -> Result<DenseMatrix> {
        let (y, _) = self.split(z)?;
        Ok(self.bordered(&self.objective.hess_t(y, t)?, &self.constraints.matrix_dot(t)))
    }

    fn grad_ty(&self, z: &[f64], t: f64) -> Result<DenseMatrix> {
        let (y, _) = self.split(z)?;
        Ok(self.bordered(&self.objective.grad_ty(y, t)?, &self.constraints.matrix_dot(t)))
    }

    fn grad_tt(&self, z: &[f64], t: f64) -> Result<Vector> {
        let (y, nu) = self.split(z)?;
        let c = &self.constraints;
        Ok(self.stack(self.objective.grad_tt(y, t)?, &c.matrix_ddot(t), y, nu, &c.rhs_ddot(t)))
    }
}

/// Fails with `RankDeficient` when `A(t)` loses rank.
pub fn check_rank(eq: &TvEqualityConstraints, t: f64) -> Result<()> {
    let sigma_min = *singular_values(&eq.func.matrix(t)).last().unwrap_or(&0.0);
    if sigma_min < RANK_THRESHOLD {
        return Err(Error::RankDeficient { t, sigma_min });
    }
    Ok(())
}

/// `[[∇_yy f, Aᵀ], [A, 0]]`.
pub fn kkt_matrix(obj: &TvObjective, eq: &TvEqualityConstraints, y: &[f64], t: f64) -> Result<DenseMatrix> {
    check_rank(eq, t)?;
    let lag = Lagrangian::new(obj.func.clone(), eq.func.clone())?;
    let z: Vector = y.iter().copied().chain(std::iter::repeat_n(0.0, eq.count())).collect();
    lag.hess(&z, t)
}

/// Extends a primal jet with dual values that minimize the residual of the
/// Lagrangian gradient (and, for second order, of its time derivative).
pub fn initial_dual_jet(obj: &TvObjective, eq: &TvEqualityConstraints, jet: &OutputJet, t: f64) -> Result<PrimalDualJet> {
    check_rank(eq, t)?;
    let f = &obj.func;
    let c = &eq.func;
    let y = jet.value(0);
    let a = c.matrix(t);
    let at = a.transpose();
    let neg = |v: Vector| -> Vector { v.into_iter().map(|x| -x).collect() };
    let nu = least_squares(&at, &neg(f.grad(y, t)?))?;
    let mut duals = vec![nu.clone()];
    if jet.order() >= 2 {
        let ydot = jet.value(1);
        let mut known = f.hess(y, t)?.matvec(ydot);
        for (k, (g, d)) in known.iter_mut().zip(f.grad_t(y, t)?.iter().zip(c.matrix_dot(t).tr_matvec(&nu))) {
            *k += g + d;
        }
        duals.push(least_squares(&at, &neg(known))?);
    }
    for _ in 2..jet.order() {
        duals.push(vec![0.0; eq.count()]);
    }
    PrimalDualJet::from_parts(jet, &duals)
}
