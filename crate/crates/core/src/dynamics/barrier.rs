use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, Vector};
use crate::problem::{TvFunction, TvInequalityConstraints, TvObjective};

/// Barrier sharpening `c(t) = c₀ e^{α_c t}` and slack `s(t) = s₀ e^{−α_s t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSchedule {
    pub c0: f64,
    pub alpha_c: f64,
    pub s0: f64,
    pub alpha_s: f64,
    pub eps_s: f64,
}

impl Default for BarrierSchedule {
    fn default() -> Self {
        Self {
            c0: 1.0,
            alpha_c: 0.5,
            s0: 0.0,
            alpha_s: 0.5,
            eps_s: 0.1,
        }
    }
}

impl BarrierSchedule {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.c0 > 0.0, "barrier.c0 must be positive"),
            (self.alpha_c > 0.0, "barrier.alpha_c must be positive"),
            (self.s0 >= 0.0, "barrier s0 must be nonnegative"),
            (self.alpha_s > 0.0, "barrier.alpha_s must be positive"),
            (self.eps_s > 0.0, "barrier.eps_s must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok || !(self.c0.is_finite() && self.s0.is_finite()) {
                return Err(Error::InvalidArgument(msg.into()));
            }
        }
        Ok(())
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    pub fn c(&self, t: f64) -> f64 {
        self.c0 * (self.alpha_c * t).exp()
    }

    /// `ψ = 1/c` and its first two time derivatives.
    pub fn psi(&self, t: f64) -> [f64; 3] {
        let p = (-self.alpha_c * t).exp() / self.c0;
        [p, -self.alpha_c * p, self.alpha_c * self.alpha_c * p]
    }

    /// `s` and its first two time derivatives.
    pub fn slack(&self, t: f64) -> [f64; 3] {
        let s = self.s0 * (-self.alpha_s * t).exp();
        [s, -self.alpha_s * s, self.alpha_s * self.alpha_s * s]
    }

    pub fn s(&self, t: f64) -> f64 {
        self.slack(t)[0]
    }
}

/// `s₀ = max_i f_i(y₀, 0) + ε_s` if that maximum is positive, else 0.
pub fn slack_initial(ineq: &TvInequalityConstraints, y0: &[f64], eps_s: f64) -> Result<f64> {
    if !(eps_s > 0.0) {
        return Err(Error::InvalidArgument("eps_s must be positive".into()));
    }
    let worst = ineq
        .values(y0, 0.0)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if worst > 0.0 { worst + eps_s } else { 0.0 })
}

/// `Φ̂(y, t) = f₀(y, t) − c(t)⁻¹ Σ_i log(s(t) − f_i(y, t))`.
#[derive(Clone)]
pub struct BarrierObjective {
    pub base: Arc<dyn TvFunction>,
    pub constraints: Vec<Arc<dyn TvFunction>>,
    pub schedule: BarrierSchedule,
}

/// Per-constraint margin `w = s − f_i` with its time derivatives.
struct Margin {
    w: f64,
    w_t: f64,
    w_tt: f64,
}

impl BarrierObjective {
    pub fn new(base: Arc<dyn TvFunction>, constraints: Vec<Arc<dyn TvFunction>>, schedule: BarrierSchedule) -> Result<Self> {
        schedule.validate()?;
        if let Some(c) = constraints.iter().find(|c| c.dim() != base.dim()) {
            return Err(Error::Dimension(format!(
                "constraint dimension {} differs from objective dimension {}",
                c.dim(),
                base.dim()
            )));
        }
        Ok(Self {
            base,
            constraints,
            schedule,
        })
    }

    /// `s − f_i`, failing with `BarrierDomain` outside the shifted domain.
    fn margin(&self, i: usize, y: &[f64], t: f64) -> Result<f64> {
        let w = self.schedule.s(t) - self.constraints[i].value(y, t)?;
        if !(w > 0.0) {
            return Err(Error::BarrierDomain { t, index: i, margin: w });
        }
        Ok(w)
    }

    fn margin_jet(&self, i: usize, y: &[f64], t: f64, order: usize) -> Result<Margin> {
        let s = self.schedule.slack(t);
        let w = self.margin(i, y, t)?;
        let f = &self.constraints[i];
        let w_t = if order >= 1 { s[1] - f.value_t(y, t)? } else { 0.0 };
        let w_tt = if order >= 2 { s[2] - f.value_tt(y, t)? } else { 0.0 };
        Ok(Margin { w, w_t, w_tt })
    }

    /// `Σ_i (∇f_i/w, ∂_t(∇f_i/w))`.
    fn gradient_terms(&self, y: &[f64], t: f64) -> Result<(Vector, Vector)> {
        let n = self.dim();
        let (mut g0, mut g1) = (vec![0.0; n], vec![0.0; n]);
        for (i, f) in self.constraints.iter().enumerate() {
            let m = self.margin_jet(i, y, t, 1)?;
            let g = f.grad(y, t)?;
            let gt = f.grad_t(y, t)?;
            for k in 0..n {
                g0[k] += g[k] / m.w;
                g1[k] += gt[k] / m.w - g[k] * m.w_t / (m.w * m.w);
            }
        }
        Ok((g0, g1))
    }

    /// `Σ_i (H_i/w + g gᵀ/w²)`, the barrier Hessian before scaling by ψ.
    fn hessian_term(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let n = self.dim();
        let mut out = DenseMatrix::zeros(n, n);
        for (i, f) in self.constraints.iter().enumerate() {
            let w = self.margin(i, y, t)?;
            let g = f.grad(y, t)?;
            out.add_scaled(1.0 / w, &f.hess(y, t)?);
            out.add_outer(1.0 / (w * w), &g, &g);
        }
        Ok(out)
    }

    /// Shared body of `hess_t` and `grad_ty`; `mixed` selects the
    /// constraint's own mixed partial.
    fn mixed_term(
        &self,
        y: &[f64],
        t: f64,
        base: DenseMatrix,
        mixed: impl Fn(&dyn TvFunction) -> Result<DenseMatrix>,
    ) -> Result<DenseMatrix> {
        let [psi, psi_t, _] = self.schedule.psi(t);
        let mut out = base;
        out.add_scaled(psi_t, &self.hessian_term(y, t)?);
        for (i, f) in self.constraints.iter().enumerate() {
            let m = self.margin_jet(i, y, t, 1)?;
            let (w, wt) = (m.w, m.w_t);
            let g = f.grad(y, t)?;
            let gt = f.grad_t(y, t)?;
            out.add_scaled(psi / w, &mixed(f.as_ref())?);
            out.add_scaled(-psi * wt / (w * w), &f.hess(y, t)?);
            out.add_outer(psi / (w * w), &gt, &g);
            out.add_outer(psi / (w * w), &g, &gt);
            out.add_outer(-2.0 * psi * wt / (w * w * w), &g, &g);
        }
        Ok(out)
    }
}

impl TvFunction for BarrierObjective {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, y: &[f64], t: f64) -> Result<f64> {
        let [psi, _, _] = self.schedule.psi(t);
        let mut logs = 0.0;
        for i in 0..self.constraints.len() {
            logs += self.margin(i, y, t)?.ln();
        }
        Ok(self.base.value(y, t)? - psi * logs)
    }

    fn value_t(&self, y: &[f64], t: f64) -> Result<f64> {
        let [psi, psi_t, _] = self.schedule.psi(t);
        let mut out = self.base.value_t(y, t)?;
        for i in 0..self.constraints.len() {
            let m = self.margin_jet(i, y, t, 1)?;
            out -= psi_t * m.w.ln() + psi * m.w_t / m.w;
        }
        Ok(out)
    }

    fn value_tt(&self, y: &[f64], t: f64) -> Result<f64> {
        let [psi, psi_t, psi_tt] = self.schedule.psi(t);
        let mut out = self.base.value_tt(y, t)?;
        for i in 0..self.constraints.len() {
            let m = self.margin_jet(i, y, t, 2)?;
            let r = m.w_t / m.w;
            out -= psi_tt * m.w.ln() + 2.0 * psi_t * r + psi * (m.w_tt / m.w - r * r);
        }
        Ok(out)
    }

    fn grad(&self, y: &[f64], t: f64) -> Result<Vector> {
        let [psi, _, _] = self.schedule.psi(t);
        let mut out = self.base.grad(y, t)?;
        for (i, f) in self.constraints.iter().enumerate() {
            let w = self.margin(i, y, t)?;
            crate::numerics::axpy(psi / w, &f.grad(y, t)?, &mut out);
        }
        Ok(out)
    }

    fn hess(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let [psi, _, _] = self.schedule.psi(t);
        let mut out = self.base.hess(y, t)?;
        if !self.constraints.is_empty() {
            out.add_scaled(psi, &self.hessian_term(y, t)?);
        }
        Ok(out)
    }

    fn grad_t(&self, y: &[f64], t: f64) -> Result<Vector> {
        let [psi, psi_t, _] = self.schedule.psi(t);
        let mut out = self.base.grad_t(y, t)?;
        if !self.constraints.is_empty() {
            let (g0, g1) = self.gradient_terms(y, t)?;
            crate::numerics::axpy(psi_t, &g0, &mut out);
            crate::numerics::axpy(psi, &g1, &mut out);
        }
        Ok(out)
    }

    fn hess_dir(&self, y: &[f64], t: f64, v: &[f64]) -> Result<DenseMatrix> {
        let [psi, _, _] = self.schedule.psi(t);
        let mut out = self.base.hess_dir(y, t, v)?;
        for (i, f) in self.constraints.iter().enumerate() {
            let w = self.margin(i, y, t)?;
            let g = f.grad(y, t)?;
            let h = f.hess(y, t)?;
            let hv = h.matvec(v);
            let gv = dot(&g, v);
            out.add_scaled(psi / w, &f.hess_dir(y, t, v)?);
            out.add_scaled(psi * gv / (w * w), &h);
            out.add_outer(psi / (w * w), &hv, &g);
            out.add_outer(psi / (w * w), &g, &hv);
            out.add_outer(2.0 * psi * gv / (w * w * w), &g, &g);
        }
        Ok(out)
    }

    fn hess_t(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let base = self.base.hess_t(y, t)?;
        if self.constraints.is_empty() {
            return Ok(base);
        }
        self.mixed_term(y, t, base, |f| f.hess_t(y, t))
    }

    fn grad_ty(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let base = self.base.grad_ty(y, t)?;
        if self.constraints.is_empty() {
            return Ok(base);
        }
        self.mixed_term(y, t, base, |f| f.grad_ty(y, t))
    }

    fn grad_tt(&self, y: &[f64], t: f64) -> Result<Vector> {
        let [psi, psi_t, psi_tt] = self.schedule.psi(t);
        let mut out = self.base.grad_tt(y, t)?;
        if self.constraints.is_empty() {
            return Ok(out);
        }
        let (g0, g1) = self.gradient_terms(y, t)?;
        crate::numerics::axpy(psi_tt, &g0, &mut out);
        crate::numerics::axpy(2.0 * psi_t, &g1, &mut out);
        for (i, f) in self.constraints.iter().enumerate() {
            let m = self.margin_jet(i, y, t, 2)?;
            let (w, wt, wtt) = (m.w, m.w_t, m.w_tt);
            let g = f.grad(y, t)?;
            let gt = f.grad_t(y, t)?;
            let gtt = f.grad_tt(y, t)?;
            for k in 0..out.len() {
                out[k] += psi
                    * (gtt[k] / w - 2.0 * gt[k] * wt / (w * w) - g[k] * wtt / (w * w)
                        + 2.0 * g[k] * wt * wt / (w * w * w));
            }
        }
        Ok(out)
    }
}

/// Barrier-augmented objective. With no constraints the original objective
/// is returned unchanged, so both paths evaluate identical code.
pub fn barrier_objective(obj: &TvObjective, ineq: &TvInequalityConstraints, sched: &BarrierSchedule) -> Result<TvObjective> {
    sched.validate()?;
    if ineq.is_empty() {
        return Ok(obj.clone());
    }
    let func = BarrierObjective::new(obj.func.clone(), ineq.funcs.clone(), *sched)?;
    Ok(TvObjective {
        func: Arc::new(func),
        strong_convexity: obj.strong_convexity,
        lipschitz: obj.lipschitz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierDiagnostics {
    /// `λ̂_i = 1/(c(t)(s(t) − f_i))`.
    pub estimates: Vector,
    /// `‖λ̂‖₁`.
    pub l1: f64,
    /// `L d / ε`.
    pub bound: f64,
    /// `p/c(t) + Σ λ̂_i s(t)`.
    pub gap_bound: f64,
}

pub fn multiplier_diagnostics(
    ineq: &TvInequalityConstraints,
    sched: &BarrierSchedule,
    y: &[f64],
    t: f64,
    lipschitz: f64,
) -> Result<MultiplierDiagnostics> {
    let c = sched.c(t);
    let s = sched.s(t);
    let mut estimates = Vec::with_capacity(ineq.len());
    for (i, f) in ineq.funcs.iter().enumerate() {
        let w = s - f.value(y, t)?;
        if !(w > 0.0) {
            return Err(Error::BarrierDomain { t, index: i, margin: w });
        }
        estimates.push(1.0 / (c * w));
    }
    let l1: f64 = estimates.iter().sum();
    Ok(MultiplierDiagnostics {
        bound: lipschitz * ineq.mfcq_d / ineq.mfcq_eps,
        gap_bound: ineq.len() as f64 / c + l1 * s,
        l1,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate_problem, AffineConstraint, LogCoshObjective, SinusoidalReference, TrackingObjective};

    fn scalar_objective(target: f64) -> TvObjective {
        let r = SinusoidalReference::scalar(target, 0.0, 0.0, 0.0);
        TvObjective::new(Arc::new(TrackingObjective::new(Arc::new(r), 1.0)), 1.0, 1.0).unwrap()
    }

    fn upper_bound(b: f64) -> TvInequalityConstraints {
        TvInequalityConstraints::new(vec![Arc::new(AffineConstraint::halfspace(vec![1.0], b))], 1.0, 1.0).unwrap()
    }

    fn frozen(c0: f64, s0: f64) -> BarrierSchedule {
        // Tiny rates so c and s are effectively constant near t = 0.
        BarrierSchedule {
            c0,
            alpha_c: 1e-300,
            s0,
            alpha_s: 1e-300,
            eps_s: 0.1,
        }
    }

    #[test]
    fn hand_differentiated_barrier_gradient() {
        let obj = scalar_objective(0.3);
        let phi = barrier_objective(&obj, &upper_bound(1.0), &frozen(1.0, 0.0)).unwrap();
        let g0 = obj.func.grad(&[0.0], 0.0).unwrap()[0];
        let g = phi.func.grad(&[0.0], 0.0).unwrap()[0];
        assert!((g - (g0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn boundary_is_a_domain_error() {
        let obj = scalar_objective(0.0);
        let phi = barrier_objective(&obj, &upper_bound(1.0), &frozen(1.0, 0.0)).unwrap();
        let err = phi.func.grad(&[1.0], 0.0).unwrap_err();
        assert!(err.is_domain_error());
        assert!(matches!(err, Error::BarrierDomain { index: 0, .. }));
    }

    #[test]
    fn no_constraints_returns_the_objective() {
        let obj = scalar_objective(0.0);
        let phi = barrier_objective(&obj, &TvInequalityConstraints::empty(), &BarrierSchedule::default()).unwrap();
        assert!(Arc::ptr_eq(&phi.func, &obj.func));
    }

    #[test]
    fn slack_formula() {
        let ineq = TvInequalityConstraints::new(
            vec![
                Arc::new(AffineConstraint::halfspace(vec![1.0], 1.0)),
                Arc::new(AffineConstraint::halfspace(vec![-1.0], 0.0)),
            ],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(slack_initial(&ineq, &[0.5], 0.1).unwrap(), 0.0);
        assert!((slack_initial(&ineq, &[1.5], 0.1).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(slack_initial(&TvInequalityConstraints::empty(), &[3.0], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn multiplier_bound_formula() {
        let ineq = TvInequalityConstraints::new(vec![], 1.0, 0.5).unwrap();
        let d = multiplier_diagnostics(&ineq, &BarrierSchedule::default(), &[0.0], 1.0, 2.0).unwrap();
        assert_eq!(d.bound, 4.0);
        assert!(d.estimates.is_empty());
        assert_eq!(d.l1, 0.0);
        assert_eq!(d.gap_bound, 0.0);
    }

    #[test]
    fn estimates_and_gap() {
        let sched = BarrierSchedule { s0: 0.5, ..Default::default() };
        let d = multiplier_diagnostics(&upper_bound(1.0), &sched, &[0.0], 0.0, 1.0).unwrap();
        // c = 1, s = 0.5, f = −1 → λ̂ = 1/1.5; gap = 1 + λ̂·0.5
        assert!((d.estimates[0] - 1.0 / 1.5).abs() < 1e-15);
        assert!((d.gap_bound - (1.0 + 0.5 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn barrier_partials_validate_with_time_varying_pieces() {
        let base: Arc<dyn TvFunction> = Arc::new(LogCoshObjective::random(2, 2, 3, true));
        let cons: Vec<Arc<dyn TvFunction>> = vec![
            Arc::new(AffineConstraint { a: vec![1.0, 0.5], b0: 2.0, b1: 0.4, omega: 1.3 }),
            Arc::new(LogCoshObjective::random(2, 1, 8, true).with_offset(15.0)),
        ];
        let sched = BarrierSchedule { c0: 0.7, alpha_c: 0.4, s0: 0.8, alpha_s: 0.6, eps_s: 0.1 };
        let phi = BarrierObjective::new(base, cons, sched).unwrap();
        let samples: Vec<(Vector, f64)> = vec![(vec![0.1, -0.2], 0.2), (vec![-0.5, 0.3], 1.5), (vec![0.4, 0.4], 3.0)];
        for (y, t) in &samples {
            assert!(phi.value(y, *t).is_ok());
        }
        validate_problem(&phi, &samples, 1e-5).unwrap();
    }

    #[test]
    fn validation_near_the_boundary() {
        let obj = scalar_objective(0.0);
        let phi = barrier_objective(&obj, &upper_bound(1.0), &BarrierSchedule { s0: 0.0, ..Default::default() }).unwrap();
        // Margins of 1e-2 and 1e-3 from the barrier wall.
        let samples = vec![(vec![0.99], 0.5), (vec![0.999], 1.0)];
        validate_problem(phi.func.as_ref(), &samples, 1e-4).unwrap();
    }
}
