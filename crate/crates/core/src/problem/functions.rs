//! Objectives and constraints shipped with the crate.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{EqualityConstraintFn, TvFunction};
use crate::error::{Error, Result};
use crate::numerics::{dot, symmetric_eigenvalues, DenseMatrix, Vector};

/// A reference path `r(t)` with time derivatives of any order.
pub trait Reference: Send + Sync {
    fn dim(&self) -> usize;
    /// `[r(t), r'(t), .., r^{(max_deriv)}(t)]`.
    fn eval(&self, t: f64, max_deriv: usize) -> Vec<Vector>;
}

/// `r(t) = offset + amplitude ∘ sin(ω t + phase)`, componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidalReference {
    pub offset: Vector,
    pub amplitude: Vector,
    pub omega: Vector,
    pub phase: Vector,
}

impl SinusoidalReference {
    pub fn new(offset: Vector, amplitude: Vector, omega: Vector, phase: Vector) -> Result<Self> {
        let n = offset.len();
        if amplitude.len() != n || omega.len() != n || phase.len() != n {
            return Err(Error::Dimension("sinusoid parameters differ in length".into()));
        }
        Ok(Self {
            offset,
            amplitude,
            omega,
            phase,
        })
    }

    pub fn scalar(offset: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        Self {
            offset: vec![offset],
            amplitude: vec![amplitude],
            omega: vec![omega],
            phase: vec![phase],
        }
    }
}

impl Reference for SinusoidalReference {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval(&self, t: f64, max_deriv: usize) -> Vec<Vector> {
        (0..=max_deriv)
            .map(|n| {
                (0..self.dim())
                    .map(|i| {
                        let w = self.omega[i];
                        let shift = n as f64 * std::f64::consts::FRAC_PI_2;
                        let s = self.amplitude[i] * w.powi(n as i32) * (w * t + self.phase[i] + shift).sin();
                        if n == 0 {
                            self.offset[i] + s
                        } else {
                            s
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Concatenation of several references into one stacked output.
#[derive(Clone)]
pub struct StackedReference(pub Vec<Arc<dyn Reference>>);

impl Reference for StackedReference {
    fn dim(&self) -> usize {
        self.0.iter().map(|r| r.dim()).sum()
    }

    fn eval(&self, t: f64, max_deriv: usize) -> Vec<Vector> {
        let mut out = vec![Vec::with_capacity(self.dim()); max_deriv + 1];
        for r in &self.0 {
            for (o, part) in out.iter_mut().zip(r.eval(t, max_deriv)) {
                o.extend(part);
            }
        }
        out
    }
}

/// `f(y, t) = (w/2)‖y − r(t)‖²`.
#[derive(Clone)]
pub struct TrackingObjective {
    pub reference: Arc<dyn Reference>,
    pub weight: f64,
}

impl TrackingObjective {
    pub fn new(reference: Arc<dyn Reference>, weight: f64) -> Self {
        Self { reference, weight }
    }

    /// Strong convexity and Lipschitz constants coincide for this objective.
    pub fn curvature(&self) -> f64 {
        self.weight
    }

    fn error(&self, y: &[f64], r: &[f64]) -> Result<Vector> {
        if y.len() != r.len() {
            return Err(Error::Dimension(format!(
                "output has {} entries, reference {}",
                y.len(),
                r.len()
            )));
        }
        Ok(y.iter().zip(r).map(|(a, b)| a - b).collect())
    }
}

impl TvFunction for TrackingObjective {
    fn dim(&self) -> usize {
        self.reference.dim()
    }

    fn value(&self, y: &[f64], t: f64) -> Result<f64> {
        let e = self.error(y, &self.reference.eval(t, 0)[0])?;
        Ok(0.5 * self.weight * dot(&e, &e))
    }

    fn value_t(&self, y: &[f64], t: f64) -> Result<f64> {
        let r = self.reference.eval(t, 1);
        let e = self.error(y, &r[0])?;
        Ok(-self.weight * dot(&e, &r[1]))
    }

    fn value_tt(&self, y: &[f64], t: f64) -> Result<f64> {
        let r = self.reference.eval(t, 2);
        let e = self.error(y, &r[0])?;
        Ok(self.weight * (dot(&r[1], &r[1]) - dot(&e, &r[2])))
    }

    fn grad(&self, y: &[f64], t: f64) -> Result<Vector> {
        let e = self.error(y, &self.reference.eval(t, 0)[0])?;
        Ok(e.iter().map(|v| self.weight * v).collect())
    }

    fn hess(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        let mut h = DenseMatrix::identity(self.dim());
        h.scale(self.weight);
        Ok(h)
    }

    fn grad_t(&self, _y: &[f64], t: f64) -> Result<Vector> {
        Ok(self.reference.eval(t, 1)[1].iter().map(|v| -self.weight * v).collect())
    }

    fn hess_dir(&self, _y: &[f64], _t: f64, _v: &[f64]) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(self.dim(), self.dim()))
    }

    fn hess_t(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(self.dim(), self.dim()))
    }

    fn grad_tt(&self, _y: &[f64], t: f64) -> Result<Vector> {
        Ok(self.reference.eval(t, 2)[2].iter().map(|v| -self.weight * v).collect())
    }
}

/// Smooth non-quadratic test objective
/// `½(y − c(t))ᵀQ(y − c(t)) + w(t) Σ_j log cosh(u_jᵀ y) − offset`
/// with `c(t) = c₀ + c₁ sin(ω t)` and `w(t) = w₀ + w₁ sin(ω t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCoshObjective {
    pub q: DenseMatrix,
    pub c0: Vector,
    pub c1: Vector,
    pub w0: f64,
    pub w1: f64,
    pub omega: f64,
    pub directions: Vec<Vector>,
    pub offset: f64,
}

struct LogCoshTerms {
    e: Vector,
    c_dot: Vector,
    c_ddot: Vector,
    w: f64,
    w_dot: f64,
    w_ddot: f64,
    s: Vec<f64>,
}

impl LogCoshObjective {
    /// Random instance with `q ⪰ ½ I`. A zero `omega` makes it time invariant.
    pub fn random(dim: usize, terms: usize, seed: u64, time_varying: bool) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let b = DenseMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let mut q = b.transpose().matmul(&b);
        q.add_scaled(0.5, &DenseMatrix::identity(dim));
        let mut vec = |scale: f64| -> Vector { (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect() };
        let c0 = vec(1.0);
        let c1 = if time_varying { vec(0.8) } else { vec![0.0; dim] };
        let directions = (0..terms).map(|_| vec(1.0)).collect();
        let w0 = 0.5 + rng.random_range(0.0..1.0);
        let (w1, omega) = if time_varying {
            (0.4 * w0 * rng.random_range(0.0..1.0), 0.5 + rng.random_range(0.0..1.5))
        } else {
            (0.0, 0.0)
        };
        Self {
            q,
            c0,
            c1,
            w0,
            w1,
            omega,
            directions,
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn strong_convexity(&self) -> f64 {
        symmetric_eigenvalues(&self.q)[0]
    }

    pub fn lipschitz(&self) -> f64 {
        let top = *symmetric_eigenvalues(&self.q).last().unwrap();
        let spread: f64 = self.directions.iter().map(|u| dot(u, u)).sum();
        top + (self.w0 + self.w1.abs()) * spread
    }

    fn terms(&self, y: &[f64], t: f64) -> Result<LogCoshTerms> {
        if y.len() != self.q.rows() {
            return Err(Error::Dimension(format!(
                "expected {} outputs, got {}",
                self.q.rows(),
                y.len()
            )));
        }
        let (sn, cs) = (self.omega * t).sin_cos();
        let w2 = self.omega * self.omega;
        Ok(LogCoshTerms {
            e: y.iter()
                .zip(self.c0.iter().zip(&self.c1))
                .map(|(yi, (a, b))| yi - a - b * sn)
                .collect(),
            c_dot: self.c1.iter().map(|b| b * self.omega * cs).collect(),
            c_ddot: self.c1.iter().map(|b| -b * w2 * sn).collect(),
            w: self.w0 + self.w1 * sn,
            w_dot: self.w1 * self.omega * cs,
            w_ddot: -self.w1 * w2 * sn,
            s: self.directions.iter().map(|u| dot(u, y)).collect(),
        })
    }

    fn log_cosh_sum(s: &[f64]) -> f64 {
        // log cosh x = |x| + log(1 + e^{-2|x|}) − log 2, stable for large |x|
        s.iter()
            .map(|x| x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2)
            .sum()
    }

    fn weighted_directions(&self, s: &[f64], f: impl Fn(f64) -> f64) -> Vector {
        let mut out = vec![0.0; self.q.rows()];
        for (u, &sj) in self.directions.iter().zip(s) {
            crate::numerics::axpy(f(sj), u, &mut out);
        }
        out
    }

    fn weighted_outer(&self, s: &[f64], f: impl Fn(usize, f64) -> f64) -> DenseMatrix {
        let n = self.q.rows();
        let mut out = DenseMatrix::zeros(n, n);
        for (j, (u, &sj)) in self.directions.iter().zip(s).enumerate() {
            out.add_outer(f(j, sj), u, u);
        }
        out
    }
}

fn sech2(x: f64) -> f64 {
    let th = x.tanh();
    1.0 - th * th
}

impl TvFunction for LogCoshObjective {
    fn dim(&self) -> usize {
        self.q.rows()
    }

    fn value(&self, y: &[f64], t: f64) -> Result<f64> {
        let k = self.terms(y, t)?;
        Ok(0.5 * dot(&k.e, &self.q.matvec(&k.e)) + k.w * Self::log_cosh_sum(&k.s) - self.offset)
    }

    fn value_t(&self, y: &[f64], t: f64) -> Result<f64> {
        let k = self.terms(y, t)?;
        Ok(-dot(&k.e, &self.q.matvec(&k.c_dot)) + k.w_dot * Self::log_cosh_sum(&k.s))
    }

    fn value_tt(&self, y: &[f64], t: f64) -> Result<f64> {
        let k = self.terms(y, t)?;
        Ok(dot(&k.c_dot, &self.q.matvec(&k.c_dot)) - dot(&k.e, &self.q.matvec(&k.c_ddot))
            + k.w_ddot * Self::log_cosh_sum(&k.s))
    }

    fn grad(&self, y: &[f64], t: f64) -> Result<Vector> {
        let k = self.terms(y, t)?;
        let mut g = self.q.matvec(&k.e);
        crate::numerics::axpy(k.w, &self.weighted_directions(&k.s, f64::tanh), &mut g);
        Ok(g)
    }

    fn hess(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let k = self.terms(y, t)?;
        let mut h = self.q.clone();
        h.add_scaled(k.w, &self.weighted_outer(&k.s, |_, s| sech2(s)));
        Ok(h)
    }

    fn grad_t(&self, y: &[f64], t: f64) -> Result<Vector> {
        let k = self.terms(y, t)?;
        let mut g: Vector = self.q.matvec(&k.c_dot).iter().map(|v| -v).collect();
        crate::numerics::axpy(k.w_dot, &self.weighted_directions(&k.s, f64::tanh), &mut g);
        Ok(g)
    }

    fn hess_dir(&self, y: &[f64], t: f64, v: &[f64]) -> Result<DenseMatrix> {
        let k = self.terms(y, t)?;
        let mut h = self.weighted_outer(&k.s, |j, s| {
            -2.0 * s.tanh() * sech2(s) * dot(&self.directions[j], v)
        });
        h.scale(k.w);
        Ok(h)
    }

    fn hess_t(&self, y: &[f64], t: f64) -> Result<DenseMatrix> {
        let k = self.terms(y, t)?;
        let mut h = self.weighted_outer(&k.s, |_, s| sech2(s));
        h.scale(k.w_dot);
        Ok(h)
    }

    fn grad_tt(&self, y: &[f64], t: f64) -> Result<Vector> {
        let k = self.terms(y, t)?;
        let mut g: Vector = self.q.matvec(&k.c_ddot).iter().map(|v| -v).collect();
        crate::numerics::axpy(k.w_ddot, &self.weighted_directions(&k.s, f64::tanh), &mut g);
        Ok(g)
    }
}

/// `f(y, t) = aᵀy − (b₀ + b₁ sin(ω t))`. With `b₁ = 0` this is a fixed
/// halfspace `aᵀy ≤ b₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub a: Vector,
    pub b0: f64,
    pub b1: f64,
    pub omega: f64,
}

impl AffineConstraint {
    pub fn halfspace(a: Vector, b: f64) -> Self {
        Self {
            a,
            b0: b,
            b1: 0.0,
            omega: 0.0,
        }
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.a.len() {
            return Err(Error::Dimension(format!(
                "constraint expects {} outputs, got {}",
                self.a.len(),
                y.len()
            )));
        }
        Ok(())
    }

    fn zeros(&self) -> DenseMatrix {
        DenseMatrix::zeros(self.a.len(), self.a.len())
    }
}

impl TvFunction for AffineConstraint {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, y: &[f64], t: f64) -> Result<f64> {
        self.check(y)?;
        Ok(dot(&self.a, y) - self.b0 - self.b1 * (self.omega * t).sin())
    }

    fn value_t(&self, _y: &[f64], t: f64) -> Result<f64> {
        Ok(-self.b1 * self.omega * (self.omega * t).cos())
    }

    fn value_tt(&self, _y: &[f64], t: f64) -> Result<f64> {
        Ok(self.b1 * self.omega * self.omega * (self.omega * t).sin())
    }

    fn grad(&self, y: &[f64], _t: f64) -> Result<Vector> {
        self.check(y)?;
        Ok(self.a.clone())
    }

    fn hess(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        Ok(self.zeros())
    }

    fn grad_t(&self, _y: &[f64], _t: f64) -> Result<Vector> {
        Ok(vec![0.0; self.a.len()])
    }

    fn hess_dir(&self, _y: &[f64], _t: f64, _v: &[f64]) -> Result<DenseMatrix> {
        Ok(self.zeros())
    }

    fn hess_t(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        Ok(self.zeros())
    }

    fn grad_tt(&self, _y: &[f64], _t: f64) -> Result<Vector> {
        Ok(vec![0.0; self.a.len()])
    }
}

/// Squared separation bound `‖y_i − y_j‖² − d² ≤ 0` between two blocks of a
/// stacked output.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistanceConstraint {
    pub dim: usize,
    pub block: usize,
    pub first: usize,
    pub second: usize,
    pub max_distance: f64,
}

impl PairDistanceConstraint {
    pub fn new(dim: usize, block: usize, first: usize, second: usize, max_distance: f64) -> Result<Self> {
        if block == 0 || dim % block != 0 || first == second || (first.max(second) + 1) * block > dim {
            return Err(Error::InvalidArgument("invalid block layout for distance constraint".into()));
        }
        Ok(Self {
            dim,
            block,
            first,
            second,
            max_distance,
        })
    }

    fn diff(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.dim {
            return Err(Error::Dimension(format!("expected {} outputs, got {}", self.dim, y.len())));
        }
        Ok((0..self.block)
            .map(|k| y[self.first * self.block + k] - y[self.second * self.block + k])
            .collect())
    }
}

impl TvFunction for PairDistanceConstraint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64], _t: f64) -> Result<f64> {
        let d = self.diff(y)?;
        Ok(dot(&d, &d) - self.max_distance * self.max_distance)
    }

    fn value_t(&self, _y: &[f64], _t: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn value_tt(&self, _y: &[f64], _t: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn grad(&self, y: &[f64], _t: f64) -> Result<Vector> {
        let d = self.diff(y)?;
        let mut g = vec![0.0; self.dim];
        for k in 0..self.block {
            g[self.first * self.block + k] = 2.0 * d[k];
            g[self.second * self.block + k] = -2.0 * d[k];
        }
        Ok(g)
    }

    fn hess(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        let mut h = DenseMatrix::zeros(self.dim, self.dim);
        for k in 0..self.block {
            let (i, j) = (self.first * self.block + k, self.second * self.block + k);
            h[(i, i)] = 2.0;
            h[(j, j)] = 2.0;
            h[(i, j)] = -2.0;
            h[(j, i)] = -2.0;
        }
        Ok(h)
    }

    fn grad_t(&self, _y: &[f64], _t: f64) -> Result<Vector> {
        Ok(vec![0.0; self.dim])
    }

    fn hess_dir(&self, _y: &[f64], _t: f64, _v: &[f64]) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(self.dim, self.dim))
    }

    fn hess_t(&self, _y: &[f64], _t: f64) -> Result<DenseMatrix> {
        Ok(DenseMatrix::zeros(self.dim, self.dim))
    }

    fn grad_tt(&self, _y: &[f64], _t: f64) -> Result<Vector> {
        Ok(vec![0.0; self.dim])
    }
}

/// `A(t) = A₀ + A₁ sin(ω_A t)`, `b(t) = b₀ + b₁ sin(ω_b t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidalEquality {
    pub a0: DenseMatrix,
    pub a1: DenseMatrix,
    pub omega_a: f64,
    pub b0: Vector,
    pub b1: Vector,
    pub omega_b: f64,
}

impl SinusoidalEquality {
    pub fn new(
        a0: DenseMatrix,
        a1: DenseMatrix,
        omega_a: f64,
        b0: Vector,
        b1: Vector,
        omega_b: f64,
    ) -> Result<Self> {
        if a0.rows() != a1.rows() || a0.cols() != a1.cols() || b0.len() != a0.rows() || b1.len() != a0.rows() {
            return Err(Error::Dimension("inconsistent equality constraint shapes".into()));
        }
        Ok(Self {
            a0,
            a1,
            omega_a,
            b0,
            b1,
            omega_b,
        })
    }

    /// Constant matrix with `b(t) = b₀ + b₁ sin(ω t)`.
    pub fn fixed_matrix(a: DenseMatrix, b0: Vector, b1: Vector, omega: f64) -> Result<Self> {
        let a1 = DenseMatrix::zeros(a.rows(), a.cols());
        Self::new(a, a1, 0.0, b0, b1, omega)
    }

    fn mat(&self, scale0: f64, scale1: f64) -> DenseMatrix {
        let mut a = self.a0.clone();
        a.scale(scale0);
        a.add_scaled(scale1, &self.a1);
        a
    }

    fn vec(&self, scale0: f64, scale1: f64) -> Vector {
        self.b0.iter().zip(&self.b1).map(|(a, b)| scale0 * a + scale1 * b).collect()
    }
}

impl EqualityConstraintFn for SinusoidalEquality {
    fn dim(&self) -> usize {
        self.a0.cols()
    }

    fn count(&self) -> usize {
        self.a0.rows()
    }

    fn matrix(&self, t: f64) -> DenseMatrix {
        self.mat(1.0, (self.omega_a * t).sin())
    }

    fn rhs(&self, t: f64) -> Vector {
        self.vec(1.0, (self.omega_b * t).sin())
    }

    fn matrix_dot(&self, t: f64) -> DenseMatrix {
        self.mat(0.0, self.omega_a * (self.omega_a * t).cos())
    }

    fn rhs_dot(&self, t: f64) -> Vector {
        self.vec(0.0, self.omega_b * (self.omega_b * t).cos())
    }

    fn matrix_ddot(&self, t: f64) -> DenseMatrix {
        self.mat(0.0, -self.omega_a * self.omega_a * (self.omega_a * t).sin())
    }

    fn rhs_ddot(&self, t: f64) -> Vector {
        self.vec(0.0, -self.omega_b * self.omega_b * (self.omega_b * t).sin())
    }
}
