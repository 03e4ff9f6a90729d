//! Hurwitz companion target system for the gradient stack.
//!
//! The closed loop forces `w = (∇f, ∇̇f, …, ∇^{(k-1)}f)` to obey
//! `ẇ = (Ĥ ⊗ I_m) w`, with `Ĥ` the companion matrix of
//! `s^k + a_{k-1} s^{k-1} + … + a_0`.

use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, DenseMatrix};

/// Padding subtracted from the spectral abscissa when reporting the rate.
pub const DECAY_PADDING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSystemSpec {
    coeffs: Vec<f64>,
    dim: usize,
}

impl TargetSystemSpec {
    /// Builds a spec from `a_0..a_{k-1}`. Only shape is checked here; use
    /// [`TargetSystemSpec::hurwitz`] to also require stability.
    pub fn new(coeffs: Vec<f64>, dim: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "target system needs at least one coefficient".into(),
            ));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("target dimension must be >= 1".into()));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("target coefficients must be finite".into()));
        }
        Ok(Self { coeffs, dim })
    }

    pub fn hurwitz(coeffs: Vec<f64>, dim: usize) -> Result<Self> {
        let spec = Self::new(coeffs, dim)?;
        spec.decay_rate()?;
        Ok(spec)
    }

    /// Default gains: `a = (1)` for first-order flat systems and
    /// `(k_p, k_d) = (2, 3)` for second-order ones.
    pub fn default_for_order(order: usize, dim: usize) -> Result<Self> {
        match order {
            1 => Self::new(vec![1.0], dim),
            2 => Self::new(vec![2.0, 3.0], dim),
            k => Err(Error::UnsupportedOrder(k)),
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn with_dim(&self, dim: usize) -> Self {
        Self {
            coeffs: self.coeffs.clone(),
            dim,
        }
    }

    /// The `k x k` companion matrix `Ĥ`. The Kronecker lift to `m` outputs
    /// is applied blockwise by callers and never formed.
    pub fn companion_matrix(&self) -> DenseMatrix {
        let k = self.order();
        let mut h = DenseMatrix::zeros(k, k);
        for i in 0..k - 1 {
            h[(i, i + 1)] = 1.0;
        }
        for (j, a) in self.coeffs.iter().enumerate() {
            h[(k - 1, j)] = -a;
        }
        h
    }

    /// Largest real part among the roots of the characteristic polynomial.
    pub fn spectral_abscissa(&self) -> f64 {
        eigenvalues(&self.companion_matrix())
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Guaranteed exponential rate `α = -max Re λ(Ĥ) - ε_H`.
    pub fn decay_rate(&self) -> Result<f64> {
        let abscissa = self.spectral_abscissa();
        let alpha = -abscissa - DECAY_PADDING;
        if !(alpha > 0.0) {
            return Err(Error::NotHurwitz { abscissa });
        }
        Ok(alpha)
    }

    /// Applies `H = Ĥ ⊗ I_m` to a stacked vector `(w_0, …, w_{k-1})`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let (k, m) = (self.order(), self.dim);
        debug_assert_eq!(w.len(), k * m);
        let mut out = vec![0.0; k * m];
        out[..(k - 1) * m].copy_from_slice(&w[m..]);
        for (j, a) in self.coeffs.iter().enumerate() {
            for i in 0..m {
                out[(k - 1) * m + i] -= a * w[j * m + i];
            }
        }
        out
    }
}
