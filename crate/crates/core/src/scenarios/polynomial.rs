use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::problem::Reference;

/// `y_i(t) = Σ_{j=0}^{N} A_{ij} t^j` for each output dimension `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTrajectory {
    /// `coeffs[i][j] = A_{ij}`.
    coeffs: Vec<Vec<f64>>,
}

impl PolynomialTrajectory {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidArgument("polynomial needs at least one coefficient per dimension".into()));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("polynomial coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    /// Builds from per-degree vectors `A_{·0}, A_{·1}, ..`.
    pub fn from_degree_vectors(by_degree: Vec<Vector>) -> Result<Self> {
        let Some(dim) = by_degree.first().map(Vec::len) else {
            return Err(Error::InvalidArgument("polynomial needs at least one degree".into()));
        };
        if by_degree.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("degree vectors differ in length".into()));
        }
        Self::new((0..dim).map(|i| by_degree.iter().map(|v| v[i]).collect()).collect())
    }

    /// Planar cubic starting at `pose = (x, y, heading)` with the given
    /// speed, and acceleration and jerk expressed in the initial body frame
    /// as (tangential, normal) components.
    pub fn from_pose(pose: [f64; 3], speed: f64, accel: [f64; 2], jerk: [f64; 2]) -> Self {
        let (s, c) = pose[2].sin_cos();
        let world = |v: [f64; 2]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        let (a, j) = (world(accel), world(jerk));
        let coeffs = (0..2)
            .map(|i| vec![pose[i], speed * [c, s][i], 0.5 * a[i], j[i] / 6.0])
            .collect();
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().map(Vec::len).max().unwrap_or(1) - 1
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Value and derivatives up to `max_deriv` at `t` (Horner on the
    /// differentiated coefficients).
    pub fn eval_polynomial_target(&self, t: f64, max_deriv: usize) -> Vec<Vector> {
        let mut out = vec![Vec::with_capacity(self.dim()); max_deriv + 1];
        for c in &self.coeffs {
            let mut poly = c.clone();
            for slot in out.iter_mut() {
                slot.push(poly.iter().rev().fold(0.0, |acc, a| acc * t + a));
                poly = poly.iter().enumerate().skip(1).map(|(j, a)| j as f64 * a).collect();
            }
        }
        out
    }
}

impl Reference for PolynomialTrajectory {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn eval(&self, t: f64, max_deriv: usize) -> Vec<Vector> {
        self.eval_polynomial_target(t, max_deriv)
    }
}
