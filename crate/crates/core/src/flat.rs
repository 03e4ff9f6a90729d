//! Flat plant models: the single integrator and the wheeled mobile robot.

use crate::dynamics::OutputJet;
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Default speed below which the robot's flat parametrization is undefined.
pub const DEFAULT_V_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlatModel {
    /// `ẋ = u`, `y = x`, flat order 1.
    Integrator { dim: usize },
    /// Unicycle `ẋ = (cos x₃ u₁, sin x₃ u₁, u₂)` with flat output the
    /// position, flat order 2.
    Wmr { v_min: f64 },
}

impl FlatModel {
    pub fn wmr() -> Self {
        FlatModel::Wmr { v_min: DEFAULT_V_MIN }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlatModel::Integrator { .. } => "integrator",
            FlatModel::Wmr { .. } => "wmr",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            FlatModel::Integrator { .. } => 1,
            FlatModel::Wmr { .. } => 2,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            FlatModel::Integrator { dim } => *dim,
            FlatModel::Wmr { .. } => 3,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FlatModel::Integrator { dim } => *dim,
            FlatModel::Wmr { .. } => 2,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FlatModel::Integrator { dim } => *dim,
            FlatModel::Wmr { .. } => 2,
        }
    }

    fn check_jet(&self, jet: &OutputJet, needed: usize) -> Result<()> {
        if jet.dim() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "{} expects {} outputs, jet has {}",
                self.name(),
                self.output_dim(),
                jet.dim()
            )));
        }
        if jet.order() < needed {
            return Err(Error::Dimension(format!(
                "{} needs {needed} jet entries, got {}",
                self.name(),
                jet.order()
            )));
        }
        Ok(())
    }

    fn speed(&self, ydot: &[f64], t: f64) -> Result<f64> {
        let v = ydot[0].hypot(ydot[1]);
        if let FlatModel::Wmr { v_min } = self {
            if !(v >= *v_min) {
                return Err(Error::FlatnessSingularity { t, speed: v });
            }
        }
        Ok(v)
    }

    /// Input from a jet carrying orders `0..=k`.
    pub fn input_from_jet(&self, jet: &OutputJet, t: f64) -> Result<Vector> {
        self.check_jet(jet, self.order() + 1)?;
        match self {
            FlatModel::Integrator { .. } => Ok(jet.value(1).to_vec()),
            FlatModel::Wmr { .. } => {
                let (v, a) = (jet.value(1), jet.value(2));
                let speed = self.speed(v, t)?;
                Ok(vec![speed, (v[0] * a[1] - a[0] * v[1]) / (speed * speed)])
            }
        }
    }

    /// State from a jet carrying orders `0..k` (the robot needs `ẏ`).
    pub fn state_from_jet(&self, jet: &OutputJet, t: f64) -> Result<Vector> {
        self.check_jet(jet, self.order())?;
        match self {
            FlatModel::Integrator { .. } => Ok(jet.value(0).to_vec()),
            FlatModel::Wmr { .. } => {
                let v = jet.value(1);
                self.speed(v, t)?;
                let y = jet.value(0);
                Ok(vec![y[0], y[1], v[1].atan2(v[0])])
            }
        }
    }

    /// Output map `h(x)`.
    pub fn output(&self, x: &[f64]) -> Vector {
        x[..self.output_dim()].to_vec()
    }

    pub fn plant_rhs(&self, x: &[f64], u: &[f64]) -> Result<Vector> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "{} expects state {} and input {}, got {} and {}",
                self.name(),
                self.state_dim(),
                self.input_dim(),
                x.len(),
                u.len()
            )));
        }
        match self {
            FlatModel::Integrator { .. } => Ok(u.to_vec()),
            FlatModel::Wmr { .. } => {
                let (s, c) = x[2].sin_cos();
                Ok(vec![c * u[0], s * u[0], u[1]])
            }
        }
    }

    /// Initial jet `(y, ẏ)` for a robot at pose `(x₁, x₂, x₃)` moving at
    /// `speed` along its heading; the integrator starts at rest.
    pub fn initial_jet(&self, state: &[f64], speed: f64) -> Result<OutputJet> {
        if state.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "{} state has {} entries, got {}",
                self.name(),
                self.state_dim(),
                state.len()
            )));
        }
        match self {
            FlatModel::Integrator { .. } => OutputJet::new(vec![state.to_vec()]),
            FlatModel::Wmr { .. } => {
                let (s, c) = state[2].sin_cos();
                OutputJet::new(vec![vec![state[0], state[1]], vec![speed * c, speed * s]])
            }
        }
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
