//! Checks run by `validate`: finite-difference validation of every problem
//! callback and a flatness round trip along the scenario's reference.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dynamics::OutputJet;
use crate::error::{Error, Result};
use crate::flat::{wrap_angle, FlatModel};
use crate::numerics::Vector;
use crate::problem::{validate_problem, TvFunction, ValidationReport};
use crate::scenarios::local_workspace_halfspaces;
use crate::sim::{ConstraintSet, Scenario};

/// Step for the central difference of the reference-induced state.
const ROUND_TRIP_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioValidation {
    pub callbacks: Vec<(String, ValidationReport)>,
    /// Worst relative mismatch between the plant vector field and the
    /// time derivative of the flat state along the reference.
    pub flatness_error: f64,
    /// Worst `‖h(x) − y‖` after mapping the reference jet to a state.
    pub output_error: f64,
}

fn functions(scenario: &Scenario) -> Result<Vec<(String, Arc<dyn TvFunction>)>> {
    let mut out = vec![("f_0".to_string(), scenario.objective.func.clone())];
    match &scenario.constraints {
        ConstraintSet::Inequality(ineq) => {
            out.extend(ineq.funcs.iter().enumerate().map(|(i, f)| (format!("f_{}", i + 1), f.clone())));
        }
        ConstraintSet::LocalWorkspace(lw) => {
            let y0 = scenario.initial_jet.value(0);
            for h in local_workspace_halfspaces(y0, &lw.obstacles, lw.robot_radius)? {
                out.push((format!("f_{}", h.obstacle + 1), Arc::new(h.to_constraint())));
            }
        }
        ConstraintSet::Equality(_) | ConstraintSet::Unconstrained => {}
    }
    Ok(out)
}

/// Validates every callback at `samples` random points near the reference
/// and checks flatness at as many times on `[0, t_final]`.
pub fn validate_scenario(scenario: &Scenario, t_final: f64, samples: usize, seed: u64, tol: f64) -> Result<ScenarioValidation> {
    let mut rng = StdRng::seed_from_u64(seed);
    let m = scenario.output_dim();
    let times: Vec<f64> = (0..samples).map(|_| rng.random_range(0.0..t_final)).collect();
    let points: Vec<(Vector, f64)> = times
        .iter()
        .map(|&t| {
            let centre = match &scenario.reference {
                Some(r) => r.eval(t, 0).swap_remove(0),
                None => scenario.initial_jet.value(0).to_vec(),
            };
            (centre.iter().map(|c| c + rng.random_range(-1.0..1.0)).collect(), t)
        })
        .collect();
    let mut callbacks = Vec::new();
    for (name, f) in functions(scenario)? {
        if f.dim() != m {
            return Err(Error::Dimension(format!("{name} has dimension {}, output has {m}", f.dim())));
        }
        callbacks.push((name, validate_problem(f.as_ref(), &points, tol)?));
    }
    let (flatness_error, output_error) = match &scenario.reference {
        Some(r) => {
            let k = scenario.order();
            let mut worst = (0.0f64, 0.0f64);
            for &t in &times {
                let t = t.max(ROUND_TRIP_STEP);
                let (flat, out) = round_trip(scenario, |s| Ok(OutputJet::new(r.eval(s, k))?), t)?;
                worst = (worst.0.max(flat), worst.1.max(out));
            }
            worst
        }
        None => (0.0, 0.0),
    };
    if !(flatness_error <= tol) {
        return Err(Error::ValidationFailed { callback: "plant_rhs".into(), sample: 0, error: flatness_error, tol });
    }
    Ok(ScenarioValidation { callbacks, flatness_error, output_error })
}

fn split(jet: &OutputJet, offset: usize, dim: usize) -> Result<OutputJet> {
    OutputJet::new(jet.values().iter().map(|v| v[offset..offset + dim].to_vec()).collect())
}

/// Maps the jet at `t` to state and input, then compares the plant vector
/// field with a central difference of the state. Returns the relative
/// mismatch (unit floor) and `‖h(x) − y‖`.
fn round_trip(scenario: &Scenario, jet_at: impl Fn(f64) -> Result<OutputJet>, t: f64) -> Result<(f64, f64)> {
    let k = scenario.order();
    let (jet, jp, jm) = (jet_at(t)?, jet_at(t + ROUND_TRIP_STEP)?, jet_at(t - ROUND_TRIP_STEP)?);
    let (mut flat, mut out) = (0.0f64, 0.0f64);
    let mut offset = 0;
    for model in &scenario.models {
        let d = model.output_dim();
        let part = split(&jet, offset, d)?;
        let x = model.state_from_jet(&part.truncated(k), t)?;
        let u = model.input_from_jet(&part, t)?;
        let xp = model.state_from_jet(&split(&jp, offset, d)?.truncated(k), t)?;
        let xm = model.state_from_jet(&split(&jm, offset, d)?.truncated(k), t)?;
        let mut dx: Vector = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * ROUND_TRIP_STEP)).collect();
        if let FlatModel::Wmr { .. } = model {
            dx[2] = wrap_angle(xp[2] - xm[2]) / (2.0 * ROUND_TRIP_STEP);
        }
        let f = model.plant_rhs(&x, &u)?;
        let diff = f.iter().zip(&dx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = f.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        flat = flat.max(diff / scale);
        let h = model.output(&x);
        out = out.max(h.iter().zip(part.value(0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        offset += d;
    }
    Ok((flat, out))
}
