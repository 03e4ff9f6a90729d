//! Moving targets, obstacles and the three ready-made scenarios: single
//! robot tracking, two-robot formation with a separation bound, and obstacle
//! avoidance through local-workspace halfspaces.

mod polynomial;
mod workspace;

use std::fmt;
use std::sync::Arc;

use crate::dynamics::OutputJet;
use crate::error::{Error, Result};
use crate::flat::FlatModel;
use crate::problem::{PairDistanceConstraint, Reference, StackedReference, TrackingObjective, TvInequalityConstraints, TvObjective};
use crate::sim::{ConstraintSet, LocalWorkspace, Scenario};

pub use polynomial::PolynomialTrajectory;
pub use workspace::{check_disjoint, local_workspace_halfspaces, DiskObstacle, LocalWorkspaceHalfspace};

/// Names accepted by [`build_scenario`].
pub const SCENARIO_NAMES: [&str; 3] = ["tracking", "formation", "obstacle"];

/// A scenario parameter as written in a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(x) => write!(f, "{x:?}"),
            ParamValue::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            ParamValue::Text(s) => write!(f, "\"{s}\""),
        }
    }
}

fn number(key: &str, v: &ParamValue) -> Result<f64> {
    match v {
        ParamValue::Number(x) if x.is_finite() => Ok(*x),
        _ => Err(Error::InvalidArgument(format!("scenario.{key} must be a finite number"))),
    }
}

fn list<const N: usize>(key: &str, v: &ParamValue) -> Result<[f64; N]> {
    match v {
        ParamValue::List(xs) if xs.len() == N && xs.iter().all(|x| x.is_finite()) => {
            let mut out = [0.0; N];
            out.copy_from_slice(xs);
            Ok(out)
        }
        _ => Err(Error::InvalidArgument(format!("scenario.{key} must be a list of {N} numbers"))),
    }
}

fn positive(key: &str, v: &ParamValue) -> Result<f64> {
    let x = number(key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidArgument(format!("scenario.{key} must be positive")))
    }
}

fn unknown(scenario: &str, key: &str) -> Error {
    Error::InvalidArgument(format!("unknown key scenario.{key} for scenario `{scenario}`"))
}

/// One robot (or integrator) chasing a cubic moving target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingParams {
    /// `wmr` or `integrator`.
    pub model: String,
    /// Pose `(x, y, heading)`; the integrator ignores the heading.
    pub robot: [f64; 3],
    pub target: [f64; 3],
    pub target_speed: f64,
    pub target_accel: [f64; 2],
    pub target_jerk: [f64; 2],
    pub initial_speed: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self {
            model: "wmr".into(),
            robot: [-1.0, -1.0, 1.0],
            target: [0.0, 0.0, 0.5],
            target_speed: 0.5,
            target_accel: [0.0, 0.06],
            target_jerk: [0.0, -0.012],
            initial_speed: 0.5,
        }
    }
}

/// Two robots tracking their own targets under a maximum-separation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationParams {
    pub target_1: [f64; 3],
    pub target_2: [f64; 3],
    pub robot_1: [f64; 3],
    pub robot_2: [f64; 3],
    pub max_distance: f64,
    pub target_speed: f64,
    /// Normal acceleration pushing the two targets apart.
    pub spread_accel: f64,
    pub initial_speed: f64,
    pub mfcq_d: f64,
    pub mfcq_eps: f64,
}

impl Default for FormationParams {
    fn default() -> Self {
        Self {
            target_1: [-5.0, -3.0, 0.5],
            target_2: [-2.0, -3.0, 0.5],
            robot_1: [-4.5, -3.5, 0.5],
            robot_2: [-3.0, -3.5, -0.5],
            max_distance: 3.0,
            target_speed: 0.5,
            spread_accel: 0.009,
            initial_speed: 0.5,
            mfcq_d: 1.0,
            // ‖∇f₁‖ = 2√2·d whenever the separation bound is active.
            mfcq_eps: 6.0 * std::f64::consts::SQRT_2,
        }
    }
}

/// One robot tracking a target among disk obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleParams {
    pub robot: [f64; 3],
    pub target: [f64; 3],
    pub target_speed: f64,
    pub target_accel: [f64; 2],
    pub target_jerk: [f64; 2],
    pub robot_radius: f64,
    /// Flattened `(x, y, radius)` triples.
    pub obstacles: Vec<f64>,
    pub initial_speed: f64,
    pub mfcq_d: f64,
    pub mfcq_eps: f64,
}

impl Default for ObstacleParams {
    fn default() -> Self {
        Self {
            robot: [-6.0, -3.0, 20.0],
            target: [-5.0, -5.0, 0.5],
            target_speed: 0.4,
            target_accel: [0.0, 0.0],
            target_jerk: [0.0, 0.0],
            robot_radius: 0.2,
            obstacles: vec![-5.6, -4.0, 0.35, -3.2, -3.2, 0.4, -1.5, -4.6, 0.5, -4.0, -1.2, 0.6],
            initial_speed: 0.5,
            mfcq_d: 1.0,
            mfcq_eps: 1.0,
        }
    }
}

impl ObstacleParams {
    pub fn disks(&self) -> Result<Vec<DiskObstacle>> {
        if self.obstacles.len() % 3 != 0 {
            return Err(Error::InvalidArgument("scenario.obstacles must hold (x, y, radius) triples".into()));
        }
        self.obstacles
            .chunks(3)
            .map(|c| DiskObstacle::new([c[0], c[1]], c[2]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioParams {
    Tracking(TrackingParams),
    Formation(FormationParams),
    Obstacle(ObstacleParams),
}

impl ScenarioParams {
    /// Default parameters for a named scenario.
    pub fn defaults(name: &str) -> Result<Self> {
        match name {
            "tracking" => Ok(Self::Tracking(TrackingParams::default())),
            "formation" => Ok(Self::Formation(FormationParams::default())),
            "obstacle" => Ok(Self::Obstacle(ObstacleParams::default())),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Tracking(_) => "tracking",
            Self::Formation(_) => "formation",
            Self::Obstacle(_) => "obstacle",
        }
    }

    /// Sets one `scenario.<key>` entry.
    pub fn set(&mut self, key: &str, v: &ParamValue) -> Result<()> {
        let name = self.name();
        match self {
            Self::Tracking(p) => match key {
                "model" => match v {
                    ParamValue::Text(s) if s == "wmr" || s == "integrator" => p.model = s.clone(),
                    _ => return Err(Error::InvalidArgument("scenario.model must be \"wmr\" or \"integrator\"".into())),
                },
                "robot" => p.robot = list(key, v)?,
                "target" => p.target = list(key, v)?,
                "target_speed" => p.target_speed = number(key, v)?,
                "target_accel" => p.target_accel = list(key, v)?,
                "target_jerk" => p.target_jerk = list(key, v)?,
                "initial_speed" => p.initial_speed = positive(key, v)?,
                _ => return Err(unknown(name, key)),
            },
            Self::Formation(p) => match key {
                "target_1" => p.target_1 = list(key, v)?,
                "target_2" => p.target_2 = list(key, v)?,
                "robot_1" => p.robot_1 = list(key, v)?,
                "robot_2" => p.robot_2 = list(key, v)?,
                "max_distance" => p.max_distance = positive(key, v)?,
                "target_speed" => p.target_speed = number(key, v)?,
                "spread_accel" => p.spread_accel = number(key, v)?,
                "initial_speed" => p.initial_speed = positive(key, v)?,
                "mfcq_d" => p.mfcq_d = positive(key, v)?,
                "mfcq_eps" => p.mfcq_eps = positive(key, v)?,
                _ => return Err(unknown(name, key)),
            },
            Self::Obstacle(p) => match key {
                "robot" => p.robot = list(key, v)?,
                "target" => p.target = list(key, v)?,
                "target_speed" => p.target_speed = number(key, v)?,
                "target_accel" => p.target_accel = list(key, v)?,
                "target_jerk" => p.target_jerk = list(key, v)?,
                "robot_radius" => p.robot_radius = positive(key, v)?,
                "obstacles" => match v {
                    ParamValue::List(xs) => p.obstacles = xs.clone(),
                    _ => return Err(Error::InvalidArgument("scenario.obstacles must be a list".into())),
                },
                "initial_speed" => p.initial_speed = positive(key, v)?,
                "mfcq_d" => p.mfcq_d = positive(key, v)?,
                "mfcq_eps" => p.mfcq_eps = positive(key, v)?,
                _ => return Err(unknown(name, key)),
            },
        }
        Ok(())
    }

    /// All parameters as `(key, value)` pairs, for serialization.
    pub fn entries(&self) -> Vec<(&'static str, ParamValue)> {
        use ParamValue::{List, Number, Text};
        match self {
            Self::Tracking(p) => vec![
                ("model", Text(p.model.clone())),
                ("robot", List(p.robot.to_vec())),
                ("target", List(p.target.to_vec())),
                ("target_speed", Number(p.target_speed)),
                ("target_accel", List(p.target_accel.to_vec())),
                ("target_jerk", List(p.target_jerk.to_vec())),
                ("initial_speed", Number(p.initial_speed)),
            ],
            Self::Formation(p) => vec![
                ("target_1", List(p.target_1.to_vec())),
                ("target_2", List(p.target_2.to_vec())),
                ("robot_1", List(p.robot_1.to_vec())),
                ("robot_2", List(p.robot_2.to_vec())),
                ("max_distance", Number(p.max_distance)),
                ("target_speed", Number(p.target_speed)),
                ("spread_accel", Number(p.spread_accel)),
                ("initial_speed", Number(p.initial_speed)),
                ("mfcq_d", Number(p.mfcq_d)),
                ("mfcq_eps", Number(p.mfcq_eps)),
            ],
            Self::Obstacle(p) => vec![
                ("robot", List(p.robot.to_vec())),
                ("target", List(p.target.to_vec())),
                ("target_speed", Number(p.target_speed)),
                ("target_accel", List(p.target_accel.to_vec())),
                ("target_jerk", List(p.target_jerk.to_vec())),
                ("robot_radius", Number(p.robot_radius)),
                ("obstacles", List(p.obstacles.clone())),
                ("initial_speed", Number(p.initial_speed)),
                ("mfcq_d", Number(p.mfcq_d)),
                ("mfcq_eps", Number(p.mfcq_eps)),
            ],
        }
    }
}

fn tracking_objective(reference: Arc<dyn Reference>, weight: f64) -> TvObjective {
    let f = TrackingObjective::new(reference, weight);
    TvObjective::new(Arc::new(f), weight, weight).expect("positive weight")
}

fn stack_jets(jets: &[OutputJet]) -> Result<OutputJet> {
    let order = jets[0].order();
    let values = (0..order)
        .map(|i| jets.iter().flat_map(|j| j.value(i).to_vec()).collect())
        .collect();
    OutputJet::new(values)
}

/// Builds a named scenario, or fails with `UnknownScenario`.
pub fn build_scenario(name: &str, params: Option<&ScenarioParams>) -> Result<Scenario> {
    let defaults;
    let params = match params {
        Some(p) if p.name() == name => p,
        Some(p) => {
            return Err(Error::InvalidArgument(format!(
                "parameters for `{}` given to scenario `{name}`",
                p.name()
            )))
        }
        None => {
            defaults = ScenarioParams::defaults(name)?;
            &defaults
        }
    };
    match params {
        ScenarioParams::Tracking(p) => {
            let reference: Arc<dyn Reference> = Arc::new(PolynomialTrajectory::from_pose(p.target, p.target_speed, p.target_accel, p.target_jerk));
            let (model, jet) = if p.model == "integrator" {
                let m = FlatModel::Integrator { dim: 2 };
                (m, m.initial_jet(&p.robot[..2], 0.0)?)
            } else {
                let m = FlatModel::wmr();
                (m, m.initial_jet(&p.robot, p.initial_speed)?)
            };
            Ok(Scenario {
                name: "tracking".into(),
                objective: tracking_objective(reference.clone(), 1.0),
                constraints: ConstraintSet::Unconstrained,
                models: vec![model],
                initial_jet: jet,
                reference: Some(reference),
            })
        }
        ScenarioParams::Formation(p) => {
            let spread = |pose: [f64; 3], sign: f64| {
                Arc::new(PolynomialTrajectory::from_pose(pose, p.target_speed, [0.0, sign * p.spread_accel], [0.0, 0.0])) as Arc<dyn Reference>
            };
            let reference: Arc<dyn Reference> = Arc::new(StackedReference(vec![spread(p.target_1, 1.0), spread(p.target_2, -1.0)]));
            let m = FlatModel::wmr();
            let jet = stack_jets(&[m.initial_jet(&p.robot_1, p.initial_speed)?, m.initial_jet(&p.robot_2, p.initial_speed)?])?;
            let pair = PairDistanceConstraint::new(4, 2, 0, 1, p.max_distance)?;
            Ok(Scenario {
                name: "formation".into(),
                // Σ‖y_i − y_i^d‖² is the tracking objective with weight 2.
                objective: tracking_objective(reference.clone(), 2.0),
                constraints: ConstraintSet::Inequality(TvInequalityConstraints::new(vec![Arc::new(pair)], p.mfcq_d, p.mfcq_eps)?),
                models: vec![m, m],
                initial_jet: jet,
                reference: Some(reference),
            })
        }
        ScenarioParams::Obstacle(p) => {
            let obstacles = p.disks()?;
            check_disjoint(&obstacles)?;
            if let Some((i, _)) = obstacles
                .iter()
                .enumerate()
                .find(|(_, o)| o.clearance(&p.robot[..2]) <= p.robot_radius)
            {
                return Err(Error::InfeasibleStart(format!(
                    "robot start ({}, {}) overlaps obstacle {i}",
                    p.robot[0], p.robot[1]
                )));
            }
            let reference: Arc<dyn Reference> = Arc::new(PolynomialTrajectory::from_pose(p.target, p.target_speed, p.target_accel, p.target_jerk));
            let m = FlatModel::wmr();
            Ok(Scenario {
                name: "obstacle".into(),
                objective: tracking_objective(reference.clone(), 1.0),
                constraints: ConstraintSet::LocalWorkspace(LocalWorkspace {
                    obstacles,
                    robot_radius: p.robot_radius,
                    mfcq_d: p.mfcq_d,
                    mfcq_eps: p.mfcq_eps,
                }),
                models: vec![m],
                initial_jet: m.initial_jet(&p.robot, p.initial_speed)?,
                reference: Some(reference),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formation_uses_the_listed_start_states() {
        let s = build_scenario("formation", None).unwrap();
        assert_eq!(s.initial_jet.value(0), &[-4.5, -3.5, -3.0, -3.5]);
        assert_eq!(s.objective.dim(), 4);
        assert_eq!(s.models.len(), 2);
        let r = s.reference.as_ref().unwrap().eval(0.0, 0);
        assert_eq!(r[0], vec![-5.0, -3.0, -2.0, -3.0]);
        let ConstraintSet::Inequality(ineq) = &s.constraints else { panic!() };
        assert_eq!(ineq.len(), 1);
    }

    #[test]
    fn obstacle_defaults() {
        let s = build_scenario("obstacle", None).unwrap();
        assert_eq!(s.initial_jet.value(0), &[-6.0, -3.0]);
        let ConstraintSet::LocalWorkspace(lw) = &s.constraints else { panic!() };
        assert_eq!(lw.robot_radius, 0.2);
        assert_eq!(lw.obstacles.len(), 4);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(build_scenario("spline", None), Err(Error::UnknownScenario(n)) if n == "spline"));
    }

    #[test]
    fn start_inside_an_obstacle() {
        let mut p = ObstacleParams::default();
        p.obstacles = vec![-6.0, -3.1, 0.3];
        let r = build_scenario("obstacle", Some(&ScenarioParams::Obstacle(p)));
        assert!(matches!(r, Err(Error::InfeasibleStart(_))));
    }

    #[test]
    fn params_round_trip_through_entries() {
        for name in SCENARIO_NAMES {
            let p = ScenarioParams::defaults(name).unwrap();
            let mut q = ScenarioParams::defaults(name).unwrap();
            if let ScenarioParams::Tracking(t) = &mut q {
                t.model = "integrator".into();
            }
            for (k, v) in p.entries() {
                q.set(k, &v).unwrap();
            }
            assert_eq!(p, q);
            assert!(q.set("nonsense", &ParamValue::Number(1.0)).is_err());
        }
    }

    #[test]
    fn integrator_tracking_variant() {
        let mut p = TrackingParams::default();
        p.model = "integrator".into();
        let s = build_scenario("tracking", Some(&ScenarioParams::Tracking(p))).unwrap();
        assert_eq!(s.order(), 1);
        assert_eq!(s.initial_jet.value(0), &[-1.0, -1.0]);
    }
}
