//! Closed-loop simulation: integrate the jet dynamics, optionally the plant
//! alongside, and log the run against an independent optimum oracle.

mod fit;
mod oracle;

use std::fmt;
use std::sync::Arc;

use crate::dynamics::{
    check_rank, flow_highest_derivative, initial_dual_jet, multiplier_diagnostics, slack_initial, BarrierObjective, BarrierSchedule,
    Lagrangian, OutputJet, PrimalDualJet,
};
use crate::error::{Error, Result};
use crate::flat::FlatModel;
use crate::numerics::{distance, IntegratorConfig, OdeStats, OdeStepper, Vector};
use crate::problem::{Reference, TvEqualityConstraints, TvFunction, TvInequalityConstraints, TvObjective};
use crate::scenarios::{local_workspace_halfspaces, DiskObstacle};
use crate::target::TargetSystemSpec;

pub use fit::{fit_decay, DecayFit, CONVERGED_ERROR};
pub use oracle::{solve_barrier_optimum, solve_optimum_oracle, OracleProblem, OracleSolution, FINAL_BARRIER, GRAD_TOL, MAX_NEWTON};

/// Obstacle avoidance through halfspaces recomputed from the robot position
/// at every evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWorkspace {
    pub obstacles: Vec<DiskObstacle>,
    pub robot_radius: f64,
    pub mfcq_d: f64,
    pub mfcq_eps: f64,
}

impl LocalWorkspace {
    fn constraints(&self, y: &[f64], t: f64) -> Result<TvInequalityConstraints> {
        let hs = local_workspace_halfspaces(y, &self.obstacles, self.robot_radius).map_err(|e| e.with_time(t))?;
        let funcs = hs.iter().map(|h| Arc::new(h.to_constraint()) as Arc<dyn TvFunction>).collect();
        TvInequalityConstraints::new(funcs, self.mfcq_d, self.mfcq_eps)
    }

    /// Smallest `‖y − y_i‖ − (r + r_i)` over obstacles.
    pub fn clearance(&self, y: &[f64]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| distance(y, &o.center) - o.radius - self.robot_radius)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintSet {
    Unconstrained,
    Equality(TvEqualityConstraints),
    Inequality(TvInequalityConstraints),
    LocalWorkspace(LocalWorkspace),
}

/// Problem, plant models and initial jet for one closed-loop run. The
/// models' outputs are stacked in order to form the problem's output.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub objective: TvObjective,
    pub constraints: ConstraintSet,
    pub models: Vec<FlatModel>,
    pub initial_jet: OutputJet,
    pub reference: Option<Arc<dyn Reference>>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("objective", &self.objective)
            .field("constraints", &self.constraints)
            .field("models", &self.models)
            .field("initial_jet", &self.initial_jet)
            .finish()
    }
}

impl Scenario {
    pub fn order(&self) -> usize {
        self.models.first().map_or(1, FlatModel::order)
    }

    pub fn output_dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.models.iter().map(FlatModel::input_dim).sum()
    }

    pub fn constraint_count(&self) -> usize {
        match &self.constraints {
            ConstraintSet::Inequality(c) => c.len(),
            ConstraintSet::LocalWorkspace(lw) => lw.obstacles.len(),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("scenario needs at least one model".into()));
        }
        if self.models.iter().any(|m| m.order() != self.order()) {
            return Err(Error::InvalidArgument("all models must share one flat order".into()));
        }
        let m: usize = self.models.iter().map(FlatModel::output_dim).sum();
        if m != self.objective.dim() || self.initial_jet.dim() != m {
            return Err(Error::Dimension(format!(
                "models produce {m} outputs, objective has {}, initial jet {}",
                self.objective.dim(),
                self.initial_jet.dim()
            )));
        }
        if self.initial_jet.order() != self.order() {
            return Err(Error::Dimension(format!(
                "initial jet has order {}, models need {}",
                self.initial_jet.order(),
                self.order()
            )));
        }
        if let ConstraintSet::LocalWorkspace(_) = self.constraints {
            if m != 2 {
                return Err(Error::Dimension("local workspaces need a single planar robot".into()));
            }
        }
        Ok(())
    }

    /// Splits a stacked jet (carrying orders `0..=k`) into per-model inputs.
    pub fn inputs(&self, jet: &OutputJet, t: f64) -> Result<Vector> {
        let mut out = Vec::with_capacity(self.input_dim());
        let mut offset = 0;
        for model in &self.models {
            let d = model.output_dim();
            let part = OutputJet::new(jet.values().iter().map(|v| v[offset..offset + d].to_vec()).collect())?;
            out.extend(model.input_from_jet(&part, t)?);
            offset += d;
        }
        Ok(out)
    }

    /// Plant states recovered from a stacked jet.
    pub fn plant_states(&self, jet: &OutputJet, t: f64) -> Result<Vector> {
        let mut out = Vec::new();
        let mut offset = 0;
        for model in &self.models {
            let d = model.output_dim();
            let part = OutputJet::new(jet.values().iter().map(|v| v[offset..offset + d].to_vec()).collect())?;
            out.extend(model.state_from_jet(&part, t)?);
            offset += d;
        }
        Ok(out)
    }

    fn plant_rhs(&self, x: &[f64], u: &[f64]) -> Result<Vector> {
        let (mut xo, mut uo) = (0, 0);
        let mut out = Vec::with_capacity(x.len());
        for model in &self.models {
            let (n, p) = (model.state_dim(), model.input_dim());
            out.extend(model.plant_rhs(&x[xo..xo + n], &u[uo..uo + p])?);
            xo += n;
            uo += p;
        }
        Ok(out)
    }

    fn plant_outputs(&self, x: &[f64]) -> Vector {
        let mut xo = 0;
        let mut out = Vec::new();
        for model in &self.models {
            out.extend(model.output(&x[xo..xo + model.state_dim()]));
            xo += model.state_dim();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t_final: f64,
    pub sample_dt: f64,
    pub integrator: IntegratorConfig,
    /// Target-system coefficients; the order's default when absent.
    pub target_coeffs: Option<Vec<f64>>,
    /// Barrier schedule; `s0` is recomputed from the initial jet.
    pub barrier: BarrierSchedule,
    /// Co-integrate the plant and check it against the flat output.
    pub verify_plant: bool,
    /// Plant-consistency tolerance; `10 (abs_tol + rel_tol·max(1, ‖y‖))`
    /// when absent.
    pub plant_tol: Option<f64>,
    /// Also solve for and log the barrier-perturbed optimum `ŷ*`.
    pub log_barrier_optimum: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            sample_dt: 0.01,
            integrator: IntegratorConfig::default(),
            target_coeffs: None,
            barrier: BarrierSchedule::default(),
            verify_plant: false,
            plant_tol: None,
            log_barrier_optimum: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument("run.t_final must be positive".into()));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(Error::InvalidArgument("run.sample_dt must be positive".into()));
        }
        self.integrator.validate()?;
        self.barrier.validate()?;
        Ok(())
    }

    pub fn target_spec(&self, order: usize, dim: usize) -> Result<TargetSystemSpec> {
        let spec = match &self.target_coeffs {
            Some(c) => TargetSystemSpec::hurwitz(c.clone(), dim)?,
            None => TargetSystemSpec::default_for_order(order, dim)?,
        };
        if spec.order() != order {
            return Err(Error::InvalidArgument(format!(
                "target.coeffs has {} entries but the models have flat order {order}",
                spec.order()
            )));
        }
        Ok(spec)
    }
}

/// Sampled record of a run. Per-sample vectors are index-aligned with
/// `times`; optional series are empty when not applicable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub order: usize,
    pub output_dim: usize,
    pub input_dim: usize,
    pub target_coeffs: Vec<f64>,
    pub decay_rate: f64,
    pub strong_convexity: f64,
    pub lipschitz: f64,
    /// `L d / ε` for runs with fixed inequality constraints.
    pub multiplier_bound: Option<f64>,
    pub s0: f64,
    pub times: Vec<f64>,
    /// Flattened `(y, ẏ, ..)` at each sample.
    pub jets: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub optimum: Vec<Vector>,
    pub errors: Vec<f64>,
    pub inputs: Vec<Vector>,
    pub objective: Vec<f64>,
    pub optimal_objective: Vec<f64>,
    pub constraint_values: Vec<Vector>,
    pub multipliers: Vec<Vector>,
    pub barrier_c: Vec<f64>,
    pub barrier_s: Vec<f64>,
    pub gap_bound: Vec<f64>,
    pub duals: Vec<Vector>,
    pub optimal_duals: Vec<Vector>,
    pub barrier_optimum: Vec<Vector>,
    pub plant_states: Vec<Vector>,
    pub plant_errors: Vec<f64>,
    pub reference: Vec<Vector>,
    pub clearance: Vec<f64>,
    pub stats: OdeStats,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_barrier(&self) -> bool {
        !self.barrier_c.is_empty()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint_values.first().map_or(0, Vec::len)
    }

    /// `‖z − z*‖` for equality runs, `‖y − y*‖` otherwise.
    pub fn primal_dual_errors(&self) -> Vec<f64> {
        if self.duals.is_empty() {
            return self.errors.clone();
        }
        (0..self.len())
            .map(|j| {
                let dy = self.errors[j];
                let dn = distance(&self.duals[j], &self.optimal_duals[j]);
                dy.hypot(dn)
            })
            .collect()
    }

    pub fn max_constraint_value(&self) -> Option<f64> {
        self.constraint_values.iter().flatten().copied().reduce(f64::max)
    }
}

/// Trailing-window decay fit of the logged tracking error (`‖z − z*‖` for
/// equality runs).
pub fn fit_decay_rate(log: &TrajectoryLog, window: f64) -> Result<DecayFit> {
    fit_decay(&log.times, &log.primal_dual_errors(), window)
}

enum Law {
    Function(Arc<dyn TvFunction>, TargetSystemSpec),
    Equality(Lagrangian, TargetSystemSpec, TvEqualityConstraints),
    Workspace(LocalWorkspace, TargetSystemSpec),
}

struct Controller {
    law: Law,
    objective: TvObjective,
    schedule: BarrierSchedule,
    primal_dim: usize,
    jet_dim: usize,
    order: usize,
}

impl Controller {
    fn highest(&self, jet: &OutputJet, t: f64) -> Result<Vector> {
        match &self.law {
            Law::Function(f, spec) => flow_highest_derivative(f.as_ref(), spec, jet, t),
            Law::Equality(lag, spec, eq) => {
                check_rank(eq, t)?;
                flow_highest_derivative(lag, spec, jet, t)
            }
            Law::Workspace(lw, spec) => {
                let ineq = lw.constraints(jet.value(0), t)?;
                let phi = BarrierObjective::new(self.objective.func.clone(), ineq.funcs, self.schedule)?;
                flow_highest_derivative(&phi, spec, jet, t)
            }
        }
    }

    /// Primal jet including the highest derivative.
    fn primal_extended(&self, jet: &OutputJet, highest: &[f64]) -> Result<OutputJet> {
        let m = self.primal_dim;
        let mut values: Vec<Vector> = jet.values().iter().map(|v| v[..m].to_vec()).collect();
        values.push(highest[..m].to_vec());
        OutputJet::new(values)
    }
}

/// Integrates the closed loop and samples it every `sample_dt`.
pub fn run_closed_loop(scenario: &Scenario, cfg: &RunConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    scenario.validate()?;
    let k = scenario.order();
    let m = scenario.output_dim();
    let spec = cfg.target_spec(k, m)?;
    let y0 = scenario.initial_jet.value(0).to_vec();

    let mut schedule = cfg.barrier;
    let (law, start_jet, multiplier_bound) = match &scenario.constraints {
        ConstraintSet::Unconstrained => (Law::Function(scenario.objective.func.clone(), spec.clone()), scenario.initial_jet.clone(), None),
        ConstraintSet::Inequality(ineq) => {
            schedule.s0 = slack_initial(ineq, &y0, schedule.eps_s)?;
            let func: Arc<dyn TvFunction> = if ineq.is_empty() {
                scenario.objective.func.clone()
            } else {
                Arc::new(BarrierObjective::new(scenario.objective.func.clone(), ineq.funcs.clone(), schedule)?)
            };
            let bound = scenario.objective.lipschitz * ineq.mfcq_d / ineq.mfcq_eps;
            (Law::Function(func, spec.clone()), scenario.initial_jet.clone(), Some(bound))
        }
        ConstraintSet::Equality(eq) => {
            let lag = Lagrangian::new(scenario.objective.func.clone(), eq.func.clone())?;
            let z0 = initial_dual_jet(&scenario.objective, eq, &scenario.initial_jet, 0.0)?;
            let zspec = spec.with_dim(lag.dim());
            (Law::Equality(lag, zspec, eq.clone()), z0.jet().clone(), None)
        }
        ConstraintSet::LocalWorkspace(lw) => {
            schedule.s0 = 0.0;
            if let Some((i, _)) = lw.obstacles.iter().enumerate().find(|(_, o)| o.clearance(&y0) <= lw.robot_radius) {
                return Err(Error::InfeasibleStart(format!("robot starts inside inflated obstacle {i}")));
            }
            // Position-dependent halfspaces fall outside the multiplier
            // bound's hypotheses, so none is reported.
            (Law::Workspace(lw.clone(), spec.clone()), scenario.initial_jet.clone(), None)
        }
    };
    let ctrl = Controller {
        law,
        objective: scenario.objective.clone(),
        schedule,
        primal_dim: m,
        jet_dim: start_jet.dim(),
        order: k,
    };

    let jet_len = k * ctrl.jet_dim;
    let mut state0 = start_jet.to_state();
    if cfg.verify_plant {
        state0.extend(scenario.plant_states(&scenario.initial_jet, 0.0)?);
    }
    let rhs = |t: f64, state: &[f64]| -> Result<Vector> {
        let jet = OutputJet::from_state(&state[..jet_len], ctrl.order, ctrl.jet_dim)?;
        let highest = ctrl.highest(&jet, t)?;
        let mut d = jet.state_derivative(&highest);
        if cfg.verify_plant {
            let u = scenario.inputs(&ctrl.primal_extended(&jet, &highest)?, t)?;
            d.extend(scenario.plant_rhs(&state[jet_len..], &u)?);
        }
        Ok(d)
    };

    let mut log = TrajectoryLog {
        scenario: scenario.name.clone(),
        order: k,
        output_dim: m,
        input_dim: scenario.input_dim(),
        target_coeffs: spec.coeffs().to_vec(),
        decay_rate: spec.decay_rate()?,
        strong_convexity: scenario.objective.strong_convexity,
        lipschitz: scenario.objective.lipschitz,
        multiplier_bound,
        s0: schedule.s0,
        ..Default::default()
    };
    let mut recorder = Recorder {
        scenario,
        cfg,
        ctrl: &ctrl,
        warm: None,
        warm_barrier: None,
    };

    let steps = (cfg.t_final / cfg.sample_dt).round().max(1.0) as usize;
    let mut stepper = OdeStepper::new(rhs, 0.0, state0, cfg.integrator)?;
    recorder.record(&mut log, 0.0, stepper.state())?;
    for j in 1..=steps {
        let t = if j == steps { cfg.t_final } else { j as f64 * cfg.sample_dt };
        let state = stepper.advance_to(t, |_, _| {})?.to_vec();
        recorder.record(&mut log, t, &state)?;
    }
    log.stats = stepper.stats;
    Ok(log)
}

struct Recorder<'a> {
    scenario: &'a Scenario,
    cfg: &'a RunConfig,
    ctrl: &'a Controller,
    warm: Option<Vector>,
    warm_barrier: Option<Vector>,
}

impl Recorder<'_> {
    fn record(&mut self, log: &mut TrajectoryLog, t: f64, state: &[f64]) -> Result<()> {
        let ctrl = self.ctrl;
        let k = ctrl.order;
        let m = ctrl.primal_dim;
        let jet_len = k * ctrl.jet_dim;
        let jet = OutputJet::from_state(&state[..jet_len], k, ctrl.jet_dim)?;
        let highest = ctrl.highest(&jet, t)?;
        let y = jet.value(0)[..m].to_vec();
        let obj = &self.scenario.objective;

        let (problem, ws_ineq) = match &self.scenario.constraints {
            ConstraintSet::Unconstrained => (None, None),
            ConstraintSet::Inequality(ineq) => (Some(ineq.clone()), None),
            ConstraintSet::LocalWorkspace(lw) => {
                let ineq = lw.constraints(&y, t)?;
                log.clearance.push(lw.clearance(&y));
                (Some(ineq.clone()), Some(ineq))
            }
            ConstraintSet::Equality(_) => (None, None),
        };
        let solution = match (&self.scenario.constraints, &problem) {
            (ConstraintSet::Equality(eq), _) => solve_optimum_oracle(OracleProblem::Equality(obj, eq), t, self.warm.as_deref()),
            (_, Some(ineq)) => solve_optimum_oracle(OracleProblem::Inequality(obj, ineq), t, self.warm.as_deref()),
            _ => solve_optimum_oracle(OracleProblem::Unconstrained(obj), t, self.warm.as_deref()),
        }
        .map_err(|e| e.with_time(t))?;
        // Local-workspace optima depend on the robot position, so they are
        // not a useful warm start for the next sample.
        if ws_ineq.is_none() {
            self.warm = Some(solution.y.clone());
        }

        log.times.push(t);
        log.jets.push(state[..jet_len].to_vec());
        log.errors.push(distance(&y, &solution.y));
        log.objective.push(obj.func.value(&y, t)?);
        log.optimal_objective.push(obj.func.value(&solution.y, t)?);
        log.inputs.push(self.scenario.inputs(&ctrl.primal_extended(&jet, &highest)?, t)?);
        if let Some(r) = &self.scenario.reference {
            log.reference.push(r.eval(t, 0).swap_remove(0));
        }
        if let Some(nu) = &solution.nu {
            log.duals.push(jet.value(0)[m..].to_vec());
            log.optimal_duals.push(nu.clone());
        }
        if let Some(ineq) = &problem {
            let diag = multiplier_diagnostics(ineq, &ctrl.schedule, &y, t, obj.lipschitz)?;
            log.constraint_values.push(ineq.values(&y, t)?);
            log.multipliers.push(diag.estimates);
            log.barrier_c.push(ctrl.schedule.c(t));
            log.barrier_s.push(ctrl.schedule.s(t));
            log.gap_bound.push(diag.gap_bound);
            if self.cfg.log_barrier_optimum && ws_ineq.is_none() {
                let start = self.warm_barrier.clone().unwrap_or_else(|| solution.y.clone());
                let yhat = solve_barrier_optimum(obj, ineq, &ctrl.schedule, t, &start)
                    .or_else(|_| solve_barrier_optimum(obj, ineq, &ctrl.schedule, t, &solution.y))
                    .map_err(|e| e.with_time(t))?;
                self.warm_barrier = Some(yhat.clone());
                log.barrier_optimum.push(yhat);
            }
        }
        log.outputs.push(y.clone());
        log.optimum.push(solution.y);

        if self.cfg.verify_plant {
            let x = state[jet_len..].to_vec();
            let h = self.scenario.plant_outputs(&x);
            let err = distance(&h, &y);
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tol = self
                .cfg
                .plant_tol
                .unwrap_or(10.0 * (self.cfg.integrator.abs_tol + self.cfg.integrator.rel_tol * ynorm.max(1.0)));
            if !(err <= tol) {
                return Err(Error::PlantDivergence { t, error: err });
            }
            log.plant_states.push(x);
            log.plant_errors.push(err);
        }
        Ok(())
    }
}

/// Starts a second-order equality run from a primal jet; exposed for tests
/// that need the dual initialization alone.
pub fn initial_primal_dual(scenario: &Scenario) -> Result<Option<PrimalDualJet>> {
    match &scenario.constraints {
        ConstraintSet::Equality(eq) => Ok(Some(initial_dual_jet(&scenario.objective, eq, &scenario.initial_jet, 0.0)?)),
        _ => Ok(None),
    }
}
