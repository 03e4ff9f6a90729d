//! Cross-checks of whole runs against closed forms and geometric invariants.

use std::sync::Arc;

use flatopt::numerics::{distance, DenseMatrix};
use flatopt::problem::{Reference, SinusoidalEquality, TrackingObjective, TvEqualityConstraints, TvObjective};
use flatopt::scenarios::{build_scenario, local_workspace_halfspaces, PolynomialTrajectory};
use flatopt::sim::{run_closed_loop, solve_optimum_oracle, ConstraintSet, OracleProblem, RunConfig};

/// For `½‖y − y_d‖²` under `y₁ + y₂ = b` the optimum is the projection
/// `y_d − ½(y_d,1 + y_d,2 − b)(1, 1)` with multiplier `½(y_d,1 + y_d,2 − b)`
/// (sign as in `∇f₀ + Aᵀν = 0`).
#[test]
fn equality_oracle_matches_the_projection() {
    let target = PolynomialTrajectory::from_pose([0.3, -0.2, 0.5], 0.5, [0.1, 0.06], [0.0, -0.012]);
    let obj = TvObjective::new(Arc::new(TrackingObjective::new(Arc::new(target.clone()), 1.0)), 1.0, 1.0).unwrap();
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let eq = SinusoidalEquality::fixed_matrix(a, vec![0.0], vec![1.0], 1.0).unwrap();
    let eq = TvEqualityConstraints::new(Arc::new(eq), 2f64.sqrt(), 2f64.sqrt()).unwrap();
    for j in 0..20 {
        let t = 0.37 * j as f64;
        let yd = target.eval(t, 0).swap_remove(0);
        let excess = 0.5 * (yd[0] + yd[1] - t.sin());
        let sol = solve_optimum_oracle(OracleProblem::Equality(&obj, &eq), t, None).unwrap();
        assert!(distance(&sol.y, &[yd[0] - excess, yd[1] - excess]) < 1e-12, "t = {t}");
        let nu = sol.nu.unwrap();
        assert!((nu[0] - excess).abs() < 1e-12, "t = {t}: {} vs {excess}", nu[0]);
    }
}

/// Along the obstacle run the robot stays inside its own eroded workspace
/// and the logged optimum satisfies the halfspaces built at the robot.
#[test]
fn obstacle_run_respects_the_local_workspace() {
    let scenario = build_scenario("obstacle", None).unwrap();
    let ConstraintSet::LocalWorkspace(lw) = &scenario.constraints else { panic!("obstacle scenario uses a local workspace") };
    let log = run_closed_loop(&scenario, &RunConfig { t_final: 6.0, ..Default::default() }).unwrap();
    for j in 0..log.len() {
        let y = &log.outputs[j];
        let hs = local_workspace_halfspaces(y, &lw.obstacles, lw.robot_radius).unwrap();
        for h in &hs {
            assert!(h.value(y) <= 1e-12, "robot outside its workspace at t = {}", log.times[j]);
            assert!(h.value(&log.optimum[j]) <= 1e-8, "optimum outside the workspace at t = {}", log.times[j]);
        }
        assert!(lw.clearance(y) >= 0.0);
    }
}

/// The formation constraint value logged per sample is the squared
/// separation minus `d²`.
#[test]
fn formation_constraint_column_is_the_separation() {
    let scenario = build_scenario("formation", None).unwrap();
    let log = run_closed_loop(&scenario, &RunConfig { t_final: 2.0, ..Default::default() }).unwrap();
    for (y, f) in log.outputs.iter().zip(&log.constraint_values) {
        let sep = distance(&y[0..2], &y[2..4]);
        assert!((f[0] - (sep * sep - 9.0)).abs() < 1e-12);
    }
}
