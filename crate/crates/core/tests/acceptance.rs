//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines always
//! show. The process fails only on unexpected failures; a criterion listed
//! in `KNOWN_UNATTAINABLE` is still evaluated and printed, but its FAIL does
//! not fail the target.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use flatopt::dynamics::{multiplier_diagnostics, BarrierObjective, BarrierSchedule, OutputJet};
use flatopt::flat::FlatModel;
use flatopt::numerics::{
    distance, dot, norm2, singular_values, symmetric_eigenvalues, DenseMatrix, IntegratorConfig, Vector,
};
use flatopt::problem::{
    gradient_flow_split, AffineConstraint, LogCoshObjective, SinusoidalEquality, SinusoidalReference,
    TrackingObjective, TvEqualityConstraints, TvFunction, TvInequalityConstraints, TvObjective,
};
use flatopt::scenarios::{build_scenario, ParamValue, PolynomialTrajectory, ScenarioParams};
use flatopt::sim::{
    fit_decay, run_closed_loop, solve_barrier_optimum, solve_optimum_oracle, ConstraintSet, OracleProblem,
    RunConfig, Scenario, TrajectoryLog,
};

const RATE_SLACK: f64 = 0.05;
const WINDOW: f64 = 0.5;

/// The literal eigenvalue bound uses `4 τ_min` where the interval endpoint
/// it is derived from gives `4 τ_min²`; for `τ_min < 1` the literal bound
/// exceeds tight spectra. It is checked as written and expected to fail.
const KNOWN_UNATTAINABLE: &[u32] = &[5];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn rate_of(times: &[f64], errors: &[f64]) -> f64 {
    fit_decay(times, errors, WINDOW).expect("error is fittable").rate
}

fn tracking(model: &str, coeffs: Vec<f64>) -> (Scenario, RunConfig) {
    let mut p = ScenarioParams::defaults("tracking").unwrap();
    p.set("model", &ParamValue::Text(model.into())).unwrap();
    let cfg = RunConfig { target_coeffs: Some(coeffs), ..Default::default() };
    (build_scenario("tracking", Some(&p)).unwrap(), cfg)
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (model, coeffs) in [("integrator", vec![1.0]), ("wmr", vec![2.0, 3.0])] {
        let (scenario, cfg) = tracking(model, coeffs);
        let (log, took) = timed(|| run_closed_loop(&scenario, &cfg).unwrap());
        let fit = fit_decay(&log.times, &log.errors, WINDOW).unwrap();
        let alpha = log.decay_rate;
        let subopt_ok = (0..log.len()).all(|j| {
            let gap = log.objective[j] - log.optimal_objective[j];
            let t = log.times[j];
            gap <= log.strong_convexity * fit.constant().powi(2) * (-2.0 * fit.rate * t).exp() + 1e-6
        });
        let ok = fit.rate >= alpha - RATE_SLACK && subopt_ok && took < Duration::from_secs(2);
        pass &= ok;
        lines.push(format!(
            "{model}: rate {:.4} (alpha {alpha:.4}), suboptimality bound {}, {:.2} s",
            fit.rate,
            if subopt_ok { "holds" } else { "violated" },
            took.as_secs_f64()
        ));
    }
    outcome(1, pass, lines.join("; "))
}

fn criterion_2() -> Outcome {
    let target = PolynomialTrajectory::from_pose([0.0, 0.0, 0.5], 0.5, [0.0, 0.06], [0.0, -0.012]);
    let f0 = TrackingObjective::new(Arc::new(target.clone()), 1.0);
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let eq = SinusoidalEquality::fixed_matrix(a, vec![0.0], vec![1.0], 1.0).unwrap();
    let sigma = 2f64.sqrt();
    let scenario = Scenario {
        name: "equality".into(),
        objective: TvObjective::new(Arc::new(f0), 1.0, 1.0).unwrap(),
        constraints: ConstraintSet::Equality(TvEqualityConstraints::new(Arc::new(eq), sigma, sigma).unwrap()),
        models: vec![FlatModel::Integrator { dim: 2 }],
        initial_jet: OutputJet::new(vec![vec![0.5, -1.0]]).unwrap(),
        reference: Some(Arc::new(target)),
    };
    // 1000 samples over 10 s.
    let cfg = RunConfig { sample_dt: 0.01, target_coeffs: Some(vec![2.0]), ..Default::default() };
    let (log, took) = timed(|| run_closed_loop(&scenario, &cfg).unwrap());
    let z_err = log.primal_dual_errors();
    let rate = rate_of(&log.times, &z_err);
    let last = *z_err.last().unwrap();
    let pass = rate >= log.decay_rate - RATE_SLACK && last <= 1e-6 && took < Duration::from_secs(2);
    outcome(
        2,
        pass,
        format!(
            "{} samples, rate {rate:.4} (alpha {:.4}), final |z - z*| {last:.2e}, {:.2} s",
            log.len() - 1,
            log.decay_rate,
            took.as_secs_f64()
        ),
    )
}

/// Scalar test problem: `f₀ = ½(y − y_d(t))²` with `y_d = 1.3 + 0.4 sin t`,
/// one constraint `y ≤ 1 + 0.1 sin(t/2)`, started infeasible at `y = 1.5`.
/// The unconstrained optimum violates the bound most of the time, so the
/// constraint is active.
struct ScalarProblem {
    objective: TvObjective,
    ineq: TvInequalityConstraints,
    y0: f64,
}

fn scalar_problem() -> ScalarProblem {
    let reference = SinusoidalReference::scalar(1.3, 0.4, 1.0, 0.0);
    let f0 = TrackingObjective::new(Arc::new(reference), 1.0);
    let bound = AffineConstraint { a: vec![1.0], b0: 1.0, b1: 0.1, omega: 0.5 };
    ScalarProblem {
        objective: TvObjective::new(Arc::new(f0), 1.0, 1.0).unwrap(),
        ineq: TvInequalityConstraints::new(vec![Arc::new(bound)], 1.0, 1.0).unwrap(),
        y0: 1.5,
    }
}

fn scalar_run(sp: &ScalarProblem) -> (TrajectoryLog, RunConfig) {
    let scenario = Scenario {
        name: "scalar".into(),
        objective: sp.objective.clone(),
        constraints: ConstraintSet::Inequality(sp.ineq.clone()),
        models: vec![FlatModel::Integrator { dim: 1 }],
        initial_jet: OutputJet::new(vec![vec![sp.y0]]).unwrap(),
        reference: None,
    };
    let cfg = RunConfig { target_coeffs: Some(vec![1.0]), log_barrier_optimum: true, ..Default::default() };
    (run_closed_loop(&scenario, &cfg).unwrap(), cfg)
}

fn criterion_3(sp: &ScalarProblem) -> Outcome {
    let (log, cfg) = scalar_run(sp);
    let sched = BarrierSchedule { s0: log.s0, ..cfg.barrier };
    let to_barrier: Vec<f64> = (0..log.len()).map(|j| distance(&log.outputs[j], &log.barrier_optimum[j])).collect();
    let rate = rate_of(&log.times, &to_barrier);

    // The flow makes ∇Φ̂ decay like e^{-a t}; strong convexity turns the
    // initial gradient into the constant of the distance envelope.
    let phi = BarrierObjective::new(sp.objective.func.clone(), sp.ineq.funcs.clone(), sched).unwrap();
    let c = norm2(&phi.grad(&[sp.y0], 0.0).unwrap()) / sp.objective.strong_convexity;
    let (l, p) = (sp.objective.lipschitz, sp.ineq.len() as f64);
    let lam_term = l * sp.ineq.mfcq_d / sp.ineq.mfcq_eps;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..log.len() {
        let t = log.times[j];
        let gap = (log.objective[j] - log.optimal_objective[j]).abs();
        let bound = l * c * (-log.decay_rate * t).exp() + p / sched.c(t) + lam_term * sched.s(t) + 1e-6;
        worst = worst.max(gap - bound);
    }
    let pass = rate >= log.decay_rate - RATE_SLACK && worst <= 0.0;
    outcome(
        3,
        pass,
        format!(
            "rate of |y - y_hat*| {rate:.4} (alpha {:.4}), s0 {:.2}, max(gap - bound) {worst:.3e}",
            log.decay_rate, log.s0
        ),
    )
}

fn random_vec(rng: &mut StdRng, n: usize, scale: f64) -> Vector {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

/// Richardson-extrapolated central difference of order 1 or 2.
fn derivative(f: &dyn Fn(f64) -> Vector, t: f64, order: u8) -> Vector {
    let h = 1e-2;
    let d = |h: f64| -> Vector {
        let (p, m) = (f(t + h), f(t - h));
        match order {
            1 => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            _ => {
                let c = f(t);
                p.iter().zip(&m).zip(&c).map(|((a, b), c)| (a - 2.0 * c + b) / (h * h)).collect()
            }
        }
    };
    let (coarse, fine) = (d(h), d(h / 2.0));
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

fn criterion_4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let dim = rng.random_range(1..=4);
        let f = LogCoshObjective::random(dim, rng.random_range(1..=4), 100 + case, true);
        let path = PolynomialTrajectory::from_degree_vectors((0..5).map(|j| random_vec(&mut rng, dim, 1.0 / (j + 1) as f64)).collect()).unwrap();
        let t = rng.random_range(0.0..3.0);
        for k in 1..=2usize {
            let derivs = path.eval_polynomial_target(t, k);
            let jet = OutputJet::new(derivs[..k].to_vec()).unwrap();
            let split = gradient_flow_split(&f, &jet, t, k).unwrap();
            let mut recon = split.hessian.matvec(&derivs[k]);
            recon.iter_mut().zip(&split.remainder).for_each(|(r, q)| *r += q);
            let along = |s: f64| f.grad(&path.eval_polynomial_target(s, 0)[0], s).unwrap();
            let fd = derivative(&along, t, k as u8);
            let err = distance(&recon, &fd) / norm2(&fd).max(1.0);
            worst = worst.max(err);
        }
    }
    outcome(4, worst < 1e-5, format!("100 reconstructions, max relative error {worst:.2e}"))
}

/// Random symmetric matrix with spectrum inside `[lo, hi]`, both attained.
fn spd_in(rng: &mut StdRng, n: usize, lo: f64, hi: f64) -> DenseMatrix {
    let b = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut s = b.transpose().matmul(&b);
    let ev = symmetric_eigenvalues(&s);
    let (a, z) = (ev[0], ev[n - 1]);
    if z - a < 1e-9 {
        return DenseMatrix::from_diagonal(&vec![lo; n]);
    }
    s.add_scaled(-a, &DenseMatrix::identity(n));
    s.scale((hi - lo) / (z - a));
    s.add_scaled(lo, &DenseMatrix::identity(n));
    s
}

fn criterion_5() -> (Outcome, Outcome) {
    let mut rng = StdRng::seed_from_u64(5);
    let (mut in_intervals, mut literal_misses, mut corrected_misses) = (0, 0, 0);
    let mut worst_literal = f64::INFINITY;
    for _ in 0..100 {
        let m = rng.random_range(2..=6);
        let q = rng.random_range(1..m);
        let m_f = rng.random_range(0.2..2.0);
        let l = m_f * rng.random_range(1.0..5.0);
        let h = spd_in(&mut rng, m, m_f, l);
        let scale = rng.random_range(0.1..3.0);
        let a = DenseMatrix::from_fn(q, m, |_, _| scale * rng.random_range(-1.0..1.0));
        let sv = singular_values(&a);
        let (s1, sq) = (sv[0], sv[q - 1]);
        // A declared lower bound consistent with the sampled matrix.
        let tau_min = sq * rng.random_range(0.5..=1.0);

        let mut kkt = DenseMatrix::zeros(m + q, m + q);
        kkt.set_block(0, 0, &h);
        kkt.set_block(m, 0, &a);
        kkt.set_block(0, m, &a.transpose());
        let ev = symmetric_eigenvalues(&kkt);
        let hev = symmetric_eigenvalues(&h);
        let (mu_min, mu_max) = (hev[0], hev[m - 1]);
        let minus = (0.5 * (mu_min - (mu_min * mu_min + 4.0 * s1 * s1).sqrt()), 0.5 * (mu_max - (mu_max * mu_max + 4.0 * sq * sq).sqrt()));
        let plus = (mu_min, 0.5 * (mu_max + (mu_max * mu_max + 4.0 * s1 * s1).sqrt()));
        let tol = 1e-9;
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - tol && x <= hi + tol;
        if ev.iter().all(|&x| inside(x, minus) || inside(x, plus)) {
            in_intervals += 1;
        }
        let min_abs = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let literal = m_f.min(0.5 * ((l * l + 4.0 * tau_min).sqrt() - l));
        let corrected = m_f.min(0.5 * ((l * l + 4.0 * tau_min * tau_min).sqrt() - l));
        if min_abs < literal - 1e-9 {
            literal_misses += 1;
            worst_literal = worst_literal.min(min_abs - literal);
        }
        if min_abs < corrected - 1e-9 {
            corrected_misses += 1;
        }
    }
    let literal = outcome(
        5,
        in_intervals == 100 && literal_misses == 0,
        format!(
            "{in_intervals}/100 spectra inside the interval pair; bound with 4 tau_min violated on {literal_misses}/100 (worst margin {:.3e})",
            if literal_misses > 0 { worst_literal } else { 0.0 }
        ),
    );
    let corrected = outcome(
        5,
        in_intervals == 100 && corrected_misses == 0,
        format!("corrected bound with 4 tau_min^2 violated on {corrected_misses}/100"),
    );
    (literal, corrected)
}

fn criterion_6(sp: &ScalarProblem) -> Outcome {
    let s0 = flatopt::dynamics::slack_initial(&sp.ineq, &[sp.y0], BarrierSchedule::default().eps_s).unwrap();
    let sched = BarrierSchedule { s0, ..Default::default() };
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    let mut warm: Option<Vector> = None;
    let mut times: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
    times.sort_by(f64::total_cmp);
    for &t in &times {
        let exact = solve_optimum_oracle(OracleProblem::Inequality(&sp.objective, &sp.ineq), t, warm.as_deref()).unwrap();
        warm = Some(exact.y.clone());
        // Start well inside the shifted domain.
        let start = [1.0 + 0.1 * (0.5 * t).sin() - 1.0];
        let y_hat = solve_barrier_optimum(&sp.objective, &sp.ineq, &sched, t, &start).unwrap();
        let diag = multiplier_diagnostics(&sp.ineq, &sched, &y_hat, t, sp.objective.lipschitz).unwrap();
        let f = |y: &[f64]| sp.objective.func.value(y, t).unwrap();
        let gap = (f(&y_hat) - f(&exact.y)).abs();
        let bound = sp.ineq.len() as f64 / sched.c(t) + dot(&diag.estimates, &vec![sched.s(t); diag.estimates.len()]);
        worst = worst.max(gap - bound - 1e-8);
    }
    outcome(6, worst <= 0.0, format!("200 times, s0 {s0:.2}, max(gap - bound - 1e-8) {worst:.3e}"))
}

fn shipped(name: &str) -> (Scenario, TrajectoryLog, Duration) {
    let scenario = build_scenario(name, None).unwrap();
    let cfg = RunConfig::default();
    let (log, took) = timed(|| run_closed_loop(&scenario, &cfg).unwrap());
    (scenario, log, took)
}

fn criteria_7_8() -> (Outcome, Outcome) {
    let (_, log, took) = shipped("formation");
    let bound = log.multiplier_bound.expect("formation declares MFCQ constants");
    let max_l1 = log.multipliers.iter().map(|l| l.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let c7 = outcome(7, max_l1 <= bound, format!("max |lambda_hat|_1 {max_l1:.4} vs L d / eps {bound:.4} over {} samples", log.len()));

    let max_sep = log.outputs.iter().map(|y| distance(&y[0..2], &y[2..4])).fold(0.0, f64::max);
    let (y, ystar) = (log.outputs.last().unwrap(), log.optimum.last().unwrap());
    let e1 = distance(&y[0..2], &ystar[0..2]);
    let e2 = distance(&y[2..4], &ystar[2..4]);
    let pass = max_sep <= 3.0 + 1e-2 && e1 < 0.05 && e2 < 0.05 && took < Duration::from_secs(5);
    let c8 = outcome(
        8,
        pass,
        format!("max separation {max_sep:.4} (d = 3), final errors {e1:.2e} / {e2:.2e}, {:.2} s", took.as_secs_f64()),
    );
    (c7, c8)
}

fn criterion_9() -> Outcome {
    let (scenario, log, took) = shipped("obstacle");
    let ConstraintSet::LocalWorkspace(lw) = &scenario.constraints else { unreachable!("obstacle scenario uses a local workspace") };
    let min_clear = log.outputs.iter().map(|y| lw.clearance(y)).fold(f64::INFINITY, f64::min);
    let reference = scenario.reference.as_ref().expect("obstacle scenario has a target");
    let target_free = (0..=1000).all(|j| {
        let t = j as f64 * 0.01;
        let yd = reference.eval(t, 0).swap_remove(0);
        lw.clearance(&yd) > 0.0
    });
    let err = *log.errors.last().unwrap();
    let tracking_ok = !target_free || err < 0.05;
    let pass = min_clear >= -1e-3 && tracking_ok && took < Duration::from_secs(5);
    outcome(
        9,
        pass,
        format!(
            "min clearance {min_clear:.4}, target path {} free space, final error {err:.2e}, {:.2} s",
            if target_free { "stays in" } else { "leaves" },
            took.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let integrator = IntegratorConfig::default();
    for (model, coeffs) in [("integrator", vec![1.0]), ("wmr", vec![2.0, 3.0])] {
        let (scenario, mut cfg) = tracking(model, coeffs);
        cfg.verify_plant = true;
        // Checked below rather than inside the run.
        cfg.plant_tol = Some(f64::INFINITY);
        let log = run_closed_loop(&scenario, &cfg).unwrap();
        let worst = (0..log.len())
            .map(|j| {
                let scale = norm2(&log.outputs[j]).max(1.0);
                log.plant_errors[j] / (10.0 * (integrator.abs_tol + integrator.rel_tol * scale))
            })
            .fold(0.0, f64::max);
        pass &= worst <= 1.0;
        lines.push(format!("{model} plant error / (10 x tolerance) {worst:.2e}"));
    }
    let (scenario, cfg) = tracking("wmr", vec![2.0, 3.0]);
    let plain = run_closed_loop(&scenario, &cfg).unwrap();
    let barrier = Scenario { constraints: ConstraintSet::Inequality(TvInequalityConstraints::empty()), ..scenario };
    let with_barrier = run_closed_loop(&barrier, &cfg).unwrap();
    let identical = plain.jets == with_barrier.jets && plain.inputs == with_barrier.inputs;
    pass &= identical;
    lines.push(format!("p = 0 barrier path {}", if identical { "bit-identical" } else { "differs" }));
    outcome(10, pass, lines.join("; "))
}

fn main() {
    let sp = scalar_problem();
    let mut results = vec![criterion_1(), criterion_2(), criterion_3(&sp), criterion_4()];
    let (c5_literal, c5_corrected) = criterion_5();
    results.push(c5_literal);
    results.push(criterion_6(&sp));
    let (c7, c8) = criteria_7_8();
    results.extend([c7, c8, criterion_9(), criterion_10()]);

    let mut unexpected = 0;
    for r in &results {
        let known = KNOWN_UNATTAINABLE.contains(&r.id);
        let tag = if r.pass { "PASS" } else { "FAIL" };
        let note = if !r.pass && known { " [known: bound as stated is unattainable]" } else { "" };
        println!("{tag} criterion {}: {}{note}", r.id, r.detail);
        if r.id == 5 {
            let tag = if c5_corrected.pass { "PASS" } else { "FAIL" };
            println!("{tag} criterion 5 (corrected): {}", c5_corrected.detail);
            if !c5_corrected.pass {
                unexpected += 1;
            }
        }
        if !r.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        std::process::exit(1);
    }
}
