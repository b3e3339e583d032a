mod common;

use funnel_mpc::funnel::IDENTITY;
use funnel_mpc::qp::QpStatus;
use funnel_mpc::{
    build_cec_qp, build_funnel, build_funnel_qp, funnel_distance_sq, plan, resample, scenario, BeliefTrajectory, GroundTruthRoad,
    LongitudinalTrajectory, Method, Perception, PlannerConfig, State,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn lon(s0: f64, v: f64, n: usize) -> LongitudinalTrajectory {
    LongitudinalTrajectory::from_speeds(s0, vec![v; n], 0.5).unwrap()
}

fn cfg(method: Method, horizon: usize) -> PlannerConfig {
    PlannerConfig { method, horizon, ..PlannerConfig::default() }
}

/// Consecutive noisy beliefs along a built-in scenario.
fn noisy_beliefs(id: &str, seed: u64, steps: usize) -> Vec<(BeliefTrajectory, LongitudinalTrajectory)> {
    let sc = scenario::builtin(id).unwrap();
    let all = sc.longitudinal().unwrap();
    let mut per = Perception::new(funnel_mpc::PerceptionConfig { seed, ..sc.perception }).unwrap();
    (0..steps)
        .map(|k| {
            let l = all.window(k, sc.planner.horizon).unwrap();
            let b = resample(&per.perceive(&sc.road, &l).unwrap(), &l).unwrap();
            (b, l)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn cec_matches_enumeration_from_a_lateral_offset() {
    let l = lon(0.0, 20.0, 3);
    let road = GroundTruthRoad::straight(500.0).unwrap();
    let b = BeliefTrajectory::ground_truth(&road, &l, 0).unwrap();
    let c = cfg(Method::Cec, 3);
    let x0 = State::new(0.5, 0.0, 0.0, 0.0);
    let qp = build_cec_qp(&x0, &b, &c, &l).unwrap();
    let (x_ref, obj_ref) = common::brute_force_qp(&qp).unwrap();
    let p = plan(&x0, &b, &c, &l).unwrap();
    assert!(max_abs_diff(&p.u_traj, &x_ref[..3]) <= 1e-6);
    // QP objective omits the constant Σ‖mean‖²_Q, zero on a straight road.
    assert!((p.objective - obj_ref).abs() <= 1e-8);
    let d: Vec<f64> = p.x_traj.iter().map(|x| x[0]).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(d[3].abs() < d[0]);
}

#[test]
fn funnel_matches_enumeration_on_toy_instances() {
    let mut rng = StdRng::seed_from_u64(21);
    let c = cfg(Method::Funnel, 2);
    for _ in 0..6 {
        let l = lon(0.0, rng.random_range(10.0..30.0), 2);
        let mean: Vec<[f64; 4]> = (0..3).map(|_| [0.0, rng.random_range(-0.02..0.02), rng.random_range(-0.003..0.003), 0.0]).collect();
        let std: Vec<[f64; 4]> = (0..3).map(|i| [0.0, 0.004 * i as f64, 0.0, 0.0]).collect();
        let b = BeliefTrajectory::new(0, l.positions().to_vec(), mean, std).unwrap();
        let x0 = State::new(rng.random_range(-0.3..0.3), rng.random_range(-0.02..0.02), rng.random_range(-0.005..0.005), 0.0);
        let f = build_funnel(&b, 0.6).unwrap();
        let qp = build_funnel_qp(&x0, &b, &f, &c, &l).unwrap();
        let (x_ref, obj_ref) = common::brute_force_qp(&qp).unwrap();
        let sol = funnel_mpc::qp::solve(&qp, &c.qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.objective - obj_ref).abs() <= 1e-8 * (1.0 + obj_ref.abs()));
        assert!(max_abs_diff(&sol.x, &x_ref) <= 1e-6);
        let p = plan(&x0, &b, &c, &l).unwrap();
        assert!(max_abs_diff(&p.u_traj, &x_ref[..2]) <= 1e-6);
    }
}

#[test]
fn constant_curvature_is_reached_by_the_horizon_end() {
    let kappa = 0.004;
    let road = GroundTruthRoad::arc(kappa, 1000.0).unwrap();
    let l = lon(0.0, 16.7, 12);
    let b = BeliefTrajectory::ground_truth(&road, &l, 0).unwrap();
    let p = plan(&State::ZERO, &b, &cfg(Method::Cec, 12), &l).unwrap();
    assert!((p.x_traj[12][2] - kappa).abs() <= 1e-3, "{}", p.x_traj[12][2]);
}

#[test]
fn zero_mass_funnel_reproduces_cec() {
    for (id, seed) in [("tight-entry-curve", 1), ("highway", 2)] {
        let mut x = State::ZERO;
        for (b, l) in noisy_beliefs(id, seed, 40) {
            let cec = plan(&x, &b, &cfg(Method::Cec, 12), &l).unwrap();
            let fun = plan(&x, &b, &PlannerConfig { rho: 0.0, ..cfg(Method::Funnel, 12) }, &l).unwrap();
            assert!(max_abs_diff(&cec.u_traj, &fun.u_traj) <= 1e-6);
            x = State::from_array(cec.x_traj[1]);
        }
    }
}

#[test]
fn wide_funnel_around_the_free_motion_needs_no_input() {
    let l = lon(0.0, 20.0, 12);
    let b = BeliefTrajectory::new(0, l.positions().to_vec(), vec![[0.0; 4]; 13], vec![[1.0, 0.1, 0.01, 0.01]; 13]).unwrap();
    let x0 = State::new(0.0, 0.002, 0.0, 0.0);
    let p = plan(&x0, &b, &PlannerConfig { rho: 0.9, ..cfg(Method::Funnel, 12) }, &l).unwrap();
    assert!(p.u_traj.iter().all(|u| u.abs() < 1e-9));
    assert!(p.objective.abs() < 1e-12);
}

#[test]
fn idealized_and_cec_agree_on_exact_beliefs() {
    let sc = scenario::builtin("large-entry-curve").unwrap();
    let all = sc.longitudinal().unwrap();
    let x0 = State::new(0.1, 0.001, 0.0, 0.0);
    for k in [0, 40, 80] {
        let l = all.window(k, 12).unwrap();
        let b = BeliefTrajectory::ground_truth(&sc.road, &l, k).unwrap();
        let a = plan(&x0, &b, &cfg(Method::Cec, 12), &l).unwrap();
        let i = plan(&x0, &b, &cfg(Method::IdealizedCec, 12), &l).unwrap();
        assert_eq!(a, i);
    }
}

#[test]
fn plans_along_the_tight_curve_respect_their_invariants() {
    let c = cfg(Method::Funnel, 12);
    let mut x = State::ZERO;
    for (b, l) in noisy_beliefs("tight-entry-curve", 3, 300) {
        let p = plan(&x, &b, &c, &l).unwrap();
        assert!(p.dynamics_residual(&x, &b, &l).unwrap() <= 1e-8);
        assert!(p.x_traj.iter().all(|n| n[2].abs() <= c.sets.kappa_max() + 1e-9));
        assert!(p.u_traj.iter().all(|u| u.abs() <= c.sets.u_max() + 1e-9));
        let f = build_funnel(&b, c.rho).unwrap();
        let r = p.r_traj.as_ref().unwrap();
        for i in 0..=12 {
            for k in 0..4 {
                assert!((r[i][k] - b.mean[i][k]).abs() <= 0.5 * f.edges[i][k] + 1e-9);
            }
        }
        x = State::from_array(p.x_traj[1]);
    }
}

#[test]
fn objective_shrinks_as_the_funnel_widens() {
    let rhos = [0.0, 0.2, 0.4, 0.6, 0.8, 0.95];
    let mut x = State::new(0.05, 0.0, 0.0, 0.0);
    for (b, l) in noisy_beliefs("slow-traffic", 4, 120).into_iter().step_by(10) {
        let cec = plan(&x, &b, &cfg(Method::Cec, 12), &l).unwrap();
        // The CEC objective caps the chain: CEC is the zero-mass funnel.
        let mut prev = cec.objective;
        for rho in rhos {
            let p = plan(&x, &b, &PlannerConfig { rho, ..cfg(Method::Funnel, 12) }, &l).unwrap();
            assert!(p.objective <= prev + 1e-9 * (1.0 + prev));
            prev = p.objective;
        }
        x = State::from_array(cec.x_traj[1]);
    }
}

#[test]
fn optimal_references_are_clamped_states() {
    let c = cfg(Method::Funnel, 12);
    let mut x = State::new(0.2, -0.01, 0.0, 0.0);
    for (b, l) in noisy_beliefs("tight-entry-curve", 5, 60).into_iter().step_by(6) {
        let p = plan(&x, &b, &c, &l).unwrap();
        let f = build_funnel(&b, c.rho).unwrap();
        let r = p.r_traj.as_ref().unwrap();
        for i in 0..=12 {
            let (lo, hi) = (f.lower(i), f.upper(i));
            for k in 0..4 {
                assert!((r[i][k] - p.x_traj[i][k].clamp(lo[k], hi[k])).abs() <= 1e-7);
            }
        }
        let input: f64 = p.u_traj.iter().map(|u| c.r * u * u).sum();
        let dist = funnel_distance_sq(&p.x_traj, &f, &IDENTITY).unwrap();
        assert!((p.objective - (dist + input)).abs() <= 1e-9 * (1.0 + p.objective));
        x = State::from_array(p.x_traj[1]);
    }
}

#[test]
fn shifting_step_and_position_leaves_the_plan_unchanged() {
    let (b, l) = noisy_beliefs("highway", 6, 1).pop().unwrap();
    let shift = 250.0;
    let l2 = LongitudinalTrajectory::from_speeds(l.positions()[0] + shift, l.speeds().to_vec(), 0.5).unwrap();
    let b2 = BeliefTrajectory::new(b.k + 37, b.s.iter().map(|s| s + shift).collect(), b.mean.clone(), b.std.clone()).unwrap();
    let x0 = State::new(0.1, 0.002, 0.0005, 0.0);
    for method in [Method::Cec, Method::Funnel] {
        let a = plan(&x0, &b, &cfg(method, 12), &l).unwrap();
        let c = plan(&x0, &b2, &cfg(method, 12), &l2).unwrap();
        assert!(max_abs_diff(&a.u_traj, &c.u_traj) <= 1e-12);
    }
}
