//! Certainty-equivalent and target-funnel trajectory planners.
//!
//! Both planners solve one sparse QP per step with the nominal states as
//! explicit decision variables. Variables are laid out as
//! `u₀‥u_{N−1}`, `n₀‥n_N`, then (funnel only) the artificial references
//! `r₀‥r_N`, then (soft curvature bound only) the slack pairs.

use alloc::format;
use alloc::vec::Vec;

use crate::belief::{BeliefTrajectory, LongitudinalTrajectory};
use crate::error::{invalid, Error, Result};
use crate::funnel::{build_funnel, weighted_sq, TargetFunnel, Weight, IDENTITY};
use crate::linalg;
use crate::qp::{self, QpOptions, QpProblem, QpStatus};
use crate::vehicle::{build_dynamics, AdmissibleSets, State};

/// Penalty weight on curvature-bound violations when softening is enabled.
pub const KAPPA_SLACK_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cec,
    Funnel,
    /// CEC on the exact road; the caller supplies a ground-truth belief.
    IdealizedCec,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cec, Method::Funnel, Method::IdealizedCec];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cec => "cec",
            Method::Funnel => "funnel",
            Method::IdealizedCec => "idealized-cec",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub ts: f64,
    pub q: Weight,
    pub r: f64,
    pub rho: f64,
    pub sets: AdmissibleSets,
    pub method: Method,
    /// Replace the hard curvature bound by a heavily penalized slack.
    pub soft_kappa: bool,
    pub qp: QpOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            ts: 0.5,
            q: IDENTITY,
            r: 100.0,
            rho: 0.6,
            sets: AdmissibleSets::default(),
            method: Method::Funnel,
            soft_kappa: false,
            qp: QpOptions::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid!("horizon must be at least one step"));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(invalid!("sampling time must be positive, got {}", self.ts));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid!("input weight must be positive, got {}", self.r));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidRho(self.rho));
        }
        let q = &self.q;
        if q.iter().flatten().any(|v| !v.is_finite()) || (0..4).any(|i| (0..4).any(|j| (q[i][j] - q[j][i]).abs() > 1e-12)) {
            return Err(invalid!("state weight must be finite and symmetric"));
        }
        let flat: Vec<f64> = q.iter().flatten().copied().collect();
        let (eig, _) = linalg::symmetric_eigen(&flat, 4);
        let scale = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if eig.iter().any(|&e| e < -1e-12 * scale.max(1.0)) {
            return Err(invalid!("state weight must be positive semidefinite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub x_traj: Vec<[f64; 4]>,
    pub u_traj: Vec<f64>,
    /// Optimal artificial references; funnel method only.
    pub r_traj: Option<Vec<[f64; 4]>>,
    pub objective: f64,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct Layout {
    horizon: usize,
    funnel: bool,
    soft: bool,
}

impl Layout {
    fn u(&self, i: usize) -> usize {
        i
    }

    fn n(&self, i: usize, c: usize) -> usize {
        self.horizon + 4 * i + c
    }

    fn r(&self, i: usize, c: usize) -> usize {
        self.horizon + 4 * (self.horizon + 1) + 4 * i + c
    }

    fn slack_base(&self) -> usize {
        self.horizon + 4 * (self.horizon + 1) * if self.funnel { 2 } else { 1 }
    }

    /// Bounded part of the softened curvature.
    fn xi(&self, i: usize) -> usize {
        self.slack_base() + 2 * i
    }

    /// Penalized excess of the softened curvature.
    fn eps(&self, i: usize) -> usize {
        self.slack_base() + 2 * i + 1
    }

    fn vars(&self) -> usize {
        self.slack_base() + if self.soft { 2 * (self.horizon + 1) } else { 0 }
    }

    fn rows(&self) -> usize {
        4 * (self.horizon + 1) + if self.soft { self.horizon + 1 } else { 0 }
    }
}

fn check_shapes(belief: &BeliefTrajectory, cfg: &PlannerConfig, lon: &LongitudinalTrajectory) -> Result<()> {
    cfg.validate()?;
    belief.validate()?;
    if belief.horizon() != cfg.horizon || lon.steps() != cfg.horizon {
        return Err(Error::ShapeMismatch(format!(
            "horizon {} but belief covers {} and longitudinal motion {} steps",
            cfg.horizon,
            belief.horizon(),
            lon.steps()
        )));
    }
    if (lon.ts() - cfg.ts).abs() > 1e-12 {
        return Err(Error::ShapeMismatch(format!("sampling times differ: {} vs {}", lon.ts(), cfg.ts)));
    }
    Ok(())
}

fn build(x0: &State, belief: &BeliefTrajectory, funnel: Option<&TargetFunnel>, cfg: &PlannerConfig, lon: &LongitudinalTrajectory) -> Result<QpProblem> {
    check_shapes(belief, cfg, lon)?;
    if !x0.is_finite() {
        return Err(invalid!("initial state must be finite"));
    }
    let nh = cfg.horizon;
    let lay = Layout { horizon: nh, funnel: funnel.is_some(), soft: cfg.soft_kappa };
    let mut p = QpProblem::new(lay.vars(), lay.rows());
    let inf = f64::INFINITY;
    p.lb.iter_mut().for_each(|v| *v = -inf);
    p.ub.iter_mut().for_each(|v| *v = inf);
    let (kmax, umax) = (cfg.sets.kappa_max(), cfg.sets.u_max());

    for i in 0..nh {
        let u = lay.u(i);
        *p.h_mut(u, u) = 2.0 * cfg.r;
        p.lb[u] = -umax;
        p.ub[u] = umax;
    }

    for i in 0..=nh {
        for a in 0..4 {
            for b in 0..4 {
                let w = cfg.q[a][b] + cfg.q[b][a];
                *p.h_mut(lay.n(i, a), lay.n(i, b)) = w;
                if funnel.is_some() {
                    *p.h_mut(lay.r(i, a), lay.r(i, b)) = w;
                    *p.h_mut(lay.n(i, a), lay.r(i, b)) = -w;
                    *p.h_mut(lay.r(i, a), lay.n(i, b)) = -w;
                }
            }
        }
        match funnel {
            None => {
                let c = &belief.mean[i];
                for a in 0..4 {
                    p.g[lay.n(i, a)] = -(0..4).map(|b| (cfg.q[a][b] + cfg.q[b][a]) * c[b]).sum::<f64>();
                }
            }
            Some(f) => {
                let (lo, hi) = (f.lower(i), f.upper(i));
                for c in 0..4 {
                    p.lb[lay.r(i, c)] = lo[c];
                    p.ub[lay.r(i, c)] = hi[c];
                }
            }
        }
        if cfg.soft_kappa {
            let (xi, eps) = (lay.xi(i), lay.eps(i));
            p.lb[xi] = -kmax;
            p.ub[xi] = kmax;
            *p.h_mut(eps, eps) = 2.0 * KAPPA_SLACK_WEIGHT;
            let row = 4 * (nh + 1) + i;
            *p.a_mut(row, lay.n(i, 2)) = 1.0;
            *p.a_mut(row, xi) = -1.0;
            *p.a_mut(row, eps) = -1.0;
        } else {
            p.lb[lay.n(i, 2)] = -kmax;
            p.ub[lay.n(i, 2)] = kmax;
        }
    }

    let x0 = x0.to_array();
    for c in 0..4 {
        *p.a_mut(c, lay.n(0, c)) = 1.0;
        p.b_eq[c] = x0[c];
    }
    for i in 0..nh {
        let step = build_dynamics(lon.speeds()[i], cfg.ts)?;
        for c in 0..4 {
            let row = 4 * (i + 1) + c;
            *p.a_mut(row, lay.n(i + 1, c)) = 1.0;
            for b in 0..4 {
                *p.a_mut(row, lay.n(i, b)) -= step.a()[c][b];
            }
            *p.a_mut(row, lay.u(i)) = -step.b()[c];
            p.b_eq[row] = step.d()[c] * belief.mean[i][1];
        }
    }
    Ok(p)
}

/// QP tracking the belief mean.
pub fn build_cec_qp(x0: &State, belief: &BeliefTrajectory, cfg: &PlannerConfig, lon: &LongitudinalTrajectory) -> Result<QpProblem> {
    build(x0, belief, None, cfg, lon)
}

/// QP tracking the closest point of the funnel; `(N+1)·4` more variables
/// than the CEC problem.
pub fn build_funnel_qp(
    x0: &State,
    belief: &BeliefTrajectory,
    funnel: &TargetFunnel,
    cfg: &PlannerConfig,
    lon: &LongitudinalTrajectory,
) -> Result<QpProblem> {
    if funnel.center.len() != belief.mean.len() || funnel.edges.len() != belief.mean.len() {
        return Err(Error::ShapeMismatch(format!(
            "funnel has {} rows, belief {}",
            funnel.center.len(),
            belief.mean.len()
        )));
    }
    build(x0, belief, Some(funnel), cfg, lon)
}

fn failing_block(x0: &State, cfg: &PlannerConfig, status: QpStatus) -> &'static str {
    match status {
        QpStatus::MaxIterations => "solver iteration cap",
        QpStatus::Unbounded => "cost weights",
        _ if !cfg.soft_kappa && x0.kappa.abs() > cfg.sets.kappa_max() => "initial state vs curvature bound",
        _ => "dynamics vs curvature and input bounds",
    }
}

/// Plans from `x0` with the method in `cfg`. For the idealized baseline the
/// caller passes the ground-truth belief.
pub fn plan(x0: &State, belief: &BeliefTrajectory, cfg: &PlannerConfig, lon: &LongitudinalTrajectory) -> Result<Plan> {
    let funnel = match cfg.method {
        Method::Funnel => Some(build_funnel(belief, cfg.rho)?),
        Method::Cec | Method::IdealizedCec => None,
    };
    let p = match &funnel {
        Some(f) => build_funnel_qp(x0, belief, f, cfg, lon)?,
        None => build_cec_qp(x0, belief, cfg, lon)?,
    };
    let sol = qp::solve(&p, &cfg.qp)?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::PlannerFailed { status: sol.status, block: failing_block(x0, cfg, sol.status) });
    }

    let nh = cfg.horizon;
    let lay = Layout { horizon: nh, funnel: funnel.is_some(), soft: cfg.soft_kappa };
    let x_traj: Vec<[f64; 4]> = (0..=nh).map(|i| core::array::from_fn(|c| sol.x[lay.n(i, c)])).collect();
    let u_traj: Vec<f64> = (0..nh).map(|i| sol.x[lay.u(i)]).collect();
    let r_traj = funnel.is_some().then(|| (0..=nh).map(|i| core::array::from_fn(|c| sol.x[lay.r(i, c)])).collect::<Vec<[f64; 4]>>());

    let mut objective = cfg.r * u_traj.iter().map(|u| u * u).sum::<f64>();
    for (i, x) in x_traj.iter().enumerate() {
        let target = r_traj.as_ref().map_or(belief.mean[i], |r| r[i]);
        let e: [f64; 4] = core::array::from_fn(|c| x[c] - target[c]);
        objective += weighted_sq(&e, &cfg.q);
        if cfg.soft_kappa {
            objective += KAPPA_SLACK_WEIGHT * sol.x[lay.eps(i)] * sol.x[lay.eps(i)];
        }
    }
    Ok(Plan { x_traj, u_traj, r_traj, objective, status: sol.status, kkt_residual: sol.kkt_residual, iterations: sol.iterations })
}

impl Plan {
    /// Largest violation of the initial condition and of the nominal
    /// dynamics driven by the belief-mean tangent angle.
    pub fn dynamics_residual(&self, x0: &State, belief: &BeliefTrajectory, lon: &LongitudinalTrajectory) -> Result<f64> {
        let nh = self.u_traj.len();
        if self.x_traj.len() != nh + 1 || belief.mean.len() != nh + 1 || lon.steps() != nh {
            return Err(Error::ShapeMismatch(format!("plan of {nh} steps does not match its inputs")));
        }
        let x0 = x0.to_array();
        let mut res = (0..4).fold(0.0f64, |m, c| m.max((self.x_traj[0][c] - x0[c]).abs()));
        for i in 0..nh {
            let step = build_dynamics(lon.speeds()[i], lon.ts())?;
            let next = step.apply(self.x_traj[i], self.u_traj[i], belief.mean[i][1]);
            for c in 0..4 {
                res = res.max((self.x_traj[i + 1][c] - next[c]).abs());
            }
        }
        Ok(res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::GroundTruthRoad;
    use alloc::vec;

    fn lon(v: f64, n: usize) -> LongitudinalTrajectory {
        LongitudinalTrajectory::from_speeds(0.0, vec![v; n], 0.5).unwrap()
    }

    fn cfg(method: Method) -> PlannerConfig {
        PlannerConfig { method, ..PlannerConfig::default() }
    }

    fn straight_belief(n: usize) -> BeliefTrajectory {
        BeliefTrajectory::ground_truth(&GroundTruthRoad::straight(1000.0).unwrap(), &lon(20.0, n), 0).unwrap()
    }

    #[test]
    fn tracked_straight_road_needs_no_input() {
        for method in Method::ALL {
            let p = plan(&State::ZERO, &straight_belief(12), &cfg(method), &lon(20.0, 12)).unwrap();
            assert!(p.u_traj.iter().all(|u| u.abs() < 1e-9), "{method}");
            assert!(p.objective.abs() < 1e-12);
        }
    }

    #[test]
    fn funnel_adds_one_reference_per_state() {
        let b = straight_belief(12);
        let f = build_funnel(&b, 0.6).unwrap();
        let c = cfg(Method::Cec);
        let cec = build_cec_qp(&State::ZERO, &b, &c, &lon(20.0, 12)).unwrap();
        let fun = build_funnel_qp(&State::ZERO, &b, &f, &c, &lon(20.0, 12)).unwrap();
        assert_eq!(fun.n() - cec.n(), 13 * 4);
        assert_eq!(fun.m(), cec.m());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let b = straight_belief(10);
        assert!(matches!(plan(&State::ZERO, &b, &cfg(Method::Cec), &lon(20.0, 12)), Err(Error::ShapeMismatch(_))));
        let short = LongitudinalTrajectory::from_speeds(0.0, vec![20.0; 12], 0.25).unwrap();
        assert!(matches!(
            plan(&State::ZERO, &straight_belief(12), &cfg(Method::Cec), &short),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = [
            PlannerConfig { horizon: 0, ..PlannerConfig::default() },
            PlannerConfig { r: 0.0, ..PlannerConfig::default() },
            PlannerConfig { rho: 1.0, ..PlannerConfig::default() },
            PlannerConfig { q: [[1.0, 2.0, 0.0, 0.0], [2.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]], ..PlannerConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn infeasible_initial_curvature_names_the_block() {
        let x0 = State::new(0.0, 0.0, 0.05, 0.0);
        match plan(&x0, &straight_belief(12), &cfg(Method::Cec), &lon(20.0, 12)) {
            Err(Error::PlannerFailed { status: QpStatus::Infeasible, block }) => assert!(block.contains("initial")),
            other => panic!("{other:?}"),
        }
        let soft = PlannerConfig { soft_kappa: true, ..cfg(Method::Cec) };
        let p = plan(&x0, &straight_belief(12), &soft, &lon(20.0, 12)).unwrap();
        assert!((p.x_traj[0][2] - 0.05).abs() < 1e-9);
        assert!(p.u_traj.iter().all(|u| u.abs() <= 0.425 + 1e-9));
    }

    #[test]
    fn soft_bound_is_inactive_when_feasible() {
        let x0 = State::new(0.4, 0.0, 0.0, 0.0);
        let b = straight_belief(12);
        let hard = plan(&x0, &b, &cfg(Method::Funnel), &lon(20.0, 12)).unwrap();
        let soft = plan(&x0, &b, &PlannerConfig { soft_kappa: true, ..cfg(Method::Funnel) }, &lon(20.0, 12)).unwrap();
        for (a, b) in hard.u_traj.iter().zip(&soft.u_traj) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()), Some(m));
        }
        assert_eq!(Method::from_name("mpc"), None);
    }
}
