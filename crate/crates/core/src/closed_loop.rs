//! Closed-loop reprocessing: perceive, plan, advance, score.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::belief::{resample, BeliefTrajectory, LongitudinalTrajectory};
use crate::error::{invalid, Error, Result};
use crate::funnel::{build_funnel, weighted_sq, Weight};
use crate::perception::{Perception, PerceptionConfig};
use crate::planner::{plan, Method, PlannerConfig};
use crate::road::GroundTruthRoad;
use crate::vehicle::{Reference, State};

/// Piecewise-linear speed over time, held constant beyond the breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    points: Vec<(f64, f64)>,
}

impl SpeedProfile {
    /// Breakpoints `(t, v)` with strictly increasing `t`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid!("speed profile needs at least one breakpoint"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(invalid!("speed breakpoints must be finite with nonnegative speed"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid!("speed breakpoint times must increase strictly"));
        }
        Ok(Self { points })
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(alloc::vec![(0.0, v)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.points;
        let hi = pts.partition_point(|p| p.0 <= t);
        if hi == 0 {
            return pts[0].1;
        }
        if hi == pts.len() {
            return pts[hi - 1].1;
        }
        let (t0, v0) = pts[hi - 1];
        let (t1, v1) = pts[hi];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn max(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub road: GroundTruthRoad,
    pub speed: SpeedProfile,
    /// Arc length at step 0 (m).
    pub s0: f64,
    pub initial_state: State,
    /// Closed-loop iterations K.
    pub steps: usize,
    pub perception: PerceptionConfig,
    /// Weights, bounds and horizon; method and ρ are chosen per run.
    pub planner: PlannerConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.perception.validate()?;
        self.planner.validate()?;
        if self.steps == 0 {
            return Err(invalid!("scenario {} needs at least one step", self.id));
        }
        if !self.initial_state.is_finite() || !(self.s0 >= 0.0 && self.s0 < self.road.length()) {
            return Err(invalid!("scenario {} has a bad initial state or start position", self.id));
        }
        let span = self.planner.horizon as f64 * self.planner.ts * self.speed.max();
        if self.perception.view_range < span {
            return Err(invalid!(
                "scenario {}: view range {} m is shorter than the planning horizon span {span} m",
                self.id,
                self.perception.view_range
            ));
        }
        Ok(())
    }

    /// Longitudinal motion over all `K + N` steps a run may touch.
    pub fn longitudinal(&self) -> Result<LongitudinalTrajectory> {
        let ts = self.planner.ts;
        let speeds = (0..self.steps + self.planner.horizon).map(|j| self.speed.at(j as f64 * ts)).collect();
        LongitudinalTrajectory::from_speeds(self.s0, speeds, ts)
    }

    /// Same scenario with perception noise switched off.
    pub fn noiseless(&self) -> Self {
        let mut s = self.clone();
        s.perception.sigma0 = 0.0;
        s.perception.sigma_rate = 0.0;
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub s: f64,
    pub speed: f64,
    pub state: State,
    pub input: f64,
    pub reference: Reference,
    pub next_state: State,
    pub next_reference: Reference,
    /// Belief mean at the horizon end.
    pub belief_end: [f64; 4],
    /// Funnel half-widths at the horizon end; zero for the CEC methods.
    pub funnel_end: [f64; 4],
    pub dynamics_residual: f64,
    pub qp_iterations: usize,
}

/// Closed-loop deviation and input costs with their per-step terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClMetrics {
    /// `J^x = 1/(K+1) Σ_{k=0}^{K} ‖x_k − r_k‖²_Q`
    pub deviation_cost: f64,
    /// `J^u = 1/K Σ_{k=0}^{K−1} R u_k²`
    pub input_cost: f64,
    pub deviation_trace: Vec<f64>,
    pub input_trace: Vec<f64>,
}

impl ClMetrics {
    /// Scores `K+1` states against their references and `K` inputs.
    pub fn compute(states: &[[f64; 4]], references: &[[f64; 4]], inputs: &[f64], q: &Weight, r: f64) -> Result<Self> {
        if states.len() != references.len() || states.len() != inputs.len() + 1 {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} states, {} references and {} inputs",
                states.len(),
                references.len(),
                inputs.len()
            )));
        }
        let deviation_trace: Vec<f64> = states
            .iter()
            .zip(references)
            .map(|(x, rf)| weighted_sq(&core::array::from_fn(|c| x[c] - rf[c]), q))
            .collect();
        let input_trace: Vec<f64> = inputs.iter().map(|u| r * u * u).collect();
        let k = inputs.len();
        let deviation_cost = deviation_trace.iter().sum::<f64>() / (k + 1) as f64;
        let input_cost = if k == 0 { 0.0 } else { input_trace.iter().sum::<f64>() / k as f64 };
        Ok(Self { deviation_cost, input_cost, deviation_trace, input_trace })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario_id: String,
    pub method: Method,
    pub rho: f64,
    pub seed: u64,
    pub q: Weight,
    pub r: f64,
    pub steps: Vec<StepRecord>,
    pub metrics: ClMetrics,
    /// The road ended before all scheduled steps ran.
    pub truncated: bool,
}

impl RunRecord {
    pub fn states(&self) -> Vec<[f64; 4]> {
        let mut out: Vec<[f64; 4]> = self.steps.iter().map(|s| s.state.to_array()).collect();
        out.extend(self.steps.last().map(|s| s.next_state.to_array()));
        out
    }

    pub fn references(&self) -> Vec<[f64; 4]> {
        let mut out: Vec<[f64; 4]> = self.steps.iter().map(|s| s.reference.to_array()).collect();
        out.extend(self.steps.last().map(|s| s.next_reference.to_array()));
        out
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.input).collect()
    }
}

/// Runs the reprocessing loop for one (scenario, method, ρ, seed) cell.
///
/// Planner failures abort with the step index; running out of road
/// truncates the run with a warning.
pub fn run_closed_loop(scenario: &Scenario, method: Method, rho: f64, seed: u64) -> Result<RunRecord> {
    scenario.validate()?;
    let cfg = PlannerConfig { method, rho, ..scenario.planner };
    cfg.validate()?;
    let nh = cfg.horizon;
    let road = &scenario.road;
    let lon_all = scenario.longitudinal()?;
    let mut perception = Perception::new(PerceptionConfig { seed, ..scenario.perception })?;
    let view = scenario.perception.view_range;

    let mut x = scenario.initial_state;
    let mut reference = road.query(scenario.s0, lon_all.speed_at_index(0))?;
    let mut steps = Vec::with_capacity(scenario.steps);
    let mut truncated = false;
    for k in 0..scenario.steps {
        let s = lon_all.positions()[k];
        if s + view > road.length() || lon_all.positions()[k + nh] > road.length() {
            log::warn!("{}: road ends after {k} of {} steps, truncating", scenario.id, scenario.steps);
            truncated = true;
            break;
        }
        let at_step = |e: Error| Error::ClosedLoop { k, source: Box::new(e) };
        let lon = lon_all.window(k, nh)?;
        let belief = match method {
            Method::IdealizedCec => BeliefTrajectory::ground_truth(road, &lon, k),
            Method::Cec | Method::Funnel => perception.perceive(road, &lon).and_then(|b| resample(&b, &lon)),
        }
        .map_err(at_step)?;
        let p = plan(&x, &belief, &cfg, &lon).map_err(at_step)?;
        let funnel_end = match method {
            Method::Funnel => build_funnel(&belief, rho)?.half_widths(nh),
            _ => [0.0; 4],
        };
        let residual = p.dynamics_residual(&x, &belief, &lon)?;

        let next_state = State::from_array(p.x_traj[1]);
        let next_reference = road.query(lon_all.positions()[k + 1], lon_all.speed_at_index(k + 1))?;
        steps.push(StepRecord {
            k,
            s,
            speed: lon_all.speed_at_index(k),
            state: x,
            input: p.u_traj[0],
            reference,
            next_state,
            next_reference,
            belief_end: belief.mean[nh],
            funnel_end,
            dynamics_residual: residual,
            qp_iterations: p.iterations,
        });
        log::debug!("{} {method} k={k} u={:.3e} iters={}", scenario.id, p.u_traj[0], p.iterations);
        x = next_state;
        reference = next_reference;
    }

    let mut record = RunRecord {
        scenario_id: scenario.id.clone(),
        method,
        rho,
        seed,
        q: cfg.q,
        r: cfg.r,
        steps,
        metrics: ClMetrics { deviation_cost: 0.0, input_cost: 0.0, deviation_trace: Vec::new(), input_trace: Vec::new() },
        truncated,
    };
    record.metrics = if record.steps.is_empty() {
        ClMetrics::compute(&[x.to_array()], &[reference.to_array()], &[], &cfg.q, cfg.r)?
    } else {
        ClMetrics::compute(&record.states(), &record.references(), &record.inputs(), &cfg.q, cfg.r)?
    };
    Ok(record)
}
