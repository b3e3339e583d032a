//! Built-in synthetic scenarios.
//!
//! Each road starts straight and aligned with the vehicle. Perception noise
//! grows linearly with preview so the tangent-angle deviation reaches
//! [`HORIZON_END_THETA_STD`] at the nominal horizon end.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::closed_loop::{Scenario, SpeedProfile};
use crate::error::Result;
use crate::perception::PerceptionConfig;
use crate::planner::PlannerConfig;
use crate::road::{GroundTruthRoad, Segment};
use crate::vehicle::State;

pub const HORIZON_END_THETA_STD: f64 = 0.02;
pub const DEFAULT_STEPS: usize = 300;
pub const DEFAULT_TEMPORAL_CORR: f64 = 0.9;

pub const BUILTIN_IDS: [&str; 4] = ["tight-entry-curve", "large-entry-curve", "slow-traffic", "highway"];

/// Tangent-angle growth rate reaching the target deviation after one
/// horizon at `nominal_speed`.
pub fn calibrated_sigma_rate(planner: &PlannerConfig, nominal_speed: f64) -> f64 {
    HORIZON_END_THETA_STD / (planner.horizon as f64 * planner.ts * nominal_speed)
}

/// Curve entry and exit through clothoids of length `transition`.
fn curve(transition: f64, kappa: f64, arc: f64) -> [Segment; 3] {
    [Segment::transition(transition, 0.0, kappa), Segment::arc(arc, kappa), Segment::transition(transition, kappa, 0.0)]
}

fn assemble(id: &str, segments: Vec<Segment>, speed: SpeedProfile, nominal_speed: f64) -> Result<Scenario> {
    let planner = PlannerConfig::default();
    let view_range = 5.0 * libm::ceil((planner.horizon as f64 * planner.ts * speed.max() + 10.0) / 5.0);
    let perception = PerceptionConfig {
        sigma0: 0.0,
        sigma_rate: calibrated_sigma_rate(&planner, nominal_speed),
        temporal_corr: DEFAULT_TEMPORAL_CORR,
        seed: 0,
        view_range,
        spacing: 5.0,
        lateral_uncertainty: false,
    };
    let s = Scenario {
        id: id.to_string(),
        road: GroundTruthRoad::composite(0.0, segments)?,
        speed,
        s0: 0.0,
        initial_state: State::ZERO,
        steps: DEFAULT_STEPS,
        perception,
        planner,
    };
    s.validate()?;
    Ok(s)
}

fn tight_entry_curve() -> Result<Scenario> {
    let v = 16.7;
    let mut segs = vec![Segment::straight(150.0)];
    segs.extend(curve(60.0, 0.005, 120.0));
    segs.push(Segment::straight(250.0));
    segs.extend(curve(50.0, -0.004, 150.0));
    segs.push(Segment::straight(300.0));
    segs.extend(curve(60.0, 0.005, 100.0));
    segs.push(Segment::straight(1400.0));
    assemble("tight-entry-curve", segs, SpeedProfile::constant(v)?, v)
}

fn large_entry_curve() -> Result<Scenario> {
    let v = 22.2;
    let mut segs = vec![Segment::straight(200.0)];
    segs.extend(curve(100.0, 0.003, 400.0));
    segs.push(Segment::straight(400.0));
    segs.extend(curve(100.0, -0.0025, 300.0));
    segs.push(Segment::straight(2000.0));
    assemble("large-entry-curve", segs, SpeedProfile::constant(v)?, v)
}

fn slow_traffic() -> Result<Scenario> {
    let speed = SpeedProfile::new(vec![(0.0, 16.0), (30.0, 10.0), (60.0, 12.0), (90.0, 16.0), (120.0, 11.0), (150.0, 14.0)])?;
    let mut segs = vec![Segment::straight(200.0)];
    segs.extend(curve(100.0, 0.003, 400.0));
    segs.push(Segment::straight(300.0));
    segs.extend(curve(100.0, -0.0035, 300.0));
    segs.push(Segment::straight(1000.0));
    assemble("slow-traffic", segs, speed, 13.0)
}

fn highway() -> Result<Scenario> {
    let v = 33.3;
    let mut segs = vec![Segment::straight(400.0)];
    segs.extend(curve(150.0, 0.001, 1000.0));
    segs.push(Segment::straight(600.0));
    segs.extend(curve(150.0, -0.0012, 900.0));
    segs.push(Segment::straight(2000.0));
    assemble("highway", segs, SpeedProfile::constant(v)?, v)
}

pub fn builtin(id: &str) -> Option<Scenario> {
    let s = match id {
        "tight-entry-curve" => tight_entry_curve(),
        "large-entry-curve" => large_entry_curve(),
        "slow-traffic" => slow_traffic(),
        "highway" => highway(),
        _ => return None,
    };
    Some(s.expect("built-in scenarios are valid"))
}

pub fn builtins() -> Vec<Scenario> {
    BUILTIN_IDS.iter().map(|id| builtin(id).unwrap()).collect()
}
