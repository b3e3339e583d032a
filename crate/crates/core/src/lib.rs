#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod belief;
pub mod closed_loop;
pub mod error;
pub mod funnel;
mod linalg;
pub mod perception;
pub mod planner;
pub mod qp;
pub mod road;
pub mod scenario;
pub mod vehicle;

pub use belief::{resample, BeliefTrajectory, LongitudinalTrajectory};
pub use closed_loop::{run_closed_loop, ClMetrics, RunRecord, Scenario, SpeedProfile, StepRecord};
pub use error::{Error, Result};
pub use funnel::{build_funnel, funnel_distance_sq, gaussian_quantile, TargetFunnel, Weight};
pub use perception::{Perception, PerceptionConfig};
pub use planner::{build_cec_qp, build_funnel_qp, plan, Method, Plan, PlannerConfig};
pub use road::{GroundTruthRoad, RoadKind, Segment};
pub use vehicle::{build_dynamics, is_admissible, AdmissibleSets, DynamicsStep, Input, Reference, State};
