//! Scenario definition files (JSON).
//!
//! Every file carries a mandatory `version`; readers reject versions they do
//! not know. Optional planner fields fall back to the defaults of
//! [`PlannerConfig`].

use std::path::Path;

use funnel_mpc::funnel::IDENTITY;
use funnel_mpc::qp::QpOptions;
use funnel_mpc::scenario::{DEFAULT_STEPS, DEFAULT_TEMPORAL_CORR};
use funnel_mpc::{
    AdmissibleSets, GroundTruthRoad, Method, PerceptionConfig, PlannerConfig, RoadKind, Scenario, Segment, SpeedProfile, State,
    Weight,
};
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub id: String,
    pub road: RoadSpec,
    pub speed: SpeedSpec,
    /// Arc length at step 0 (m).
    #[serde(default)]
    pub s0: f64,
    /// `[d, θ, κ, κ̇]` at step 0.
    #[serde(default)]
    pub initial_state: [f64; 4],
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub perception: PerceptionSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    /// Seed used when a run does not name one.
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RoadSpec {
    Straight {
        length: f64,
    },
    Arc {
        kappa: f64,
        length: f64,
    },
    /// Curvature `rate · s` from zero.
    Clothoid {
        rate: f64,
        length: f64,
    },
    ClothoidEntry {
        lead_in: f64,
        transition: f64,
        kappa: f64,
        arc_length: f64,
        run_out: f64,
    },
    Composite {
        #[serde(default)]
        theta0: f64,
        segments: Vec<SegmentSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SegmentSpec {
    Straight { length: f64 },
    Arc { length: f64, kappa: f64 },
    /// Curvature linear in arc length from `from` to `to`.
    Transition { length: f64, from: f64, to: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpeedSpec {
    Constant {
        v: f64,
    },
    /// `[t, v]` breakpoints, linear in between and held outside.
    Profile {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionSpec {
    pub sigma0: f64,
    pub sigma_rate: f64,
    #[serde(default = "default_temporal_corr")]
    pub temporal_corr: f64,
    pub view_range: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub lateral_uncertainty: bool,
}

fn default_temporal_corr() -> f64 {
    DEFAULT_TEMPORAL_CORR
}

fn default_spacing() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSpec {
    pub horizon: usize,
    pub ts: f64,
    pub q: Weight,
    pub r: f64,
    pub rho: f64,
    pub kappa_max: f64,
    pub u_max: f64,
    pub soft_kappa: bool,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let p = PlannerConfig::default();
        Self {
            horizon: p.horizon,
            ts: p.ts,
            q: IDENTITY,
            r: p.r,
            rho: p.rho,
            kappa_max: p.sets.kappa_max(),
            u_max: p.sets.u_max(),
            soft_kappa: p.soft_kappa,
            qp_tol: p.qp.tol,
            qp_max_iter: p.qp.max_iter,
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
        Self::from_json(&text).map_err(|source| SimError::Json { path: path.into(), source })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario files always serialize");
        s.push('\n');
        s
    }

    pub fn to_scenario(&self) -> SimResult<Scenario> {
        let schema = |message: String| SimError::Schema { id: self.id.clone(), message };
        if self.version != SCHEMA_VERSION {
            return Err(schema(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version)));
        }
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(schema("id must be nonempty ASCII letters, digits, '-' or '_'".into()));
        }
        let road = match &self.road {
            RoadSpec::Straight { length } => GroundTruthRoad::straight(*length),
            RoadSpec::Arc { kappa, length } => GroundTruthRoad::arc(*kappa, *length),
            RoadSpec::Clothoid { rate, length } => GroundTruthRoad::clothoid(*rate, *length),
            RoadSpec::ClothoidEntry { lead_in, transition, kappa, arc_length, run_out } => {
                GroundTruthRoad::clothoid_entry(*lead_in, *transition, *kappa, *arc_length, *run_out)
            }
            RoadSpec::Composite { theta0, segments } => GroundTruthRoad::composite(
                *theta0,
                segments
                    .iter()
                    .map(|s| match *s {
                        SegmentSpec::Straight { length } => Segment::straight(length),
                        SegmentSpec::Arc { length, kappa } => Segment::arc(length, kappa),
                        SegmentSpec::Transition { length, from, to } => Segment::transition(length, from, to),
                    })
                    .collect(),
            ),
        }?;
        let speed = match &self.speed {
            SpeedSpec::Constant { v } => SpeedProfile::constant(*v),
            SpeedSpec::Profile { points } => SpeedProfile::new(points.iter().map(|p| (p[0], p[1])).collect()),
        }?;
        let p = &self.perception;
        let perception = PerceptionConfig {
            sigma0: p.sigma0,
            sigma_rate: p.sigma_rate,
            temporal_corr: p.temporal_corr,
            seed: self.seed,
            view_range: p.view_range,
            spacing: p.spacing,
            lateral_uncertainty: p.lateral_uncertainty,
        };
        let q = &self.planner;
        let planner = PlannerConfig {
            horizon: q.horizon,
            ts: q.ts,
            q: q.q,
            r: q.r,
            rho: q.rho,
            sets: AdmissibleSets::new(q.kappa_max, q.u_max)?,
            method: Method::Funnel,
            soft_kappa: q.soft_kappa,
            qp: QpOptions { tol: q.qp_tol, max_iter: q.qp_max_iter, ..QpOptions::default() },
        };
        let sc = Scenario {
            id: self.id.clone(),
            road,
            speed,
            s0: self.s0,
            initial_state: State::from_array(self.initial_state),
            steps: self.steps,
            perception,
            planner,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_scenario(sc: &Scenario) -> Self {
        let segs = sc.road.segments();
        let road = match sc.road.kind() {
            RoadKind::Straight => RoadSpec::Straight { length: segs[0].length },
            RoadKind::Arc => RoadSpec::Arc { kappa: segs[0].kappa_start, length: segs[0].length },
            RoadKind::Clothoid => RoadSpec::Clothoid { rate: segs[0].kappa_end / segs[0].length, length: segs[0].length },
            RoadKind::ClothoidEntry => RoadSpec::ClothoidEntry {
                lead_in: segs[0].length,
                transition: segs[1].length,
                kappa: segs[2].kappa_start,
                arc_length: segs[2].length,
                run_out: segs[4].length,
            },
            RoadKind::Composite => RoadSpec::Composite {
                theta0: sc.road.theta0(),
                segments: segs
                    .iter()
                    .map(|s| match (s.kappa_start, s.kappa_end) {
                        (a, b) if a == 0.0 && b == 0.0 => SegmentSpec::Straight { length: s.length },
                        (a, b) if a == b => SegmentSpec::Arc { length: s.length, kappa: a },
                        (from, to) => SegmentSpec::Transition { length: s.length, from, to },
                    })
                    .collect(),
            },
        };
        let speed = match sc.speed.points() {
            [(_, v)] => SpeedSpec::Constant { v: *v },
            pts => SpeedSpec::Profile { points: pts.iter().map(|&(t, v)| [t, v]).collect() },
        };
        let p = &sc.perception;
        let q = &sc.planner;
        Self {
            version: SCHEMA_VERSION,
            id: sc.id.clone(),
            road,
            speed,
            s0: sc.s0,
            initial_state: sc.initial_state.to_array(),
            steps: sc.steps,
            perception: PerceptionSpec {
                sigma0: p.sigma0,
                sigma_rate: p.sigma_rate,
                temporal_corr: p.temporal_corr,
                view_range: p.view_range,
                spacing: p.spacing,
                lateral_uncertainty: p.lateral_uncertainty,
            },
            planner: PlannerSpec {
                horizon: q.horizon,
                ts: q.ts,
                q: q.q,
                r: q.r,
                rho: q.rho,
                kappa_max: q.sets.kappa_max(),
                u_max: q.sets.u_max(),
                soft_kappa: q.soft_kappa,
                qp_tol: q.qp.tol,
                qp_max_iter: q.qp.max_iter,
            },
            seed: p.seed,
        }
    }
}

/// Loads every `*.json` scenario in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> SimResult<Vec<(ScenarioFile, Scenario)>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(SimError::io(dir))? {
        let path = entry.map_err(SimError::io(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let file = ScenarioFile::load(&path)?;
        let sc = file.to_scenario().map_err(|e| SimError::Format { path: path.clone(), message: e.to_string() })?;
        out.push((file, sc));
    }
    let mut ids: Vec<&str> = out.iter().map(|(f, _)| f.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(SimError::Format { path: dir.into(), message: format!("duplicate scenario id {}", w[0]) });
    }
    Ok(out)
}
