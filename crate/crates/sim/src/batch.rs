//! Scenario × method × seed × ρ batches and their aggregate table.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use funnel_mpc::{run_closed_loop, Method, RunRecord, Scenario};
use rayon::prelude::*;

use crate::error::{SimError, SimResult};
use crate::output::{self, rho_label, run_stem};
use crate::svg;

/// One closed-loop cell. `rho` is `None` for the certainty-equivalent methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub scenario: String,
    pub method: Method,
    pub rho: Option<f64>,
    pub seed: u64,
    pub result: Result<RunRecord, String>,
}

impl Outcome {
    pub fn stem(&self) -> String {
        run_stem(&self.scenario, self.method, self.rho, self.seed)
    }
}

pub fn run_one(scenario: &Scenario, method: Method, rho: f64, seed: u64) -> Outcome {
    let result = run_closed_loop(scenario, method, rho, seed).map_err(|e| e.to_string());
    if let Err(e) = &result {
        log::error!("{} {method} seed {seed}: {e}", scenario.id);
    }
    Outcome {
        scenario: scenario.id.clone(),
        method,
        rho: (method == Method::Funnel).then_some(rho),
        seed,
        result,
    }
}

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub rhos: Vec<f64>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl BatchSpec {
    fn cells(&self) -> Vec<(usize, Method, Option<f64>, u64)> {
        let mut cells = Vec::new();
        for (i, _) in self.scenarios.iter().enumerate() {
            for &seed in &self.seeds {
                for &m in &self.methods {
                    if m == Method::Funnel {
                        cells.extend(self.rhos.iter().map(|&r| (i, m, Some(r), seed)));
                    } else {
                        cells.push((i, m, None, seed));
                    }
                }
            }
        }
        cells
    }
}

/// Runs every cell in parallel; output order is deterministic
/// (scenario, seed, method, ρ). Ground-truth runs do not depend on the seed
/// and are computed once per scenario.
pub fn run_batch(spec: &BatchSpec) -> SimResult<Vec<Outcome>> {
    if spec.scenarios.is_empty() || spec.methods.is_empty() || spec.seeds.is_empty() {
        return Err(SimError::Usage("batch needs at least one scenario, method and seed".into()));
    }
    if spec.methods.contains(&Method::Funnel) && spec.rhos.is_empty() {
        return Err(SimError::Usage("funnel runs need at least one rho".into()));
    }
    let cells = spec.cells();
    let first_seed = spec.seeds[0];
    let key = |c: &(usize, Method, Option<f64>, u64)| {
        let seed = if c.1 == Method::IdealizedCec { first_seed } else { c.3 };
        (c.0, c.1, c.2.map(f64::to_bits), seed)
    };
    let mut seen = std::collections::HashSet::new();
    let distinct: Vec<_> = cells.iter().copied().filter(|c| seen.insert(key(c))).collect();
    let work = || -> Vec<Outcome> {
        distinct
            .par_iter()
            .map(|&(i, m, rho, seed)| {
                let sc = &spec.scenarios[i];
                run_one(sc, m, rho.unwrap_or(sc.planner.rho), seed)
            })
            .collect()
    };
    let results = if spec.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| SimError::Usage(format!("thread pool: {e}")))?
            .install(work)
    };
    let by_key: HashMap<_, _> = distinct.iter().map(key).zip(results).collect();
    Ok(cells
        .iter()
        .map(|c| {
            let mut o = by_key[&key(c)].clone();
            o.seed = c.3;
            if let Ok(rec) = &mut o.result {
                rec.seed = c.3;
            }
            o
        })
        .collect())
}

/// Aggregate of one (method, ρ) group over scenarios × seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rho: Option<f64>,
    /// Successful runs entering the statistics.
    pub runs: usize,
    pub failed: usize,
    pub truncated: usize,
    pub mean_deviation: Option<f64>,
    /// Sample standard deviation; 0 for a single run.
    pub std_deviation: Option<f64>,
    pub mean_input: Option<f64>,
    pub std_input: Option<f64>,
    pub cov_deviation_input: Option<f64>,
    /// `100 (1 − J^u / J^u_cec)` on the group means.
    pub input_reduction_pct: Option<f64>,
    /// `100 (J^x / J^x_cec − 1)` on the group means.
    pub deviation_change_pct: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn covariance(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a)?, mean(b)?);
    if a.len() < 2 {
        return Some(0.0);
    }
    Some(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64)
}

/// Groups in first-appearance order of (method, ρ).
pub fn summarize(outcomes: &[Outcome]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, Option<f64>)> = Vec::new();
    for o in outcomes {
        if !keys.iter().any(|k| k.0 == o.method && k.1.map(f64::to_bits) == o.rho.map(f64::to_bits)) {
            keys.push((o.method, o.rho));
        }
    }
    let mut rows: Vec<SummaryRow> = keys
        .into_iter()
        .map(|(method, rho)| {
            let group: Vec<&Outcome> =
                outcomes.iter().filter(|o| o.method == method && o.rho.map(f64::to_bits) == rho.map(f64::to_bits)).collect();
            let ok: Vec<&RunRecord> = group.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            let jx: Vec<f64> = ok.iter().map(|r| r.metrics.deviation_cost).collect();
            let ju: Vec<f64> = ok.iter().map(|r| r.metrics.input_cost).collect();
            SummaryRow {
                method,
                rho,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                truncated: ok.iter().filter(|r| r.truncated).count(),
                mean_deviation: mean(&jx),
                std_deviation: covariance(&jx, &jx).map(f64::sqrt),
                mean_input: mean(&ju),
                std_input: covariance(&ju, &ju).map(f64::sqrt),
                cov_deviation_input: covariance(&jx, &ju),
                input_reduction_pct: None,
                deviation_change_pct: None,
            }
        })
        .collect();
    if let Some(base) = rows.iter().find(|r| r.method == Method::Cec).cloned() {
        for r in &mut rows {
            r.input_reduction_pct = r.mean_input.zip(base.mean_input).map(|(u, b)| 100.0 * (1.0 - u / b));
            r.deviation_change_pct = r.mean_deviation.zip(base.mean_deviation).map(|(x, b)| 100.0 * (x / b - 1.0));
        }
    }
    rows
}

/// Direction of the funnel input cost across the ρ sweep.
pub fn rho_trend(rows: &[SummaryRow]) -> Option<&'static str> {
    let mut pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.method == Method::Funnel).filter_map(|r| Some((r.rho?, r.mean_input?))).collect();
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let down = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    let up = pts.windows(2).all(|w| w[1].1 >= w[0].1);
    Some(match (down, up) {
        (true, true) => "constant",
        (true, false) => "non-increasing",
        (false, true) => "non-decreasing",
        _ => "non-monotone",
    })
}

/// Writes the batch artifacts under `out_dir`:
/// `summary.csv`, `runs.csv`, `ellipse.csv`, `runs/<stem>.csv` per successful
/// run and `overlays/` with one method overlay per scenario, seed and ρ.
pub fn emit_batch(outcomes: &[Outcome], out_dir: &Path, with_svg: bool) -> SimResult<Vec<PathBuf>> {
    output::create_dir(out_dir)?;
    let summary = summarize(outcomes);
    let mut written = Vec::new();
    let runs_dir = out_dir.join("runs");
    let overlay_dir = out_dir.join("overlays");
    if !outcomes.is_empty() {
        output::create_dir(&runs_dir)?;
        output::create_dir(&overlay_dir)?;
    }
    let mut trajectories = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        trajectories.push(match &o.result {
            Ok(rec) => {
                let name = format!("runs/{}.csv", o.stem());
                let p = out_dir.join(&name);
                output::write_trajectory(rec, &p)?;
                written.push(p);
                Some(name)
            }
            Err(_) => None,
        });
    }
    let p = out_dir.join("runs.csv");
    output::write_runs(outcomes, &trajectories, &p)?;
    written.push(p);
    let p = out_dir.join("summary.csv");
    output::write_summary(&summary, &p)?;
    written.push(p);
    let p = out_dir.join("ellipse.csv");
    output::write_ellipses(&summary, &p)?;
    written.push(p);
    if with_svg {
        let p = out_dir.join("summary.svg");
        output::write_text(&p, &svg::metric_scatter(outcomes, &summary))?;
        written.push(p);
    }

    // Overlays pair every funnel ρ with the ρ-free runs of the same cell.
    let mut groups: Vec<(String, u64, Option<f64>)> = Vec::new();
    for o in outcomes {
        let g = (o.scenario.clone(), o.seed, o.rho);
        if !groups.iter().any(|x| x.0 == g.0 && x.1 == g.1 && x.2.map(f64::to_bits) == g.2.map(f64::to_bits)) {
            groups.push(g);
        }
    }
    let has_funnel = outcomes.iter().any(|o| o.rho.is_some());
    for (scenario, seed, rho) in groups {
        if has_funnel && rho.is_none() {
            continue;
        }
        let members: Vec<(String, &RunRecord)> = outcomes
            .iter()
            .filter(|o| o.scenario == scenario && o.seed == seed && (o.rho.is_none() || o.rho == rho))
            .filter_map(|o| Some((o.method.name().replace('-', "_"), o.result.as_ref().ok()?)))
            .collect();
        if members.is_empty() {
            continue;
        }
        let stem = match rho {
            Some(r) => format!("overlay_{scenario}_rho{}_seed{seed}", rho_label(r)),
            None => format!("overlay_{scenario}_seed{seed}"),
        };
        let refs: Vec<(&str, &RunRecord)> = members.iter().map(|(l, r)| (l.as_str(), *r)).collect();
        let p = overlay_dir.join(format!("{stem}.csv"));
        output::write_overlay(&refs, &p)?;
        written.push(p);
        if with_svg {
            let p = overlay_dir.join(format!("{stem}.svg"));
            output::write_text(&p, &svg::run_panels(&stem, &refs))?;
            written.push(p);
        }
    }
    Ok(written)
}
