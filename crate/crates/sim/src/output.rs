//! CSV artifacts. Floats are written as `{:.16e}` (17 significant digits,
//! exact round trip), rows end in LF.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use funnel_mpc::{ClMetrics, Method, RunRecord, Weight};

use crate::batch::{Outcome, SummaryRow};
use crate::error::{SimError, SimResult};
use crate::svg;

pub const TRAJECTORY_HEADER: [&str; 30] = [
    "k",
    "s",
    "v",
    "d",
    "theta",
    "kappa",
    "kappa_dot",
    "u",
    "d_ref",
    "theta_ref",
    "kappa_ref",
    "kappa_dot_ref",
    "hw_d",
    "hw_theta",
    "hw_kappa",
    "hw_kappa_dot",
    "belief_end_d",
    "belief_end_theta",
    "belief_end_kappa",
    "belief_end_kappa_dot",
    "next_d",
    "next_theta",
    "next_kappa",
    "next_kappa_dot",
    "next_d_ref",
    "next_theta_ref",
    "next_kappa_ref",
    "next_kappa_dot_ref",
    "dynamics_residual",
    "qp_iterations",
];

pub const RUN_HEADER: [&str; 27] = [
    "scenario",
    "method",
    "rho",
    "seed",
    "status",
    "steps",
    "r",
    "q00",
    "q01",
    "q02",
    "q03",
    "q10",
    "q11",
    "q12",
    "q13",
    "q20",
    "q21",
    "q22",
    "q23",
    "q30",
    "q31",
    "q32",
    "q33",
    "deviation_cost",
    "input_cost",
    "error",
    "trajectory",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "method",
    "rho",
    "runs",
    "failed",
    "truncated",
    "mean_deviation_cost",
    "std_deviation_cost",
    "mean_input_cost",
    "std_input_cost",
    "cov_deviation_input",
    "input_cost_reduction_pct",
    "deviation_cost_change_pct",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// ρ as it appears in file names and grouping keys: shortest round-trip form.
pub fn rho_label(rho: f64) -> String {
    format!("{rho}")
}

pub fn run_stem(scenario: &str, method: Method, rho: Option<f64>, seed: u64) -> String {
    match rho {
        Some(rho) => format!("{scenario}_{method}_rho{}_seed{seed}", rho_label(rho)),
        None => format!("{scenario}_{method}_seed{seed}"),
    }
}

struct CsvOut {
    path: PathBuf,
    w: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    fn create(path: &Path) -> SimResult<Self> {
        let file = File::create(path).map_err(SimError::io(path))?;
        let w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file));
        Ok(Self { path: path.into(), w })
    }

    fn row<I, T>(&mut self, fields: I) -> SimResult<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(SimError::csv(&self.path))
    }

    fn finish(self) -> SimResult<()> {
        let path = self.path;
        let mut inner = self.w.into_inner().map_err(|e| SimError::Io { path: path.clone(), source: e.into_error() })?;
        inner.flush().map_err(SimError::io(path))
    }
}

pub fn write_trajectory(record: &RunRecord, path: &Path) -> SimResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(TRAJECTORY_HEADER)?;
    for st in &record.steps {
        let mut row = vec![st.k.to_string(), fmt_f64(st.s), fmt_f64(st.speed)];
        let floats = st
            .state
            .to_array()
            .into_iter()
            .chain([st.input])
            .chain(st.reference.to_array())
            .chain(st.funnel_end)
            .chain(st.belief_end)
            .chain(st.next_state.to_array())
            .chain(st.next_reference.to_array())
            .chain([st.dynamics_residual]);
        row.extend(floats.map(fmt_f64));
        row.push(st.qp_iterations.to_string());
        out.row(&row)?;
    }
    out.finish()
}

/// States, references and inputs read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    pub states: Vec<[f64; 4]>,
    pub references: Vec<[f64; 4]>,
    pub inputs: Vec<f64>,
}

pub fn read_trajectory(path: &Path) -> SimResult<TrajectoryData> {
    let bad = |message: String| SimError::Format { path: path.into(), message };
    let mut rd = csv::Reader::from_path(path).map_err(SimError::csv(path))?;
    let header = rd.headers().map_err(SimError::csv(path))?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(bad("unexpected trajectory header".into()));
    }
    let col = |name: &str| TRAJECTORY_HEADER.iter().position(|h| *h == name).unwrap();
    let (x0, r0, u0, nx0, nr0) = (col("d"), col("d_ref"), col("u"), col("next_d"), col("next_d_ref"));
    let mut data = TrajectoryData { states: Vec::new(), references: Vec::new(), inputs: Vec::new() };
    let mut last = None;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(SimError::csv(path))?;
        let num = |c: usize| -> SimResult<f64> {
            rec[c].parse::<f64>().map_err(|e| bad(format!("row {}: column {}: {e}", i + 1, TRAJECTORY_HEADER[c])))
        };
        let quad = |c: usize| -> SimResult<[f64; 4]> { Ok([num(c)?, num(c + 1)?, num(c + 2)?, num(c + 3)?]) };
        data.states.push(quad(x0)?);
        data.references.push(quad(r0)?);
        data.inputs.push(num(u0)?);
        last = Some((quad(nx0)?, quad(nr0)?));
    }
    let (xn, rn) = last.ok_or_else(|| bad("trajectory has no steps".into()))?;
    data.states.push(xn);
    data.references.push(rn);
    Ok(data)
}

/// Closed-loop costs from a trajectory CSV and the weights of its run row.
pub fn recompute_metrics(path: &Path, q: &Weight, r: f64) -> SimResult<ClMetrics> {
    let t = read_trajectory(path)?;
    Ok(ClMetrics::compute(&t.states, &t.references, &t.inputs, q, r)?)
}

fn run_row(o: &Outcome, trajectory: &str) -> Vec<String> {
    let mut row = vec![o.scenario.clone(), o.method.to_string(), o.rho.map(rho_label).unwrap_or_default(), o.seed.to_string()];
    match &o.result {
        Ok(rec) => {
            row.push(if rec.truncated { "truncated" } else { "ok" }.into());
            row.push(rec.steps.len().to_string());
            row.push(fmt_f64(rec.r));
            row.extend(rec.q.iter().flatten().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(rec.metrics.deviation_cost));
            row.push(fmt_f64(rec.metrics.input_cost));
            row.push(String::new());
            row.push(trajectory.into());
        }
        Err(e) => {
            row.push("failed".into());
            row.extend(std::iter::repeat_n(String::new(), 20));
            row.push(e.clone());
            row.push(String::new());
        }
    }
    row
}

pub fn write_runs(outcomes: &[Outcome], trajectories: &[Option<String>], path: &Path) -> SimResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(RUN_HEADER)?;
    for (o, t) in outcomes.iter().zip(trajectories) {
        out.row(run_row(o, t.as_deref().unwrap_or("")))?;
    }
    out.finish()
}

/// One parsed row of a runs CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub status: String,
    pub q: Weight,
    pub r: f64,
    pub deviation_cost: f64,
    pub input_cost: f64,
    pub trajectory: String,
}

/// Successful rows of a runs CSV; failed rows are skipped.
pub fn read_runs(path: &Path) -> SimResult<Vec<RunRow>> {
    let bad = |message: String| SimError::Format { path: path.into(), message };
    let mut rd = csv::Reader::from_path(path).map_err(SimError::csv(path))?;
    if rd.headers().map_err(SimError::csv(path))?.iter().ne(RUN_HEADER) {
        return Err(bad("unexpected runs header".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(SimError::csv(path))?;
        if &rec[4] == "failed" {
            continue;
        }
        let num = |c: usize| rec[c].parse::<f64>().map_err(|e| bad(format!("{}: {e}", RUN_HEADER[c])));
        let mut q = [[0.0; 4]; 4];
        for (i, row) in q.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = num(7 + 4 * i + j)?;
            }
        }
        rows.push(RunRow {
            scenario: rec[0].into(),
            method: rec[1].into(),
            seed: rec[3].parse().map_err(|e| bad(format!("seed: {e}")))?,
            status: rec[4].into(),
            q,
            r: num(6)?,
            deviation_cost: num(23)?,
            input_cost: num(24)?,
            trajectory: rec[26].into(),
        });
    }
    Ok(rows)
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> SimResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(SUMMARY_HEADER)?;
    for s in rows {
        out.row([
            s.method.to_string(),
            s.rho.map(rho_label).unwrap_or_default(),
            s.runs.to_string(),
            s.failed.to_string(),
            s.truncated.to_string(),
            fmt_opt(s.mean_deviation),
            fmt_opt(s.std_deviation),
            fmt_opt(s.mean_input),
            fmt_opt(s.std_input),
            fmt_opt(s.cov_deviation_input),
            fmt_opt(s.input_reduction_pct),
            fmt_opt(s.deviation_change_pct),
        ])?;
    }
    out.finish()
}

/// Points on the one-standard-deviation covariance ellipse of each group.
pub fn ellipse_points(s: &SummaryRow, count: usize) -> Option<Vec<[f64; 2]>> {
    let (mx, mu) = (s.mean_deviation?, s.mean_input?);
    let (sxx, suu, sxu) = (s.std_deviation?.powi(2), s.std_input?.powi(2), s.cov_deviation_input?);
    // Principal axes of [[sxx, sxu], [sxu, suu]].
    let half_tr = 0.5 * (sxx + suu);
    let disc = (0.25 * (sxx - suu).powi(2) + sxu * sxu).sqrt();
    let (l1, l2) = (half_tr + disc, (half_tr - disc).max(0.0));
    let phi = 0.5 * (2.0 * sxu).atan2(sxx - suu);
    let (a, b) = (l1.sqrt(), l2.sqrt());
    Some(
        (0..=count)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                let (ex, ey) = (a * t.cos(), b * t.sin());
                [mx + ex * phi.cos() - ey * phi.sin(), mu + ex * phi.sin() + ey * phi.cos()]
            })
            .collect(),
    )
}

pub fn write_ellipses(rows: &[SummaryRow], path: &Path) -> SimResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(["method", "rho", "i", "deviation_cost", "input_cost"])?;
    for s in rows {
        let Some(points) = ellipse_points(s, 64) else { continue };
        for (i, p) in points.iter().enumerate() {
            out.row([s.method.to_string(), s.rho.map(rho_label).unwrap_or_default(), i.to_string(), fmt_f64(p[0]), fmt_f64(p[1])])?;
        }
    }
    out.finish()
}

/// Side-by-side trajectories of several methods on one scenario and seed.
/// Rows follow the shortest run; road columns come from the first.
pub fn write_overlay(runs: &[(&str, &RunRecord)], path: &Path) -> SimResult<()> {
    let mut out = CsvOut::create(path)?;
    let mut header = vec!["k".to_string(), "s".into(), "theta_ref".into(), "kappa_ref".into()];
    for (label, _) in runs {
        for col in ["d", "theta", "kappa", "u", "belief_end_theta", "hw_theta"] {
            header.push(format!("{label}_{col}"));
        }
    }
    out.row(&header)?;
    let rows = runs.iter().map(|(_, r)| r.steps.len()).min().unwrap_or(0);
    for k in 0..rows {
        let base = &runs[0].1.steps[k];
        let mut row = vec![k.to_string(), fmt_f64(base.s), fmt_f64(base.reference.theta), fmt_f64(base.reference.kappa)];
        for (_, r) in runs {
            let st = &r.steps[k];
            for v in [st.state.d, st.state.theta, st.state.kappa, st.input, st.belief_end[1], st.funnel_end[1]] {
                row.push(fmt_f64(v));
            }
        }
        out.row(&row)?;
    }
    out.finish()
}

pub fn write_text(path: &Path, text: &str) -> SimResult<()> {
    std::fs::write(path, text).map_err(SimError::io(path))
}

pub fn create_dir(path: &Path) -> SimResult<()> {
    std::fs::create_dir_all(path).map_err(SimError::io(path))
}

/// Files of a single `run`: trajectory, one-row metrics table, optional SVG.
pub fn emit_run(outcome: &Outcome, out_dir: &Path, with_svg: bool) -> SimResult<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let stem = run_stem(&outcome.scenario, outcome.method, outcome.rho, outcome.seed);
    let mut written = Vec::new();
    let traj = match &outcome.result {
        Ok(rec) => {
            let p = out_dir.join(format!("{stem}.csv"));
            write_trajectory(rec, &p)?;
            written.push(p);
            Some(format!("{stem}.csv"))
        }
        Err(_) => None,
    };
    let p = out_dir.join(format!("{stem}_metrics.csv"));
    write_runs(std::slice::from_ref(outcome), &[traj], &p)?;
    written.push(p);
    if let (true, Ok(rec)) = (with_svg, &outcome.result) {
        let p = out_dir.join(format!("{stem}.svg"));
        write_text(&p, &svg::run_panels(&stem, &[(outcome.method.name(), rec)]))?;
        written.push(p);
    }
    Ok(written)
}
