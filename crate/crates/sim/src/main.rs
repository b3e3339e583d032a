use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use funnel_mpc::{scenario, Method};
use funnel_mpc_sim::output::{self, fmt_f64, rho_label};
use funnel_mpc_sim::schema::{self, ScenarioFile};
use funnel_mpc_sim::{batch, emit_batch, parse_seeds, run_batch, run_one, BatchSpec, SimError, SimResult};

/// Log verbosity, in `env_logger` filter syntax.
const LOG_ENV: &str = "FUNNEL_SIM_LOG";

#[derive(Parser)]
#[command(name = "funnel-sim", version, about = "Closed-loop reprocessing of funnel and certainty-equivalent MPC")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario with one method and seed.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "funnel", value_parser = parse_method)]
        method: Method,
        /// Funnel mass fraction; defaults to the scenario's planner rho.
        #[arg(long)]
        rho: Option<f64>,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Run every scenario file in a directory over methods, seeds and rho values.
    Batch {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "cec,funnel,idealized-cec", value_parser = parse_method)]
        methods: Vec<Method>,
        /// `0..10` (end exclusive), `0..=9`, `3` or comma-separated mixes.
        #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long, value_delimiter = ',', default_value = "0.6")]
        rho_sweep: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check scenario files against the schema.
    Validate {
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
    },
    /// Write the built-in scenario library as scenario files.
    Builtins {
        #[arg(long)]
        out: PathBuf,
    },
}

type Seeds = Vec<u64>;

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_name(s).ok_or_else(|| format!("unknown method '{s}' (cec, funnel, idealized-cec)"))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match execute(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Cmd) -> SimResult<ExitCode> {
    match cmd {
        Cmd::Run { scenario, method, rho, seed, out, svg } => {
            let file = ScenarioFile::load(&scenario)?;
            let sc = file.to_scenario()?;
            let outcome = run_one(&sc, method, rho.unwrap_or(sc.planner.rho), seed.unwrap_or(file.seed));
            for p in output::emit_run(&outcome, &out, svg)? {
                println!("wrote {}", p.display());
            }
            match &outcome.result {
                Ok(rec) => {
                    println!(
                        "{} {method} seed {}: J^x = {}, J^u = {}{}",
                        sc.id,
                        outcome.seed,
                        fmt_f64(rec.metrics.deviation_cost),
                        fmt_f64(rec.metrics.input_cost),
                        if rec.truncated { " (truncated)" } else { "" }
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Cmd::Batch { scenarios, methods, seeds, rho_sweep, out, svg, jobs } => {
            let loaded = schema::load_dir(&scenarios)?;
            if loaded.is_empty() {
                return Err(SimError::Usage(format!("no scenario files in {}", scenarios.display())));
            }
            let spec = BatchSpec { scenarios: loaded.into_iter().map(|(_, s)| s).collect(), methods, seeds, rhos: rho_sweep, jobs };
            let outcomes = run_batch(&spec)?;
            let written = emit_batch(&outcomes, &out, svg)?;
            println!("wrote {} files under {}", written.len(), out.display());
            println!("{:<14} {:>6} {:>5} {:>14} {:>14} {:>12}", "method", "rho", "runs", "mean J^x", "mean J^u", "J^u red. %");
            let summary = batch::summarize(&outcomes);
            for r in &summary {
                println!(
                    "{:<14} {:>6} {:>5} {:>14} {:>14} {:>12}",
                    r.method.name(),
                    r.rho.map(rho_label).unwrap_or_else(|| "-".into()),
                    r.runs,
                    opt(r.mean_deviation),
                    opt(r.mean_input),
                    r.input_reduction_pct.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
                );
            }
            if let Some(t) = batch::rho_trend(&summary) {
                println!("funnel J^u over the rho sweep: {t}");
            }
            let failed: usize = summary.iter().map(|r| r.failed).sum();
            if failed > 0 {
                eprintln!("warning: {failed} run(s) failed; results are partial (status column of runs.csv)");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { scenario } => {
            let mut ok = true;
            for path in scenario {
                match ScenarioFile::load(&path).and_then(|f| f.to_scenario()) {
                    Ok(sc) => println!(
                        "ok: {} ({}, {} steps, road {:.1} m)",
                        path.display(),
                        sc.id,
                        sc.steps,
                        sc.road.length()
                    ),
                    Err(e) => {
                        ok = false;
                        eprintln!("invalid: {e}");
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Builtins { out } => {
            output::create_dir(&out)?;
            for sc in scenario::builtins() {
                let p = out.join(format!("{}.json", sc.id));
                output::write_text(&p, &ScenarioFile::from_scenario(&sc).to_json())?;
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
