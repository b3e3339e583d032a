//! Scenario files, batch orchestration and CSV/SVG artifacts around the
//! `funnel-mpc` closed loop.

pub mod batch;
pub mod error;
pub mod output;
pub mod schema;
pub mod svg;

pub use batch::{emit_batch, run_batch, run_one, summarize, BatchSpec, Outcome, SummaryRow};
pub use error::{SimError, SimResult};
pub use schema::{ScenarioFile, SCHEMA_VERSION};

/// Parses seed lists such as `0..10` (end exclusive), `0..=9`, `7` or
/// comma-separated combinations of these.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed '{s}': {e}"));
        if let Some((a, b)) = part.split_once("..=") {
            seeds.extend(num(a)?..=num(b)?);
        } else if let Some((a, b)) = part.split_once("..") {
            seeds.extend(num(a)?..num(b)?);
        } else {
            seeds.push(num(part)?);
        }
    }
    if seeds.is_empty() {
        return Err(format!("seed range '{text}' is empty"));
    }
    Ok(seeds)
}
