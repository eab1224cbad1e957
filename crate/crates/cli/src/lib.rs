//! Library side of the `unidist` command: check catalogue, runner and report.

pub mod catalog;
pub mod report;
pub mod runner;

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use unidist::bundled;
use unidist::site::Scenario;

pub use catalog::CheckId;
pub use report::Report;
pub use runner::{Input, Options};

/// Reads a scenario file, falling back to a bundled name (`s1`..`s4`).
pub fn read_scenario(arg: &str) -> Result<(String, String)> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.into());
        return Ok((name, text));
    }
    match bundled::scenario_json(arg) {
        Some(t) => Ok((arg.to_ascii_lowercase(), t.to_string())),
        None => bail!("no such file or bundled scenario: {arg}"),
    }
}

pub fn parse_window(s: &str) -> Result<(i32, i32)> {
    let (a, b) = s.split_once(':').context("window must be lo:hi")?;
    let lo: i32 = a.trim().parse().context("window lower bound")?;
    let hi: i32 = b.trim().parse().context("window upper bound")?;
    if lo > hi {
        bail!("empty window {lo}:{hi}");
    }
    Ok((lo, hi))
}

pub fn parse_checks(s: &str) -> Result<Vec<CheckId>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.parse().map_err(anyhow::Error::from)).collect()
}

/// Runs `verify` on an already parsed scenario and assembles the report.
pub fn verify(input: &Input, opts: &Options, strict: bool) -> Report {
    let start = Instant::now();
    let records = runner::run(input, opts);
    let mut checks = opts.checks.clone();
    checks.sort();
    checks.dedup();
    let run = report::RunInfo { checks, window: opts.window, seed: opts.seed, strict };
    Report::new(&input.name, &input.scenario, run, records, start.elapsed().as_millis() as u64)
}

/// Parses and validates a scenario; the error text names the violated condition.
pub fn validate(text: &str) -> Result<Scenario> {
    Ok(Scenario::from_json(text)?)
}
