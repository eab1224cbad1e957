//! The JSON verification report.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use unidist::site::Scenario;

use crate::catalog::CheckId;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub id: CheckId,
    pub anchor: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    pub detail: Value,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub digest: String,
    pub primes: usize,
    pub modulus: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub checks: Vec<CheckId>,
    pub window: Option<(i32, i32)>,
    pub seed: u64,
    pub strict: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: Tool,
    pub scenario: ScenarioInfo,
    pub run: RunInfo,
    pub summary: Summary,
    pub checks: Vec<CheckRecord>,
    pub wall_time_ms: u64,
}

/// SHA-256 of the scenario's canonical JSON form.
pub fn digest(sc: &Scenario) -> String {
    let canon = serde_json::to_vec(&sc.spec).expect("scenario serializes");
    let hash = Sha256::digest(&canon);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

impl Report {
    pub fn new(name: &str, sc: &Scenario, run: RunInfo, mut checks: Vec<CheckRecord>, wall_time_ms: u64) -> Report {
        checks.sort_by_key(|c| c.id);
        let mut summary = Summary::default();
        for c in &checks {
            match c.status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Skip => summary.skipped += 1,
            }
        }
        Report {
            schema: SCHEMA,
            tool: Tool { name: "unidist", version: env!("CARGO_PKG_VERSION"), core_version: unidist::VERSION },
            scenario: ScenarioInfo {
                name: name.to_string(),
                digest: digest(sc),
                primes: sc.num_primes(),
                modulus: sc.modulus,
            },
            run,
            summary,
            checks,
            wall_time_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// 0 when nothing failed; skips count as failures only when `strict`.
    pub fn exit_code(&self) -> i32 {
        let bad = self.summary.failed > 0 || (self.run.strict && self.summary.skipped > 0);
        i32::from(bad)
    }
}

/// The report text with every `"wall_time_ms"` value replaced by 0.
pub fn mask_timing(text: &str) -> String {
    const KEY: &str = "\"wall_time_ms\": ";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find(KEY) {
        out.push_str(&rest[..i + KEY.len()]);
        out.push('0');
        rest = rest[i + KEY.len()..].trim_start_matches(|c: char| c.is_ascii_digit());
    }
    out.push_str(rest);
    out
}
