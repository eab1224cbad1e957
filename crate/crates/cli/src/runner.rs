//! Runs the selected checks against one scenario.

use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use unidist::bundled;
use unidist::cohomology::{h0_crosscheck, CohomologyError};
use unidist::complex::{verify_anticommute, verify_resolution, ComplexError, KComplex};
use unidist::distribution::check_exact;
use unidist::eulermock::{generate_mock, verify_kolyvagin_recursion, MockModel};
use unidist::recursion::{
    verify_basis_theorem, verify_delta_agreement, verify_universal_recursion, Levels, RecursionError, RecursiveFamily,
};
use unidist::site::{stalks, Scenario};

use crate::catalog::CheckId;
use crate::report::{CheckRecord, Status};

/// A scenario as given on the command line.
pub struct Input {
    pub name: String,
    pub scenario: Scenario,
    /// Contents of `--family`, if any.
    pub family: Option<String>,
    /// Contents of `--mock`, if any.
    pub mock: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub checks: Vec<CheckId>,
    pub window: Option<(i32, i32)>,
    pub seed: u64,
    pub jobs: usize,
}

struct Outcome {
    status: Status,
    witness: Option<String>,
    detail: Value,
}

impl Outcome {
    fn judge(ok: bool, witness: impl FnOnce() -> String, detail: Value) -> Outcome {
        if ok {
            Outcome { status: Status::Pass, witness: None, detail }
        } else {
            Outcome { status: Status::Fail, witness: Some(witness()), detail }
        }
    }

    fn skip(reason: String) -> Outcome {
        Outcome { status: Status::Skip, witness: None, detail: json!({ "reason": reason }) }
    }

    fn error(msg: String) -> Outcome {
        Outcome { status: Status::Fail, witness: Some(msg), detail: Value::Null }
    }
}

fn window_complex(e: &ComplexError) -> bool {
    matches!(e, ComplexError::WindowExceeded(_))
}

fn window_cohomology(e: &CohomologyError) -> bool {
    matches!(e, CohomologyError::Complex(c) if window_complex(c))
}

fn window_recursion(e: &RecursionError) -> bool {
    matches!(e, RecursionError::Cohomology(c) if window_cohomology(c))
}

/// Work shared between checks, built on first use.
struct Shared<'a> {
    input: &'a Input,
    opts: &'a Options,
    levels: OnceLock<Result<Levels, (bool, String)>>,
}

impl Shared<'_> {
    fn sc(&self) -> &Scenario {
        &self.input.scenario
    }

    fn levels(&self) -> Result<&Levels, Outcome> {
        let r = self.levels.get_or_init(|| {
            Levels::with_window(self.sc(), self.sc().full(), self.opts.window)
                .map_err(|e| (window_recursion(&e), e.to_string()))
        });
        match r {
            Ok(l) => Ok(l),
            Err((true, msg)) => Err(Outcome::skip(msg.clone())),
            Err((false, msg)) => Err(Outcome::error(msg.clone())),
        }
    }

    fn families(&self, lv: &Levels) -> Result<Vec<RecursiveFamily>, Outcome> {
        let top = lv.top();
        let mut out = vec![RecursiveFamily::canonical(top)];
        out.push(RecursiveFamily::kolyvagin(self.sc(), top).map_err(|e| Outcome::error(e.to_string()))?);
        if let Some(text) = &self.input.family {
            let mut f = RecursiveFamily::from_json(self.sc(), top, text)
                .map_err(|e| Outcome::error(format!("family file: {e}")))?;
            f.name = "supplied".into();
            out.push(f);
        }
        Ok(out)
    }

    fn window_for(&self, z: u32) -> (i32, i32) {
        self.opts.window.unwrap_or_else(|| KComplex::default_window(self.sc(), z))
    }
}

pub fn run(input: &Input, opts: &Options) -> Vec<CheckRecord> {
    let mut ids = opts.checks.clone();
    ids.sort();
    ids.dedup();
    let shared = Shared { input, opts, levels: OnceLock::new() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build().expect("thread pool");
    pool.install(|| {
        ids.par_iter()
            .map(|&id| {
                let start = Instant::now();
                let o = run_one(&shared, id);
                let entry = id.entry();
                CheckRecord {
                    id,
                    anchor: entry.anchor.to_string(),
                    status: o.status,
                    witness: o.witness,
                    detail: o.detail,
                    wall_time_ms: start.elapsed().as_millis() as u64,
                }
            })
            .collect()
    })
}

fn run_one(s: &Shared, id: CheckId) -> Outcome {
    let r = match id {
        CheckId::Resolution => resolution(s),
        CheckId::Anticommute => anticommute(s),
        CheckId::H0Crosscheck => h0(s),
        CheckId::CanonicalBasis => canonical_basis(s),
        CheckId::Exactness => exactness(s),
        CheckId::DeltaAgreement => delta_agreement(s),
        CheckId::UniversalRecursion => universal_recursion(s),
        CheckId::BasisTheorem => basis_theorem(s),
        CheckId::EulerMock => euler_mock(s),
    };
    r.unwrap_or_else(|o| o)
}

type CheckResult = Result<Outcome, Outcome>;

fn resolution(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let mut rows = Vec::new();
    let mut bad = None;
    for z in stalks(sc.full()) {
        let r = verify_resolution(sc, z).map_err(|e| Outcome::error(e.to_string()))?;
        rows.push(json!({ "level": r.level, "h0_rank": r.h0_rank, "u_rank": r.u_rank, "ok": r.ok }));
        if !r.ok && bad.is_none() {
            bad = Some(format!("{}: {}", r.level, r.witness.unwrap_or_else(|| "H^0 differs from U".into())));
        }
    }
    Ok(Outcome::judge(bad.is_none(), || bad.clone().unwrap_or_default(), json!({ "levels": rows })))
}

fn anticommute(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let (lo, hi) = s.window_for(sc.full());
    match verify_anticommute(sc, sc.full(), lo, hi) {
        Ok(r) if r.identities_checked == 0 => {
            Ok(Outcome::skip(format!("window exceeded: no composable degrees in [{lo}, {hi}]")))
        }
        Ok(r) => Ok(Outcome::judge(
            r.ok,
            || r.witness.clone().unwrap_or_default(),
            json!({ "level": r.level, "window": [lo, hi], "identities": r.identities_checked }),
        )),
        Err(e) if window_complex(&e) => Ok(Outcome::skip(e.to_string())),
        Err(e) => Err(Outcome::error(e.to_string())),
    }
}

fn h0(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let mut rows = Vec::new();
    let mut bad = None;
    for z in stalks(sc.full()) {
        let (lo, hi) = s.window_for(z);
        let r = match h0_crosscheck(sc, z, lo, hi) {
            Ok(r) => r,
            Err(e) if window_cohomology(&e) => return Ok(Outcome::skip(e.to_string())),
            Err(e) => return Err(Outcome::error(e.to_string())),
        };
        rows.push(json!({
            "level": r.level,
            "expected": r.expected_rank,
            "direct": r.direct_rank,
            "via_k": r.via_k_rank,
            "via_bar": r.via_bar_rank,
        }));
        if !r.ok && bad.is_none() {
            bad = Some(format!(
                "{}: expected {}, direct {:?}, via K {:?}, via bar {:?}",
                r.level, r.expected_rank, r.direct_rank, r.via_k_rank, r.via_bar_rank
            ));
        }
    }
    Ok(Outcome::judge(bad.is_none(), || bad.clone().unwrap_or_default(), json!({ "levels": rows })))
}

fn canonical_basis(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let lv = s.levels()?;
    let mut rows = Vec::new();
    let mut bad = None;
    for (&z, b) in &lv.bases {
        let r = b.certify(sc);
        rows.push(json!({ "level": sc.mask_name(z), "classes": b.matrix.cols(), "ok": r.is_ok() }));
        if let Err(e) = r {
            bad.get_or_insert(format!("{}: {e}", sc.mask_name(z)));
        }
    }
    Ok(Outcome::judge(bad.is_none(), || bad.clone().unwrap_or_default(), json!({ "levels": rows })))
}

fn exactness(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let mut rows = Vec::new();
    let mut bad = None;
    for x in 0..sc.num_primes() {
        let r = check_exact(sc, x, sc.full()).map_err(|e| Outcome::error(e.to_string()))?;
        rows.push(json!({ "prime": r.prime, "gamma_det": r.gamma_det, "exact": r.exact }));
        if !r.exact && bad.is_none() {
            bad = Some(format!("{}: {}", r.prime, r.witness.unwrap_or_default()));
        }
    }
    Ok(Outcome::judge(bad.is_none(), || bad.clone().unwrap_or_default(), json!({ "primes": rows })))
}

fn delta_agreement(s: &Shared) -> CheckResult {
    let lv = s.levels()?;
    let r = verify_delta_agreement(s.sc(), lv).map_err(|e| Outcome::error(e.to_string()))?;
    Ok(Outcome::judge(
        r.ok,
        || r.failures.join("; "),
        json!({ "classes": r.classes_checked, "well_defined": r.well_defined }),
    ))
}

fn universal_recursion(s: &Shared) -> CheckResult {
    let lv = s.levels()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for f in s.families(lv)? {
        let r = verify_universal_recursion(s.sc(), lv, &f).map_err(|e| Outcome::error(e.to_string()))?;
        rows.push(json!({ "family": r.family, "identities": r.identities_checked, "ok": r.ok }));
        failures.extend(r.failures.iter().map(|m| format!("{}: {m}", r.family)));
    }
    Ok(Outcome::judge(failures.is_empty(), || failures.join("; "), json!({ "families": rows })))
}

fn basis_theorem(s: &Shared) -> CheckResult {
    let lv = s.levels()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for f in s.families(lv)? {
        let r = verify_basis_theorem(s.sc(), lv.top(), &f).map_err(|e| Outcome::error(e.to_string()))?;
        rows.push(json!({
            "family": r.family,
            "unitriangular": r.unitriangular,
            "invertible": r.invertible,
            "change_of_basis": r.change_of_basis,
        }));
        failures.extend(r.failures.iter().map(|m| format!("{}: {m}", r.family)));
        if !r.ok && r.failures.is_empty() {
            failures.push(format!("{}: not a basis", r.family));
        }
    }
    Ok(Outcome::judge(failures.is_empty(), || failures.join("; "), json!({ "families": rows })))
}

/// `--mock` if given, else the shipped mock when the scenario is a bundled
/// one, else a generated mock for `--seed`.
fn mock_model(s: &Shared) -> Result<(MockModel, &'static str), Outcome> {
    let sc = s.sc();
    if let Some(text) = &s.input.mock {
        return MockModel::from_json(sc, text).map(|m| (m, "supplied")).map_err(|e| Outcome::error(e.to_string()));
    }
    for name in bundled::NAMES {
        if bundled::scenario(name).is_some_and(|b| b.spec == sc.spec) {
            return Ok((bundled::mock(name).expect("bundled mock"), "bundled"));
        }
    }
    generate_mock(sc, &s.input.name, s.opts.seed)
        .map(|m| (m, "generated"))
        .ok_or_else(|| Outcome::skip("no model found".into()))
}

fn euler_mock(s: &Shared) -> CheckResult {
    let sc = s.sc();
    let (model, source) = mock_model(s)?;
    let v = model.validate(sc);
    let checks: Vec<Value> = v.checks.iter().map(|c| json!({ "name": c.name, "ok": c.ok })).collect();
    if !v.ok {
        let failed: Vec<String> = v
            .checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| format!("{}: {}", c.name, c.detail.clone().unwrap_or_default()))
            .collect();
        return Ok(Outcome::judge(
            false,
            || format!("mock rejected: {}", failed.join("; ")),
            json!({ "mock": source, "validation": checks }),
        ));
    }
    let lv = s.levels()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for f in s.families(lv)? {
        let r = verify_kolyvagin_recursion(sc, &lv.top().u, &model, &f).map_err(|e| Outcome::error(e.to_string()))?;
        rows.push(json!({ "family": r.family, "identities": r.identities_checked, "ok": r.ok }));
        failures.extend(r.failures.iter().map(|m| format!("{}: {m}", r.family)));
    }
    Ok(Outcome::judge(
        failures.is_empty(),
        || failures.join("; "),
        json!({ "mock": source, "validation": checks, "families": rows }),
    ))
}
