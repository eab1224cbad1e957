//! One line per acceptance criterion; the test fails if any criterion does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use unidist::bundled;
use unidist::cohomology::h0_crosscheck;
use unidist::complex::{verify_anticommute, verify_resolution, KComplex};
use unidist::distribution::check_exact;
use unidist::eulermock::{verify_kolyvagin_recursion, verify_validated, MockError, MockModel};
use unidist::recursion::{
    verify_basis_theorem, verify_delta_agreement, verify_universal_recursion, Levels, RecursiveFamily,
};
use unidist::site::{stalks, Scenario};
use unidist_cli::report::mask_timing;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn all() -> Vec<(&'static str, Scenario)> {
    bundled::NAMES.iter().map(|&n| (n, bundled::scenario(n).unwrap())).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn families(sc: &Scenario, lv: &Levels) -> Vec<RecursiveFamily> {
    vec![RecursiveFamily::canonical(lv.top()), RecursiveFamily::kolyvagin(sc, lv.top()).unwrap()]
}

fn c1_differentials() -> Verdict {
    let mut notes = Vec::new();
    for (name, sc) in all() {
        let t = Instant::now();
        for z in stalks(sc.full()) {
            let r = verify_resolution(&sc, z).map_err(|e| e.to_string())?;
            ensure(r.d_squared_zero, || format!("{name} {}: d^2 != 0", r.level))?;
        }
        let (lo, hi) = KComplex::default_window(&sc, sc.full());
        let r = verify_anticommute(&sc, sc.full(), lo, hi).map_err(|e| e.to_string())?;
        ensure(r.ok && r.identities_checked > 0, || format!("{name}: {:?}", r.witness))?;
        let el = t.elapsed();
        ensure(el < Duration::from_secs(10), || format!("{name} took {el:?}"))?;
        notes.push(format!("{name} {} identities {} ms", r.identities_checked, el.as_millis()));
    }
    Ok(notes.join(", "))
}

fn c2_resolution() -> Verdict {
    let mut notes = Vec::new();
    for (name, sc) in all() {
        for z in stalks(sc.full()) {
            let r = verify_resolution(&sc, z).map_err(|e| e.to_string())?;
            ensure(r.acyclic.iter().all(|&(_, ok)| ok), || format!("{name} {}: {:?}", r.level, r.acyclic))?;
            ensure(r.h0_is_u && r.h0_rank == r.u_rank, || {
                format!("{name} {}: H^0 rank {} vs {}", r.level, r.h0_rank, r.u_rank)
            })?;
        }
        notes.push(format!("{name} rank {}", verify_resolution(&sc, sc.full()).unwrap().u_rank));
    }
    Ok(notes.join(", "))
}

fn c3_h0_counts() -> Verdict {
    let want = [("s1", 2), ("s2", 4), ("s3", 2), ("s4", 8)];
    let mut notes = Vec::new();
    for (name, r) in want {
        let sc = bundled::scenario(name).unwrap();
        // 2^(#primes) * rank(T/MT), rank(T/MT) = |H|
        ensure((1usize << sc.num_primes()) * sc.h_size() == r, || format!("{name}: formula"))?;
        let (lo, hi) = KComplex::default_window(&sc, sc.full());
        let rep = h0_crosscheck(&sc, sc.full(), lo, hi).map_err(|e| e.to_string())?;
        ensure(rep.direct_rank == Some(r) && rep.via_k_rank == Some(r), || format!("{name}: {rep:?}"))?;
        notes.push(format!("{name}={r}"));
    }
    Ok(notes.join(" "))
}

fn c4_exactness() -> Verdict {
    let mut n = 0;
    for (name, sc) in all() {
        for x in 0..sc.num_primes() {
            let r = check_exact(&sc, x, sc.full()).map_err(|e| e.to_string())?;
            ensure(r.gamma_injective && r.kernel_equals_image && r.surjective && r.exact, || {
                format!("{name} {}: {:?}", r.prime, r.witness)
            })?;
            n += 1;
        }
    }
    Ok(format!("{n} primes"))
}

fn c5_delta_agreement() -> Verdict {
    let mut n = 0;
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).map_err(|e| e.to_string())?;
        let r = verify_delta_agreement(&sc, &lv).map_err(|e| e.to_string())?;
        ensure(r.ok && r.well_defined, || format!("{name}: {:?}", r.failures))?;
        n += r.classes_checked;
    }
    Ok(format!("{n} classes"))
}

fn c6_universal_recursion() -> Verdict {
    let mut n = 0;
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).map_err(|e| e.to_string())?;
        for f in families(&sc, &lv) {
            let r = verify_universal_recursion(&sc, &lv, &f).map_err(|e| e.to_string())?;
            ensure(r.ok, || format!("{name} {}: {:?}", f.name, r.failures))?;
            n += r.identities_checked;
        }
    }
    Ok(format!("{n} identities, canonical and Kolyvagin families"))
}

fn c7_basis_theorems() -> Verdict {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).map_err(|e| e.to_string())?;
        for f in families(&sc, &lv) {
            let r = verify_basis_theorem(&sc, lv.top(), &f).map_err(|e| e.to_string())?;
            ensure(r.unitriangular && r.invertible, || format!("{name} {}: {:?}", f.name, r.failures))?;
        }
    }
    Ok("unitriangular and invertible on s1..s4".into())
}

fn c8_kolyvagin_recursion() -> Verdict {
    let mut n = 0;
    for (name, sc) in all() {
        let model = bundled::mock(name).unwrap();
        let lv = Levels::new(&sc, sc.full()).map_err(|e| e.to_string())?;
        for f in families(&sc, &lv) {
            let r = verify_validated(&sc, &lv.top().u, &model, &f).map_err(|e| e.to_string())?;
            ensure(r.ok, || format!("{name} {}: {:?}", f.name, r.failures))?;
            n += r.identities_checked;
        }
        // negative control: broken family
        let mut bad = RecursiveFamily::kolyvagin(&sc, lv.top()).unwrap();
        for v in bad.classes.get_mut(&1).unwrap().iter_mut() {
            *v = (*v * 2) % sc.modulus;
        }
        let r = verify_kolyvagin_recursion(&sc, &lv.top().u, &model, &bad).map_err(|e| e.to_string())?;
        ensure(!r.ok, || format!("{name}: broken family accepted"))?;
    }
    // negative control: broken mock
    let sc = bundled::scenario("s1").unwrap();
    let mut spec = bundled::mock("s1").unwrap().spec;
    for v in spec.dhat.get_mut("x1").unwrap().iter_mut().take(3) {
        *v = (*v + 1) % 3;
    }
    let model = MockModel::from_spec(&sc, spec).map_err(|e| e.to_string())?;
    let lv = Levels::new(&sc, sc.full()).map_err(|e| e.to_string())?;
    let rejected = matches!(
        verify_validated(&sc, &lv.top().u, &model, &RecursiveFamily::canonical(lv.top())),
        Err(MockError::Invalid(_))
    );
    ensure(rejected, || "broken mock passed validation".into())?;
    Ok(format!("{n} identities; broken mock and broken family rejected"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unidist"))
}

fn verify_to(dir: &std::path::Path, scenario: &str, file: &str, seed: &str) -> Result<String, String> {
    let out: PathBuf = dir.join(file);
    let o = bin().args(["verify", scenario, "--seed", seed, "--out"]).arg(&out).output().map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("{scenario}: exit {:?}", o.status.code()))?;
    std::fs::read_to_string(&out).map_err(|e| e.to_string())
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = verify_to(dir.path(), "s2", "a.json", "11")?;
    let b = verify_to(dir.path(), "s2", "b.json", "11")?;
    ensure(mask_timing(&a) == mask_timing(&b), || "reports differ outside timing fields".into())?;
    Ok(format!("{} bytes identical modulo wall_time_ms", a.len()))
}

/// Runs a full verify, returning wall time and peak resident memory in KiB.
#[cfg(target_os = "linux")]
fn measured_verify(scenario: &str) -> Result<(Duration, i64), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let child = bin()
        .args(["verify", scenario, "--out"])
        .arg(dir.path().join("r.json"))
        .stdout(std::process::Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut status = 0;
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let pid = unsafe { libc::wait4(child.id() as libc::pid_t, &mut status, 0, &mut usage) };
    let el = t.elapsed();
    ensure(pid > 0, || "wait4 failed".into())?;
    ensure(libc::WIFEXITED(status) && libc::WEXITSTATUS(status) == 0, || format!("{scenario}: status {status}"))?;
    Ok((el, usage.ru_maxrss))
}

#[cfg(target_os = "linux")]
fn c10_performance() -> Verdict {
    let (t2, m2) = measured_verify("s2")?;
    ensure(t2 < Duration::from_secs(60), || format!("s2 took {t2:?}"))?;
    ensure(m2 < 1 << 20, || format!("s2 peak {m2} KiB"))?;
    let (t4, m4) = measured_verify("s4")?;
    ensure(t4 < Duration::from_secs(300), || format!("s4 took {t4:?}"))?;
    Ok(format!("s2 {} ms / {} KiB, s4 {} ms / {} KiB", t2.as_millis(), m2, t4.as_millis(), m4))
}

#[cfg(not(target_os = "linux"))]
fn c10_performance() -> Verdict {
    Err("peak memory is only measured on Linux".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("differential soundness", c1_differentials),
        ("resolution ranks", c2_resolution),
        ("canonical basis count", c3_h0_counts),
        ("exactness", c4_exactness),
        ("delta agreement", c5_delta_agreement),
        ("universal Kolyvagin recursion", c6_universal_recursion),
        ("basis theorems", c7_basis_theorems),
        ("Kolyvagin recursion on mocks", c8_kolyvagin_recursion),
        ("determinism", c9_determinism),
        ("performance envelope", c10_performance),
    ];
    let mut failed = Vec::new();
    for (i, (label, f)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match v {
            Ok(note) => println!("criterion {:>2} PASS {label}: {note}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL {label}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
