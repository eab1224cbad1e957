//! `Δ_x` realized twice (diagonal shift on lifts, and the characterization
//! through `γ_z(x)` and `I_x`), Kolyvagin classes `c'_y`, and the checks of
//! the universal Kolyvagin recursion and the basis theorems.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::One;
use serde::Serialize;
use serde_json::Value;

use crate::cohomology::{act_h, is_fixed, CanonicalBasis, CohomologyError};
use crate::complex::{apply_shift, u_map, KComplex};
use crate::distribution::{act_ring, add_term, include_u, lambda_matrix, AVector, Sym, UPresentation};
use crate::exactlin::{howell_form, lift_vec, reduce_matrix, reduce_vec, solve_int, IntMatrix, ResMatrix};
use crate::site::{stalks, GroupRingElem, Mask, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RecursionError {
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error("decomposition of (σ - 1)a is unsolvable for {0}")]
    Unsolvable(String),
    #[error("Kolyvagin class for {0} is not fixed")]
    NotFixed(String),
    #[error("family: {0}")]
    Family(String),
}

impl From<crate::complex::ComplexError> for RecursionError {
    fn from(e: crate::complex::ComplexError) -> Self {
        RecursionError::Cohomology(e.into())
    }
}

impl From<crate::distribution::DistError> for RecursionError {
    fn from(e: crate::distribution::DistError) -> Self {
        RecursionError::Cohomology(e.into())
    }
}

impl From<crate::exactlin::LinError> for RecursionError {
    fn from(e: crate::exactlin::LinError) -> Self {
        RecursionError::Cohomology(e.into())
    }
}

/// Canonical bases at every stalk level of `z`.
#[derive(Clone, Debug)]
pub struct Levels {
    pub z: Mask,
    pub bases: BTreeMap<Mask, CanonicalBasis>,
}

impl Levels {
    pub fn new(sc: &Scenario, z: Mask) -> Result<Levels, RecursionError> {
        Self::with_window(sc, z, None)
    }

    /// `window = None` uses each level's default window.
    pub fn with_window(sc: &Scenario, z: Mask, window: Option<(i32, i32)>) -> Result<Levels, RecursionError> {
        let mut bases = BTreeMap::new();
        for zs in stalks(z) {
            let (lo, hi) = window.unwrap_or_else(|| KComplex::default_window(sc, zs));
            let k = KComplex::new(sc, zs, lo, hi);
            bases.insert(zs, CanonicalBasis::build_in(sc, &k, false)?);
        }
        Ok(Levels { z, bases })
    }

    pub fn top(&self) -> &CanonicalBasis {
        &self.bases[&self.z]
    }

    pub fn include(&self, sc: &Scenario, from: Mask, to: Mask, v: &[u64]) -> Result<Vec<u64>, RecursionError> {
        let inc = reduce_matrix(&include_u(sc, &self.bases[&from].u, &self.bases[&to].u)?, sc.modulus);
        Ok(inc.mul_vec(v)?)
    }

    /// `Δ_x` of a class at `level` via the diagonal shift of its lift; the
    /// result is a class at `level / z(x)`.
    pub fn delta_on_class(&self, sc: &Scenario, x: usize, level: Mask, v: &[u64]) -> Result<Vec<u64>, RecursionError> {
        let basis = &self.bases[&level];
        let low = level & !(1 << x);
        let coords = basis.coordinates(v)?;
        let lift = basis.lift_of(sc, &coords);
        let shifted = apply_shift(x, &lift);
        let zero_w = vec![0u32; sc.num_primes()];
        let a = u_map(&shifted).remove(&zero_w).unwrap_or_default();
        let u = &self.bases[&low].u;
        Ok(reduce_vec(&u.project_avec(sc, &a)?, sc.modulus))
    }
}

/// `Δ_x` from its characterization: solve `(σ - 1)𝐚 = M𝐛 + Σ λ_z(x')𝐛_x'`
/// over `Z` and return the class of `𝐛_x` in `U_{z/z(x)} / M`.
/// `permute` reverses the generator order, to test independence of the choice.
pub fn vardelta_characterized(
    sc: &Scenario,
    u: &UPresentation,
    low: &UPresentation,
    x: usize,
    a: &[u64],
    permute: bool,
) -> Result<Vec<u64>, RecursionError> {
    let m = sc.modulus;
    let z = u.z;
    let n = u.basis.len();
    let abold = u.section(&lift_vec(a));
    let s = GroupRingElem::monomial(sc.sigma(x)).sub(&GroupRingElem::monomial(sc.identity()));
    let rhs = crate::distribution::ring_matrix(sc, &s, &u.basis).mul_vec(&abold)?;
    let mut primes = sc.primes_in(z);
    if permute {
        primes.reverse();
    }
    let mut blocks: Vec<(Option<usize>, IntMatrix)> = Vec::new();
    let mut scaled = IntMatrix::identity(n);
    for i in 0..n {
        scaled.set(i, i, BigInt::from(m));
    }
    blocks.push((None, scaled));
    for &xp in &primes {
        blocks.push((Some(xp), lambda_matrix(sc, xp, z)?));
    }
    if permute {
        blocks.reverse();
    }
    let mut big = IntMatrix::zeros(n, 0);
    for (_, b) in &blocks {
        big = big.hstack(b)?;
    }
    let sol = solve_int(&big, &rhs)?.ok_or_else(|| RecursionError::Unsolvable(sc.mask_name(z)))?;
    let mut off = 0;
    for (tag, b) in &blocks {
        if *tag == Some(x) {
            let bx = &sol[off..off + b.cols()];
            return Ok(reduce_vec(&low.project(bx), m));
        }
        off += b.cols();
    }
    unreachable!("x is a prime of z")
}

/// `D_y = Π_{x|y} D_z(x)`.
pub fn kolyvagin_operator(sc: &Scenario, y: Mask) -> GroupRingElem {
    sc.primes_in(y)
        .into_iter()
        .fold(GroupRingElem::monomial(sc.identity()), |acc, x| acc.mul(&sc.kolyvagin_operator(x), sc))
}

/// `c'_y = D_y [z(y)]` in `U_z / M`, checked to be fixed.
pub fn kolyvagin_class(sc: &Scenario, u: &UPresentation, y: Mask) -> Result<Vec<u64>, RecursionError> {
    let a: AVector = act_ring(sc, &kolyvagin_operator(sc, y), &Sym::unit(sc, y));
    let v = reduce_vec(&u.project_avec(sc, &a)?, sc.modulus);
    if !is_fixed(sc, u, &v) {
        return Err(RecursionError::NotFixed(sc.mask_name(y)));
    }
    Ok(v)
}

/// A family `y -> c_y` of classes in `U_z / M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursiveFamily {
    pub name: String,
    pub z: Mask,
    pub classes: BTreeMap<Mask, Vec<u64>>,
}

impl RecursiveFamily {
    pub fn canonical(basis: &CanonicalBasis) -> RecursiveFamily {
        RecursiveFamily { name: "canonical".into(), z: basis.z, classes: basis.classes.clone() }
    }

    pub fn kolyvagin(sc: &Scenario, basis: &CanonicalBasis) -> Result<RecursiveFamily, RecursionError> {
        let classes = basis
            .ys
            .iter()
            .map(|&y| Ok((y, kolyvagin_class(sc, &basis.u, y)?)))
            .collect::<Result<_, RecursionError>>()?;
        Ok(RecursiveFamily { name: "kolyvagin".into(), z: basis.z, classes })
    }

    /// Parses `{"1": coords, "x1": coords, ...}` where `coords` lists one
    /// `T/MT` entry per canonical basis element (ordered by number of primes,
    /// then lexicographically). An entry is an integer or an array indexed by `H`.
    pub fn from_json(sc: &Scenario, basis: &CanonicalBasis, text: &str) -> Result<RecursiveFamily, RecursionError> {
        let v: Value = serde_json::from_str(text).map_err(|e| RecursionError::Family(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| RecursionError::Family("expected an object".into()))?;
        let nh = sc.h_size();
        let m = sc.modulus;
        let mut classes = BTreeMap::new();
        for (key, coords) in obj {
            let y = sc.parse_mask(key).map_err(|e| RecursionError::Family(e.to_string()))?;
            if y & !basis.z != 0 {
                return Err(RecursionError::Family(format!("{key} does not divide the level")));
            }
            let arr = coords.as_array().ok_or_else(|| RecursionError::Family(format!("{key}: expected an array")))?;
            if arr.len() != basis.ys.len() {
                return Err(RecursionError::Family(format!("{key}: expected {} coordinates", basis.ys.len())));
            }
            let mut t = BTreeMap::new();
            for (&yy, entry) in basis.ys.iter().zip(arr) {
                t.insert(
                    yy,
                    parse_t(entry, nh, m).ok_or_else(|| RecursionError::Family(format!("{key}: bad entry {entry}")))?,
                );
            }
            classes.insert(y, basis.combine(sc, &t));
        }
        for &y in &basis.ys {
            if !classes.contains_key(&y) {
                return Err(RecursionError::Family(format!("missing {}", sc.mask_name(y))));
            }
        }
        Ok(RecursiveFamily { name: "custom".into(), z: basis.z, classes })
    }
}

fn parse_t(v: &Value, nh: usize, m: u64) -> Option<Vec<u64>> {
    let red = |x: i64| x.rem_euclid(m as i64) as u64;
    if let Some(x) = v.as_i64() {
        let mut t = vec![0; nh];
        t[0] = red(x);
        return Some(t);
    }
    let arr = v.as_array()?;
    if arr.len() != nh {
        return None;
    }
    arr.iter().map(|e| e.as_i64().map(red)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    pub family: String,
    pub identities_checked: usize,
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Support constraint plus `Δ_x c_y = c_{y/x}` (`x | y`) and `Δ_x c_y = 0` (`x ∤ y`).
pub fn verify_universal_recursion(
    sc: &Scenario,
    levels: &Levels,
    f: &RecursiveFamily,
) -> Result<RecursionReport, RecursionError> {
    let z = f.z;
    let top = &levels.bases[&z];
    let mut failures = Vec::new();
    let mut checked = 0;
    for &y in &top.ys {
        let c = &f.classes[&y];
        let inc = reduce_matrix(&include_u(sc, &levels.bases[&y].u, &top.u)?, sc.modulus);
        checked += 1;
        if !howell_form(&inc.transpose()).contains(c) {
            failures.push(format!("c_{} is not supported at its own level", sc.mask_name(y)));
        }
        for x in sc.primes_in(z) {
            let d = levels.delta_on_class(sc, x, z, c)?;
            let got = levels.include(sc, z & !(1 << x), z, &d)?;
            let want = if y & (1 << x) != 0 { f.classes[&(y & !(1 << x))].clone() } else { vec![0; top.u.rank] };
            checked += 1;
            if got != want {
                failures.push(format!(
                    "Delta_{} c_{} = {:?}, expected {:?}",
                    sc.primes[x].id,
                    sc.mask_name(y),
                    got,
                    want
                ));
            }
        }
    }
    Ok(RecursionReport { family: f.name.clone(), identities_checked: checked, ok: failures.is_empty(), failures })
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    pub family: String,
    /// Row `y`, column `y'`: the `T/MT` coordinate of `c_y` on `c̄_{y'}`.
    pub change_of_basis: Vec<Vec<Vec<u64>>>,
    pub normalized: bool,
    pub unitriangular: bool,
    pub invertible: bool,
    pub ok: bool,
    pub failures: Vec<String>,
}

pub fn verify_basis_theorem(
    sc: &Scenario,
    basis: &CanonicalBasis,
    f: &RecursiveFamily,
) -> Result<BasisReport, RecursionError> {
    let m = sc.modulus;
    let nh = sc.h_size();
    let mut one = vec![0u64; nh];
    one[0] = 1;
    let zero = vec![0u64; nh];
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut unitriangular = true;
    for &y in &basis.ys {
        let coords = match basis.coordinates(&f.classes[&y]) {
            Ok(c) => c,
            Err(_) => {
                failures.push(format!("c_{} is not a fixed class", sc.mask_name(y)));
                unitriangular = false;
                rows.push(vec![zero.clone(); basis.ys.len()]);
                continue;
            }
        };
        for &yy in &basis.ys {
            let t = &coords[&yy];
            let good = if yy == y {
                *t == one
            } else if yy & !y == 0 {
                true
            } else {
                *t == zero
            };
            if !good {
                unitriangular = false;
                failures.push(format!("entry ({}, {}) = {:?}", sc.mask_name(y), sc.mask_name(yy), t));
            }
        }
        rows.push(basis.ys.iter().map(|yy| coords[yy].clone()).collect());
    }
    let normalized = f.classes[&0] == basis.classes[&0];
    if !normalized {
        failures.push("c_1 differs from the canonical c_1".into());
    }
    let mut vecs = Vec::new();
    for &y in &basis.ys {
        for h in &basis.h_elements {
            vecs.push(act_h(sc, &basis.u, h, &f.classes[&y]));
        }
    }
    let size = howell_form(&ResMatrix::from_dense(m, basis.u.rank, &vecs)).module_size();
    let invertible = size == BigUint::from(m).pow(vecs.len() as u32);
    if !invertible {
        failures.push(format!("family spans {size} elements"));
    }
    Ok(BasisReport {
        family: f.name.clone(),
        change_of_basis: rows,
        normalized,
        unitriangular,
        invertible,
        ok: normalized && unitriangular && invertible,
        failures,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    pub classes_checked: usize,
    pub well_defined: bool,
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Shift and characterization agree on every `h · c̄_y` and every prime.
pub fn verify_delta_agreement(sc: &Scenario, levels: &Levels) -> Result<AgreementReport, RecursionError> {
    let z = levels.z;
    let top = levels.top();
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut well_defined = true;
    for x in sc.primes_in(z) {
        let low = &levels.bases[&(z & !(1 << x))].u;
        for &y in &top.ys {
            for h in &top.h_elements {
                let v = act_h(sc, &top.u, h, &top.classes[&y]);
                let shift = levels.delta_on_class(sc, x, z, &v)?;
                let chr = vardelta_characterized(sc, &top.u, low, x, &v, false)?;
                let chr2 = vardelta_characterized(sc, &top.u, low, x, &v, true)?;
                checked += 1;
                if chr != chr2 {
                    well_defined = false;
                    failures.push(format!("characterization depends on generator order at c_{}", sc.mask_name(y)));
                }
                if shift != chr {
                    failures.push(format!(
                        "Delta_{} on h{:?} c_{}: shift {:?}, characterized {:?}",
                        sc.primes[x].id,
                        h,
                        sc.mask_name(y),
                        shift,
                        chr
                    ));
                }
            }
        }
    }
    Ok(AgreementReport { classes_checked: checked, well_defined, ok: failures.is_empty(), failures })
}

/// `(1 - σ) D_z(x) = N_z(x) - |G_z(x)|`.
pub fn kolyvagin_identity_holds(sc: &Scenario, x: usize) -> bool {
    let one = GroupRingElem::monomial(sc.identity());
    let lhs = one.sub(&GroupRingElem::monomial(sc.sigma(x))).mul(&sc.kolyvagin_operator(x), sc);
    let mut rhs = sc.norm_element(x);
    rhs.add_term(sc.identity(), -BigInt::from(sc.primes[x].order));
    lhs.sub(&rhs).is_zero()
}

/// The class of `[1]` in `U_z / M`.
pub fn unit_class(sc: &Scenario, u: &UPresentation) -> Result<Vec<u64>, RecursionError> {
    let mut a = AVector::new();
    add_term(&mut a, Sym::unit(sc, 0), BigInt::one());
    Ok(reduce_vec(&u.project_avec(sc, &a)?, sc.modulus))
}
