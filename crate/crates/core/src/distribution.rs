//! The modules `A_z`, the relations `λ_z(x)`, the universal norm distribution
//! `U_z = A_z / D_z`, the submodule `I_x`, `γ_z(x)` and the exactness check.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::exactlin::{
    howell_form, inverse_unimodular, reduce_matrix, smith_normal_form, Howell, IntMatrix, Lattice, LinError,
};
use crate::site::{stalks, GroupElem, GroupRingElem, Mask, Scenario};

/// A stalk symbol `[g z']`: the group part is zero away from the stalk.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym {
    pub stalk: Mask,
    pub elem: GroupElem,
}

impl Sym {
    /// `[z']` with trivial group part.
    pub fn unit(sc: &Scenario, stalk: Mask) -> Sym {
        Sym { stalk, elem: sc.identity() }
    }

    /// Same symbol twisted by an element of H.
    pub fn with_h(mut self, sc: &Scenario, h: &[u64]) -> Sym {
        let k = sc.num_primes();
        self.elem[k..].copy_from_slice(h);
        self
    }

    /// `g · [g' z']`, where `g` acts through its restriction to `G_z'`.
    pub fn act(&self, sc: &Scenario, g: &[u64]) -> Sym {
        let orders = sc.group_orders();
        let k = sc.num_primes();
        let elem = (0..orders.len())
            .map(|i| if i < k && self.stalk & (1 << i) == 0 { 0 } else { (self.elem[i] + g[i]) % orders[i] })
            .collect();
        Sym { stalk: self.stalk, elem }
    }

    /// `[a z(x)]` for `x` not in the stalk.
    pub fn extend(&self, x: usize) -> Sym {
        debug_assert!(self.stalk & (1 << x) == 0);
        Sym { stalk: self.stalk | (1 << x), elem: self.elem.clone() }
    }

    /// `[a / z(x)]`, forgetting the `x` component.
    pub fn shrink(&self, x: usize) -> Sym {
        let mut elem = self.elem.clone();
        elem[x] = 0;
        Sym { stalk: self.stalk & !(1 << x), elem }
    }

    pub fn label(&self, sc: &Scenario) -> String {
        let k = sc.num_primes();
        let g: Vec<String> = sc.primes_in(self.stalk).into_iter().map(|i| self.elem[i].to_string()).collect();
        let h: Vec<String> = self.elem[k..].iter().map(|e| e.to_string()).collect();
        let mut s = String::new();
        if !g.is_empty() {
            s.push_str(&format!("g({})", g.join(",")));
        }
        if !h.is_empty() {
            s.push_str(&format!("h({})", h.join(",")));
        }
        format!("{s}[{}]", sc.mask_name(self.stalk))
    }
}

/// A finitely supported integer combination of stalk symbols.
pub type AVector = BTreeMap<Sym, BigInt>;

pub fn add_term(v: &mut AVector, s: Sym, c: BigInt) {
    if c.is_zero() {
        return;
    }
    let e = v.entry(s.clone()).or_insert_with(BigInt::zero);
    *e += c;
    if e.is_zero() {
        v.remove(&s);
    }
}

pub fn add_scaled(v: &mut AVector, w: &AVector, c: &BigInt) {
    for (s, x) in w {
        add_term(v, s.clone(), x * c);
    }
}

/// `r · [s]` for a group-ring element `r`.
pub fn act_ring(sc: &Scenario, r: &GroupRingElem, s: &Sym) -> AVector {
    let mut out = AVector::new();
    for (g, c) in r.terms() {
        add_term(&mut out, s.act(sc, g), c.clone());
    }
    out
}

pub fn act_ring_vec(sc: &Scenario, r: &GroupRingElem, v: &AVector) -> AVector {
    let mut out = AVector::new();
    for (s, c) in v {
        add_scaled(&mut out, &act_ring(sc, r, s), c);
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum DistError {
    #[error("prime index {0} does not divide the level")]
    PrimeNotInLevel(usize),
    #[error("symbol {0} lies outside the ambient level")]
    SymbolOutside(String),
    #[error("U is not certified free: elementary divisors {0}")]
    NotFree(String),
    #[error("{0} is not a stalk of {1}")]
    NotStalk(String, String),
    #[error(transparent)]
    Lin(#[from] LinError),
}

/// The Z-basis of `A_z`, ordered by stalk and then group exponents.
#[derive(Clone, Debug)]
pub struct ABasis {
    pub z: Mask,
    syms: Vec<Sym>,
    index: HashMap<Sym, usize>,
}

impl ABasis {
    pub fn new(sc: &Scenario, z: Mask) -> ABasis {
        let k = sc.num_primes();
        let mut syms = Vec::new();
        for st in stalks(z) {
            let orders: Vec<u64> = sc
                .group_orders()
                .iter()
                .enumerate()
                .map(|(i, &o)| if i < k && st & (1 << i) == 0 { 1 } else { o })
                .collect();
            for elem in crate::site::enumerate_product(&orders) {
                syms.push(Sym { stalk: st, elem });
            }
        }
        let index = syms.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        ABasis { z, syms, index }
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    pub fn syms(&self) -> &[Sym] {
        &self.syms
    }

    pub fn index_of(&self, s: &Sym) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn to_coords(&self, sc: &Scenario, v: &AVector) -> Result<Vec<BigInt>, DistError> {
        let mut out = vec![BigInt::zero(); self.len()];
        for (s, c) in v {
            let i = self.index_of(s).ok_or_else(|| DistError::SymbolOutside(s.label(sc)))?;
            out[i] += c;
        }
        Ok(out)
    }

    pub fn from_coords(&self, c: &[BigInt]) -> AVector {
        let mut v = AVector::new();
        for (s, x) in self.syms.iter().zip(c) {
            add_term(&mut v, s.clone(), x.clone());
        }
        v
    }
}

/// `λ_z(x)[s] = p(x;Fr_x^{-1})[s] - N_z(x)[s z(x)]` for `x` not in the stalk of `s`.
pub fn lambda(sc: &Scenario, x: usize, s: &Sym) -> AVector {
    if s.stalk & (1 << x) != 0 {
        return AVector::new();
    }
    let mut out = act_ring(sc, &sc.p_frob(x), s);
    add_scaled(&mut out, &act_ring(sc, &sc.norm_element(x), &s.extend(x)), &BigInt::from(-1));
    out
}

/// `β_z(x)[s] = r_x(Fr_x^{-1})[s / z(x)]` when `x` is in the stalk; the identity otherwise.
pub fn beta(sc: &Scenario, x: usize, s: &Sym) -> AVector {
    if s.stalk & (1 << x) == 0 {
        let mut out = AVector::new();
        add_term(&mut out, s.clone(), BigInt::one());
        return out;
    }
    act_ring(sc, &sc.r_frob(x), &s.shrink(x))
}

/// Matrix of a map `A_src -> A_tgt` (columns are sources).
pub fn map_matrix(
    sc: &Scenario,
    src: &ABasis,
    tgt: &ABasis,
    f: impl Fn(&Sym) -> AVector,
) -> Result<IntMatrix, DistError> {
    let mut m = IntMatrix::zeros(tgt.len(), src.len());
    for (j, s) in src.syms().iter().enumerate() {
        for (t, c) in f(s) {
            let i = tgt.index_of(&t).ok_or_else(|| DistError::SymbolOutside(t.label(sc)))?;
            m.add_to(i, j, &c);
        }
    }
    Ok(m)
}

fn require_prime(x: usize, z: Mask) -> Result<(), DistError> {
    if z & (1 << x) == 0 {
        Err(DistError::PrimeNotInLevel(x))
    } else {
        Ok(())
    }
}

/// `λ_z(x) : A_{z/z(x)} -> A_z`.
pub fn lambda_matrix(sc: &Scenario, x: usize, z: Mask) -> Result<IntMatrix, DistError> {
    require_prime(x, z)?;
    map_matrix(sc, &ABasis::new(sc, z & !(1 << x)), &ABasis::new(sc, z), |s| lambda(sc, x, s))
}

/// `β_z(x) : A_z -> A_{z/z(x)}`.
pub fn beta_matrix(sc: &Scenario, x: usize, z: Mask) -> Result<IntMatrix, DistError> {
    require_prime(x, z)?;
    map_matrix(sc, &ABasis::new(sc, z), &ABasis::new(sc, z & !(1 << x)), |s| beta(sc, x, s))
}

/// Multiplication by a group-ring element on `A_z`.
pub fn ring_matrix(sc: &Scenario, r: &GroupRingElem, basis: &ABasis) -> IntMatrix {
    map_matrix(sc, basis, basis, |s| act_ring(sc, r, s)).expect("group action preserves A_z")
}

/// `U_z = A_z / D_z` with a certified free basis.
///
/// Coordinates: `project(v) = (v C)[r..]` where `L R C` is the Smith form of
/// the relation matrix `R` of rank `r`; `section` is a right inverse.
#[derive(Clone, Debug)]
pub struct UPresentation {
    pub z: Mask,
    pub basis: ABasis,
    /// Rows generate `D_z` inside `A_z`.
    pub relations: IntMatrix,
    pub relation_rank: usize,
    /// Free rank of `U_z` over `Z`.
    pub rank: usize,
    pub elementary_divisors: Vec<BigInt>,
    proj: IntMatrix,
    sect: IntMatrix,
}

impl UPresentation {
    pub fn build(sc: &Scenario, z: Mask) -> Result<UPresentation, DistError> {
        let basis = ABasis::new(sc, z);
        let n = basis.len();
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for x in sc.primes_in(z) {
            let sub = ABasis::new(sc, z & !(1 << x));
            for s in sub.syms() {
                rows.push(basis.to_coords(sc, &lambda(sc, x, s))?);
            }
        }
        let relations = IntMatrix::from_dense(rows.len(), n, &rows);
        let snf = smith_normal_form(&relations);
        let divisors: Vec<BigInt> = snf.diag.iter().filter(|d| !d.is_zero()).cloned().collect();
        if divisors.iter().any(|d| !d.is_one()) {
            let shown: Vec<String> = divisors.iter().map(|d| d.to_string()).collect();
            return Err(DistError::NotFree(shown.join(",")));
        }
        let r = divisors.len();
        let c = snf.right;
        let cinv = inverse_unimodular(&c).expect("Smith transform is unimodular");
        let rank = n - r;
        let mut proj = IntMatrix::zeros(rank, n);
        let mut sect = IntMatrix::zeros(n, rank);
        for (&(i, j), v) in c.entries() {
            if j >= r {
                proj.set(j - r, i, v.clone());
            }
        }
        for (&(i, j), v) in cinv.entries() {
            if i >= r {
                sect.set(j, i - r, v.clone());
            }
        }
        Ok(UPresentation { z, basis, relations, relation_rank: r, rank, elementary_divisors: divisors, proj, sect })
    }

    pub fn rank_over_t(&self, sc: &Scenario) -> usize {
        self.rank / sc.h_size()
    }

    /// `rank x n` matrix of the quotient map `A_z -> U_z`.
    pub fn proj_matrix(&self) -> &IntMatrix {
        &self.proj
    }

    /// `n x rank` matrix of a section `U_z -> A_z`.
    pub fn sect_matrix(&self) -> &IntMatrix {
        &self.sect
    }

    pub fn project(&self, v: &[BigInt]) -> Vec<BigInt> {
        self.proj.mul_vec(v).expect("coordinate length")
    }

    pub fn project_avec(&self, sc: &Scenario, v: &AVector) -> Result<Vec<BigInt>, DistError> {
        Ok(self.project(&self.basis.to_coords(sc, v)?))
    }

    pub fn section(&self, u: &[BigInt]) -> Vec<BigInt> {
        self.sect.mul_vec(u).expect("coordinate length")
    }

    pub fn relation_lattice(&self) -> Lattice {
        Lattice::from_rows(&self.relations)
    }

    /// Action of a group-ring element on `U_z` coordinates.
    pub fn action(&self, sc: &Scenario, r: &GroupRingElem) -> IntMatrix {
        let a = ring_matrix(sc, r, &self.basis);
        self.proj.mul(&a).and_then(|m| m.mul(&self.sect)).expect("shapes agree")
    }
}

/// Matrix of `U_small -> U_big` induced by `A_small ⊂ A_big`.
pub fn include_u(sc: &Scenario, small: &UPresentation, big: &UPresentation) -> Result<IntMatrix, DistError> {
    if small.z & !big.z != 0 {
        return Err(DistError::NotStalk(sc.mask_name(small.z), sc.mask_name(big.z)));
    }
    let embed = map_matrix(sc, &small.basis, &big.basis, |s| {
        let mut v = AVector::new();
        add_term(&mut v, s.clone(), BigInt::one());
        v
    })?;
    Ok(big.proj.mul(&embed)?.mul(&small.sect)?)
}

/// `γ_z(x)` acting on `U_{z/z(x)}`.
pub fn gamma_matrix(sc: &Scenario, x: usize, small: &UPresentation) -> IntMatrix {
    small.action(sc, &sc.gamma(x))
}

/// Generators of `I_x` inside `A_z`, closed under the `T[G]`-action.
pub fn ix_generators(sc: &Scenario, x: usize, z: Mask) -> Vec<AVector> {
    let basis = ABasis::new(sc, z);
    let sigma = sc.sigma(x);
    let r = sc.r_frob(x);
    let mut gens = Vec::new();
    for s in basis.syms() {
        if s.stalk & (1 << x) != 0 {
            let mut v = AVector::new();
            add_term(&mut v, s.clone(), BigInt::one());
            add_term(&mut v, s.act(sc, &sigma), BigInt::from(-1));
            gens.push(v);
        } else {
            let mut v = act_ring(sc, &r, s);
            add_term(&mut v, s.extend(x), BigInt::from(-1));
            gens.push(v);
        }
    }
    gens
}

/// `I_x ⊂ U_z`, held as a Hermite lattice over `Z` and a Howell form mod `M`.
#[derive(Clone, Debug)]
pub struct IxSubmodule {
    pub x: usize,
    pub z: Mask,
    pub generators: Vec<AVector>,
    /// Generators in `U_z` coordinates, one per row.
    pub rows: IntMatrix,
    pub lattice: Lattice,
    pub howell: Howell,
}

pub fn build_ix(sc: &Scenario, x: usize, u: &UPresentation) -> Result<IxSubmodule, DistError> {
    require_prime(x, u.z)?;
    let generators = ix_generators(sc, x, u.z);
    let rows: Vec<Vec<BigInt>> = generators.iter().map(|g| u.project_avec(sc, g)).collect::<Result<_, _>>()?;
    let rows = IntMatrix::from_dense(rows.len(), u.rank, &rows);
    let lattice = Lattice::from_rows(&rows);
    let howell = howell_form(&reduce_matrix(&rows, sc.modulus));
    Ok(IxSubmodule { x, z: u.z, generators, rows, lattice, howell })
}

/// Outcome of the finite-level exactness check for one prime.
#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub prime: String,
    pub level: String,
    pub gamma_det: String,
    pub gamma_injective: bool,
    pub sigma_minus_one_in_ix: bool,
    pub surjective: bool,
    pub image_in_kernel: bool,
    pub ix_index: Option<String>,
    pub kernel_equals_image: bool,
    pub exact: bool,
    pub witness: Option<String>,
}

fn show(v: &[BigInt]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Checks `0 -> U' --γ--> U' -> U/I_x -> 0` with `U' = U_{z/z(x)}`.
pub fn check_exact_with(
    sc: &Scenario,
    x: usize,
    big: &UPresentation,
    small: &UPresentation,
) -> Result<ExactnessReport, DistError> {
    require_prime(x, big.z)?;
    let ix = build_ix(sc, x, big)?;
    let gamma = gamma_matrix(sc, x, small);
    let det = gamma.determinant()?;
    let gamma_injective = !det.is_zero();
    let mut witness = None;

    let sigma_m1 = big.action(sc, &GroupRingElem::monomial(sc.sigma(x)).sub(&GroupRingElem::monomial(sc.identity())));
    let mut sigma_minus_one_in_ix = true;
    for j in 0..big.rank {
        let col: Vec<BigInt> = (0..big.rank).map(|i| sigma_m1.get(i, j)).collect();
        if !ix.lattice.contains(&col) {
            sigma_minus_one_in_ix = false;
            witness.get_or_insert_with(|| format!("(sigma-1)e_{j} = {} not in I_x", show(&col)));
        }
    }

    let inc = include_u(sc, small, big)?;
    let combined = inc.transpose().vstack(&ix.rows)?;
    let surjective = Lattice::from_rows(&combined).index() == Some(BigInt::one());
    if !surjective {
        witness.get_or_insert_with(|| "U_{z/z(x)} + I_x is a proper sublattice of U_z".to_string());
    }

    let img = inc.mul(&gamma)?;
    let mut image_in_kernel = true;
    for j in 0..small.rank {
        let col: Vec<BigInt> = (0..big.rank).map(|i| img.get(i, j)).collect();
        if !ix.lattice.contains(&col) {
            image_in_kernel = false;
            witness.get_or_insert_with(|| format!("gamma e_{j} = {} not in I_x", show(&col)));
        }
    }
    let index = ix.lattice.index();
    let kernel_equals_image = gamma_injective && image_in_kernel && surjective && index.as_ref() == Some(&det.abs());
    if !kernel_equals_image && witness.is_none() {
        witness = Some(format!(
            "[U : I_x] = {} but |det gamma| = {}",
            index.as_ref().map_or("infinite".to_string(), |i| i.to_string()),
            det.abs()
        ));
    }
    let exact = gamma_injective && surjective && kernel_equals_image && sigma_minus_one_in_ix;
    Ok(ExactnessReport {
        prime: sc.primes[x].id.clone(),
        level: sc.mask_name(big.z),
        gamma_det: det.to_string(),
        gamma_injective,
        sigma_minus_one_in_ix,
        surjective,
        image_in_kernel,
        ix_index: index.map(|i| i.to_string()),
        kernel_equals_image,
        exact,
        witness,
    })
}

pub fn check_exact(sc: &Scenario, x: usize, z: Mask) -> Result<ExactnessReport, DistError> {
    require_prime(x, z)?;
    let big = UPresentation::build(sc, z)?;
    let small = UPresentation::build(sc, z & !(1 << x))?;
    check_exact_with(sc, x, &big, &small)
}

/// Kolyvagin condition 3 at the full level: `γ_z(x)` is injective on `U_{z/z(x)}`.
pub fn gamma_injective(sc: &Scenario, x: usize) -> Result<bool, DistError> {
    let small = UPresentation::build(sc, sc.full() & !(1 << x))?;
    Ok(!gamma_matrix(sc, x, &small).determinant()?.is_zero())
}
