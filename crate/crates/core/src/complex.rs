//! Anderson's resolution `L_z`, the double complex `K_z` truncated to a
//! total-degree window, the diagonal shift, the bar complex and the
//! projection onto `Q_z / M Q_z`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::distribution::{act_ring, lambda, ABasis, AVector, DistError, Sym, UPresentation};
use crate::exactlin::{
    howell_form, kernel_mod, rank, reduce_matrix, smith_normal_form, IntMatrix, Lattice, LinError, ResMatrix,
};
use crate::site::{omega, GroupRingElem, Mask, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum ComplexError {
    #[error("window exceeded: {0}")]
    WindowExceeded(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Lin(#[from] LinError),
}

/// Generator `[a, y]` of `L_z`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LSym {
    pub y: Mask,
    pub a: Sym,
}

/// Ordered basis with an index.
#[derive(Clone, Debug)]
pub struct Basis<S> {
    syms: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: Clone + Eq + std::hash::Hash + Ord> Basis<S> {
    pub fn new(mut syms: Vec<S>) -> Self {
        syms.sort();
        let index = syms.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Basis { syms, index }
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    pub fn syms(&self) -> &[S] {
        &self.syms
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }
}

fn push_lambda(sc: &Scenario, x: usize, a: &Sym, sign: i32, out: &mut Vec<(Sym, BigInt)>) {
    for (t, c) in lambda(sc, x, a) {
        out.push((t, c * sign));
    }
}

/// `d[a,y] = Σ_{x|y} ω(x,y) λ_z(x)(a) ⊗ [y/x]`.
pub fn d_l(sc: &Scenario, s: &LSym) -> Vec<(LSym, BigInt)> {
    let mut out = Vec::new();
    for x in sc.primes_in(s.y) {
        let mut terms = Vec::new();
        push_lambda(sc, x, &s.a, omega(x, s.y), &mut terms);
        out.extend(terms.into_iter().map(|(a, c)| (LSym { y: s.y & !(1 << x), a }, c)));
    }
    out
}

/// Anderson's resolution of `U_z`, degrees `-#primes(z) ..= 0`.
#[derive(Clone, Debug)]
pub struct LComplex {
    pub z: Mask,
    pub bases: BTreeMap<i32, Basis<LSym>>,
}

impl LComplex {
    pub fn new(sc: &Scenario, z: Mask) -> LComplex {
        let mut by_deg: BTreeMap<i32, Vec<LSym>> = BTreeMap::new();
        for y in crate::site::stalks(z) {
            let deg = -(y.count_ones() as i32);
            for a in ABasis::new(sc, z & !y).syms() {
                by_deg.entry(deg).or_default().push(LSym { y, a: a.clone() });
            }
        }
        LComplex { z, bases: by_deg.into_iter().map(|(d, v)| (d, Basis::new(v))).collect() }
    }

    pub fn min_degree(&self) -> i32 {
        -(self.z.count_ones() as i32)
    }

    /// `d : L^n -> L^{n+1}`.
    pub fn d_matrix(&self, sc: &Scenario, n: i32) -> IntMatrix {
        let src = &self.bases[&n];
        let tgt = &self.bases[&(n + 1)];
        let mut m = IntMatrix::zeros(tgt.len(), src.len());
        for (j, s) in src.syms().iter().enumerate() {
            for (t, c) in d_l(sc, s) {
                let i = tgt.index_of(&t).expect("d stays inside L_z");
                m.add_to(i, j, &c);
            }
        }
        m
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolutionReport {
    pub level: String,
    pub d_squared_zero: bool,
    /// `(n, H^n vanishes)` for every negative degree.
    pub acyclic: Vec<(i32, bool)>,
    pub h0_rank: usize,
    pub u_rank: usize,
    pub h0_is_u: bool,
    pub ok: bool,
    pub witness: Option<String>,
}

/// Checks that `L_z` resolves `U_z`: `d² = 0`, `H^n = 0` for `n < 0`, `H^0 = A_z / D_z`.
pub fn verify_resolution(sc: &Scenario, z: Mask) -> Result<ResolutionReport, ComplexError> {
    let l = LComplex::new(sc, z);
    let lo = l.min_degree();
    let mut witness = None;
    let mut d_squared_zero = true;
    let mats: BTreeMap<i32, IntMatrix> = (lo..0).map(|n| (n, l.d_matrix(sc, n))).collect();
    for n in lo..-1 {
        let dd = mats[&(n + 1)].mul(&mats[&n])?;
        if !dd.is_zero() {
            d_squared_zero = false;
            witness.get_or_insert_with(|| format!("d∘d nonzero from degree {n}"));
        }
    }
    let mut acyclic = Vec::new();
    for n in lo..0 {
        let dim = l.bases[&n].len();
        let out_rank = rank(&mats[&n]);
        let (in_rank, saturated) = match mats.get(&(n - 1)) {
            Some(m) => {
                let snf = smith_normal_form(m);
                (snf.rank(), snf.diag.iter().filter(|d| !d.is_zero()).all(|d| d.is_one()))
            }
            None => (0, true),
        };
        let ok = out_rank + in_rank == dim && saturated;
        if !ok {
            witness.get_or_insert_with(|| {
                format!("H^{n} nonzero: dim {dim}, rank d^n {out_rank}, rank d^(n-1) {in_rank}")
            });
        }
        acyclic.push((n, ok));
    }
    let u = UPresentation::build(sc, z)?;
    let dim0 = l.bases[&0].len();
    let (h0_rank, h0_is_u) = match mats.get(&-1) {
        Some(m) => {
            let image = Lattice::from_rows(&m.transpose());
            (dim0 - image.rank(), image == u.relation_lattice())
        }
        None => (dim0, u.relation_rank == 0),
    };
    if !h0_is_u || h0_rank != u.rank {
        witness.get_or_insert_with(|| format!("H^0 rank {h0_rank} vs U rank {}", u.rank));
    }
    let ok = d_squared_zero && acyclic.iter().all(|(_, b)| *b) && h0_is_u && h0_rank == u.rank;
    Ok(ResolutionReport {
        level: sc.mask_name(z),
        d_squared_zero,
        acyclic,
        h0_rank,
        u_rank: u.rank,
        h0_is_u,
        ok,
        witness,
    })
}

/// Generator `[a, y, w]` of `K_z`; `w` holds one exponent per prime.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KSym {
    pub y: Mask,
    pub w: Vec<u32>,
    pub a: Sym,
}

impl KSym {
    pub fn deg_w(&self) -> i32 {
        self.w.iter().sum::<u32>() as i32
    }

    pub fn total_degree(&self) -> i32 {
        self.deg_w() - self.y.count_ones() as i32
    }

    pub fn label(&self, sc: &Scenario) -> String {
        let w: Vec<String> = self
            .w
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { sc.primes[i].id.clone() } else { format!("{}^{e}", sc.primes[i].id) })
            .collect();
        let w = if w.is_empty() { "1".to_string() } else { w.join("*") };
        format!("[{}, {}, {}]", self.a.label(sc), sc.mask_name(self.y), w)
    }
}

pub type KChain = BTreeMap<KSym, BigInt>;

pub fn chain_add(c: &mut KChain, s: KSym, v: BigInt) {
    if v.is_zero() {
        return;
    }
    let e = c.entry(s.clone()).or_insert_with(BigInt::zero);
    *e += v;
    if e.is_zero() {
        c.remove(&s);
    }
}

fn w_sign(w: &[u32], x: usize) -> i32 {
    if w[..x].iter().sum::<u32>() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `d_x[a,y,w]`.
pub fn d_x(sc: &Scenario, x: usize, s: &KSym) -> Vec<(KSym, BigInt)> {
    if s.y & (1 << x) == 0 {
        return Vec::new();
    }
    let sign = omega(x, s.y) * w_sign(&s.w, x);
    let mut terms = Vec::new();
    push_lambda(sc, x, &s.a, sign, &mut terms);
    let y = s.y & !(1 << x);
    terms.into_iter().map(|(a, c)| (KSym { y, w: s.w.clone(), a }, c)).collect()
}

/// `a_z(x)`: `1 - σ` when `v_x(w)` is even, `N` when odd.
pub fn a_element(sc: &Scenario, x: usize, vx: u32) -> GroupRingElem {
    if vx.is_multiple_of(2) {
        GroupRingElem::monomial(sc.identity()).sub(&GroupRingElem::monomial(sc.sigma(x)))
    } else {
        sc.norm_element(x)
    }
}

/// `δ_x[a,y,w]`.
pub fn delta_x(sc: &Scenario, x: usize, s: &KSym) -> Vec<(KSym, BigInt)> {
    let y_le = (s.y & ((2u32 << x) - 1)).count_ones();
    let sign = if y_le.is_multiple_of(2) { 1 } else { -1 } * w_sign(&s.w, x);
    let mut w = s.w.clone();
    w[x] += 1;
    act_ring(sc, &a_element(sc, x, s.w[x]), &s.a)
        .into_iter()
        .map(|(a, c)| (KSym { y: s.y, w: w.clone(), a }, c * sign))
        .collect()
}

/// The diagonal shift `Δ_x`, of bidegree `(1,-1)`.
pub fn diagonal_shift(x: usize, s: &KSym) -> Option<KSym> {
    if s.y & (1 << x) == 0 || s.w[x] == 0 {
        return None;
    }
    let mut w = s.w.clone();
    w[x] -= 1;
    Some(KSym { y: s.y & !(1 << x), w, a: s.a.clone() })
}

pub fn apply_shift(x: usize, c: &KChain) -> KChain {
    let mut out = KChain::new();
    for (s, v) in c {
        if let Some(t) = diagonal_shift(x, s) {
            chain_add(&mut out, t, v.clone());
        }
    }
    out
}

/// One of the differentials in the family `{d_x} ∪ {δ_x}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Op {
    D(usize),
    Delta(usize),
    Shift(usize),
}

impl Op {
    pub fn degree(self) -> i32 {
        match self {
            Op::D(_) | Op::Delta(_) => 1,
            Op::Shift(_) => 0,
        }
    }

    pub fn apply(self, sc: &Scenario, s: &KSym) -> Vec<(KSym, BigInt)> {
        match self {
            Op::D(x) => d_x(sc, x, s),
            Op::Delta(x) => delta_x(sc, x, s),
            Op::Shift(x) => diagonal_shift(x, s).map(|t| (t, BigInt::one())).into_iter().collect(),
        }
    }

    pub fn name(self, sc: &Scenario) -> String {
        match self {
            Op::D(x) => format!("d_{}", sc.primes[x].id),
            Op::Delta(x) => format!("delta_{}", sc.primes[x].id),
            Op::Shift(x) => format!("Delta_{}", sc.primes[x].id),
        }
    }
}

pub fn apply_op(sc: &Scenario, op: Op, c: &KChain) -> KChain {
    let mut out = KChain::new();
    for (s, v) in c {
        for (t, w) in op.apply(sc, s) {
            chain_add(&mut out, t, w * v);
        }
    }
    out
}

/// `(d + δ)` on a chain.
pub fn apply_total(sc: &Scenario, z: Mask, c: &KChain) -> KChain {
    let mut out = KChain::new();
    for x in sc.primes_in(z) {
        for op in [Op::D(x), Op::Delta(x)] {
            for (s, v) in apply_op(sc, op, c) {
                chain_add(&mut out, s, v);
            }
        }
    }
    out
}

/// All exponent vectors supported on `z` with the given total degree.
fn exponent_vectors(k: usize, z: Mask, deg: u32) -> Vec<Vec<u32>> {
    let primes: Vec<usize> = (0..k).filter(|&i| z & (1 << i) != 0).collect();
    let mut out = Vec::new();
    fn rec(primes: &[usize], left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        match primes.split_first() {
            None => {
                if left == 0 {
                    out.push(cur.clone());
                }
            }
            Some((&p, rest)) => {
                for e in 0..=left {
                    cur[p] = e;
                    rec(rest, left - e, cur, out);
                }
                cur[p] = 0;
            }
        }
    }
    rec(&primes, deg, &mut vec![0; k], &mut out);
    out
}

/// `K_z` materialized on total degrees `lo..=hi`, keeping symbols with
/// `deg w <= deg y + 2`.
#[derive(Clone, Debug)]
pub struct KComplex {
    pub z: Mask,
    pub lo: i32,
    pub hi: i32,
    pub bases: BTreeMap<i32, Basis<KSym>>,
}

impl KComplex {
    pub fn default_window(sc: &Scenario, z: Mask) -> (i32, i32) {
        let _ = sc;
        (-(z.count_ones() as i32) - 1, 2)
    }

    pub fn new(sc: &Scenario, z: Mask, lo: i32, hi: i32) -> KComplex {
        let k = sc.num_primes();
        let mut bases = BTreeMap::new();
        for n in lo..=hi {
            let mut syms = Vec::new();
            for y in crate::site::stalks(z) {
                let ny = y.count_ones() as i32;
                let dw = n + ny;
                if dw < 0 || dw > ny + 2 {
                    continue;
                }
                let abasis = ABasis::new(sc, z & !y);
                for w in exponent_vectors(k, z, dw as u32) {
                    for a in abasis.syms() {
                        syms.push(KSym { y, w: w.clone(), a: a.clone() });
                    }
                }
            }
            bases.insert(n, Basis::new(syms));
        }
        KComplex { z, lo, hi, bases }
    }

    pub fn basis(&self, n: i32) -> Result<&Basis<KSym>, ComplexError> {
        self.bases
            .get(&n)
            .ok_or_else(|| ComplexError::WindowExceeded(format!("degree {n} outside [{}, {}]", self.lo, self.hi)))
    }

    pub fn chain_to_coords(&self, sc: &Scenario, n: i32, c: &KChain) -> Result<Vec<BigInt>, ComplexError> {
        let b = self.basis(n)?;
        let mut v = vec![BigInt::zero(); b.len()];
        for (s, x) in c {
            let i = b
                .index_of(s)
                .ok_or_else(|| ComplexError::WindowExceeded(format!("{} not materialized", s.label(sc))))?;
            v[i] += x;
        }
        Ok(v)
    }

    pub fn coords_to_chain(&self, n: i32, v: &[BigInt]) -> Result<KChain, ComplexError> {
        let b = self.basis(n)?;
        let mut c = KChain::new();
        for (s, x) in b.syms().iter().zip(v) {
            chain_add(&mut c, s.clone(), x.clone());
        }
        Ok(c)
    }

    /// Matrix of a sum of operators from degree `n` (columns) to its target degree.
    pub fn ops_matrix(&self, sc: &Scenario, ops: &[Op], n: i32) -> Result<IntMatrix, ComplexError> {
        let deg = ops.first().map_or(1, |o| o.degree());
        let src = self.basis(n)?;
        let tgt = self.basis(n + deg)?;
        let mut m = IntMatrix::zeros(tgt.len(), src.len());
        for (j, s) in src.syms().iter().enumerate() {
            for &op in ops {
                for (t, c) in op.apply(sc, s) {
                    let i = tgt.index_of(&t).ok_or_else(|| {
                        ComplexError::WindowExceeded(format!(
                            "{} applied to {} leaves the window",
                            op.name(sc),
                            s.label(sc)
                        ))
                    })?;
                    m.add_to(i, j, &c);
                }
            }
        }
        Ok(m)
    }

    pub fn total_ops(&self, sc: &Scenario) -> Vec<Op> {
        sc.primes_in(self.z).into_iter().flat_map(|x| [Op::D(x), Op::Delta(x)]).collect()
    }

    /// `d + δ : K^n -> K^{n+1}`.
    pub fn total_matrix(&self, sc: &Scenario, n: i32) -> Result<IntMatrix, ComplexError> {
        self.ops_matrix(sc, &self.total_ops(sc), n)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnticommuteReport {
    pub level: String,
    pub window: (i32, i32),
    pub identities_checked: usize,
    pub ok: bool,
    pub witness: Option<String>,
}

/// Checks `D1 D2 + D2 D1 = 0` for distinct members and `D² = 0` for each
/// member of `{d_x} ∪ {δ_x}`, on every degree where both compositions stay
/// inside the window.
pub fn verify_anticommute(sc: &Scenario, z: Mask, lo: i32, hi: i32) -> Result<AnticommuteReport, ComplexError> {
    let k = KComplex::new(sc, z, lo, hi);
    let ops = k.total_ops(sc);
    let mut checked = 0;
    let mut witness = None;
    for n in lo..=hi - 2 {
        let single: BTreeMap<Op, (IntMatrix, IntMatrix)> = ops
            .iter()
            .map(|&op| Ok((op, (k.ops_matrix(sc, &[op], n)?, k.ops_matrix(sc, &[op], n + 1)?))))
            .collect::<Result<_, ComplexError>>()?;
        for (i, &a) in ops.iter().enumerate() {
            for &b in &ops[i..] {
                let (a0, a1) = &single[&a];
                let (b0, b1) = &single[&b];
                let ab = a1.mul(b0)?;
                let ba = b1.mul(a0)?;
                let sum = if a == b { ab } else { add_matrices(&ab, &ba) };
                checked += 1;
                if !sum.is_zero() {
                    let (&(_, col), _) = sum.entries().next().expect("nonzero");
                    let src = &k.basis(n)?.syms()[col];
                    witness.get_or_insert_with(|| {
                        format!(
                            "{} {} + {} {} nonzero on {}",
                            a.name(sc),
                            b.name(sc),
                            b.name(sc),
                            a.name(sc),
                            src.label(sc)
                        )
                    });
                }
            }
        }
    }
    Ok(AnticommuteReport {
        level: sc.mask_name(z),
        window: (lo, hi),
        identities_checked: checked,
        ok: witness.is_none(),
        witness,
    })
}

pub fn add_matrices(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let mut out = a.clone();
    for (&(i, j), v) in b.entries() {
        out.add_to(i, j, v);
    }
    out
}

/// Whether a generator survives in `Q_z`: `[1_h, y, w]` with `y | w`.
pub fn is_q_symbol(s: &KSym) -> bool {
    let wsupp: Mask = s.w.iter().enumerate().filter(|(_, &e)| e > 0).fold(0, |m, (i, _)| m | (1 << i));
    s.a.stalk == 0 && s.y & !wsupp == 0
}

/// `ρ_M`: reduction mod `M` followed by projection onto the `Q` generators.
pub fn project_q(c: &KChain, modulus: u64) -> BTreeMap<KSym, u64> {
    c.iter()
        .filter(|(s, _)| is_q_symbol(s))
        .map(|(s, v)| (s.clone(), crate::exactlin::reduce_big(v, modulus)))
        .filter(|(_, v)| *v != 0)
        .collect()
}

/// `u`: the `y = 1` part of a chain, as a bar chain `w -> A_z` vector.
pub fn u_map(c: &KChain) -> BTreeMap<Vec<u32>, AVector> {
    let mut out: BTreeMap<Vec<u32>, AVector> = BTreeMap::new();
    for (s, v) in c {
        if s.y == 0 {
            crate::distribution::add_term(out.entry(s.w.clone()).or_default(), s.a.clone(), v.clone());
        }
    }
    out.retain(|_, v| !v.is_empty());
    out
}

/// The degree-0 part of `u(c)` sent into `U_z / M U_z`.
pub fn bar_to_u(sc: &Scenario, u: &UPresentation, c: &KChain) -> Result<Vec<u64>, ComplexError> {
    let zero_w = vec![0u32; sc.num_primes()];
    let bar = u_map(c);
    let a = bar.get(&zero_w).cloned().unwrap_or_default();
    Ok(crate::exactlin::reduce_vec(&u.project_avec(sc, &a)?, sc.modulus))
}

/// Size of `H^0(K̄_z / M, δ)`, computed in `A_z` coordinates against the
/// bar relation lattice rather than in `U_z` coordinates.
pub fn bar_h0_size(sc: &Scenario, u: &UPresentation) -> Result<BigUint, ComplexError> {
    let m = sc.modulus;
    let n = u.basis.len();
    let primes = sc.primes_in(u.z);
    let rel = reduce_matrix(&u.relations, m);
    let nrel = rel.rows();
    let k = primes.len();
    let mut big = ResMatrix::zeros(m, k * n, n + k * nrel);
    for (b, &x) in primes.iter().enumerate() {
        let ax = crate::distribution::ring_matrix(sc, &a_element(sc, x, 0), &u.basis);
        for (&(i, j), v) in ax.entries() {
            big.add_to(b * n + i, j, crate::exactlin::reduce_big(v, m));
        }
        for (&(r, j), &v) in rel.entries() {
            big.add_to(b * n + j, n + b * nrel + r, m - v);
        }
    }
    let ker = if k == 0 { ResMatrix::identity(m, n) } else { kernel_mod(&big) };
    let rows: Vec<Vec<u64>> = (0..ker.rows()).map(|i| ker.row(i)[..n].to_vec()).collect();
    let cocycles = howell_form(&ResMatrix::from_dense(m, n, &rows)).module_size();
    let boundaries = howell_form(&rel).module_size();
    Ok(cocycles / boundaries)
}
