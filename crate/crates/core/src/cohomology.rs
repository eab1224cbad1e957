//! `H^0(G_z, U_z / M U_z)`: fixed points computed directly and through the
//! windowed total complex, plus the canonical basis `c̄_y` obtained by lifting
//! `[1, y, y]` to 0-cocycles of `K_z / M K_z`.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::complex::{bar_to_u, chain_add, is_q_symbol, ComplexError, KChain, KComplex, KSym};
use crate::distribution::{include_u, DistError, Sym, UPresentation};
use crate::exactlin::{howell_form, kernel_mod, reduce_matrix, solve_mod, Howell, LinError, ResMatrix};
use crate::site::{stalks, GroupRingElem, Mask, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CohomologyError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Lin(#[from] LinError),
    #[error("no 0-cocycle lifts [1, {0}, {0}]")]
    LiftFailed(String),
    #[error("canonical classes are dependent: {0}")]
    Dependent(String),
    #[error("vector is not in the span of the canonical basis")]
    OutsideSpan,
}

/// A `G_z`-fixed vector of `U_z / M U_z` in presentation coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CohomologyClass {
    pub z: Mask,
    pub modulus: u64,
    pub rep: Vec<u64>,
}

/// Squarefree divisors of `z`, by number of primes then lexicographically.
pub fn ordered_divisors(z: Mask) -> Vec<Mask> {
    let mut ys = stalks(z);
    ys.sort_by_key(|&y| {
        let idx: Vec<u32> = (0..32).filter(|i| y & (1 << i) != 0).collect();
        (y.count_ones(), idx)
    });
    ys
}

/// Stacked `σ_z(x) - 1` on `U_z / M U_z`.
pub fn fixed_point_matrix(sc: &Scenario, u: &UPresentation) -> ResMatrix {
    let m = sc.modulus;
    let mut out = ResMatrix::zeros(m, 0, u.rank);
    for x in sc.primes_in(u.z) {
        let r = GroupRingElem::monomial(sc.sigma(x)).sub(&GroupRingElem::monomial(sc.identity()));
        let block = reduce_matrix(&u.action(sc, &r), m);
        out = out.vstack(&block).expect("same width");
    }
    out
}

pub fn is_fixed(sc: &Scenario, u: &UPresentation, v: &[u64]) -> bool {
    fixed_point_matrix(sc, u).mul_vec(v).map(|w| w.iter().all(|&x| x == 0)).unwrap_or(false)
}

/// Howell basis of `H^0(G_z, U_z / M U_z)` as the kernel of the stacked `σ - 1`.
pub fn h0_direct(sc: &Scenario, u: &UPresentation) -> Howell {
    let f = fixed_point_matrix(sc, u);
    if f.rows() == 0 {
        return howell_form(&ResMatrix::identity(sc.modulus, u.rank));
    }
    howell_form(&kernel_mod(&f))
}

pub fn h0_classes(sc: &Scenario, u: &UPresentation) -> Vec<CohomologyClass> {
    let h = h0_direct(sc, u);
    (0..h.h.rows()).map(|i| CohomologyClass { z: u.z, modulus: sc.modulus, rep: h.h.row(i) }).collect()
}

/// `|ker D^0| / |im D^{-1}|` on `K_z / M K_z`.
pub fn h0_size_via_k(sc: &Scenario, k: &KComplex) -> Result<BigUint, CohomologyError> {
    let m = sc.modulus;
    let d0 = reduce_matrix(&k.total_matrix(sc, 0)?, m);
    let dm = reduce_matrix(&k.total_matrix(sc, -1)?, m);
    let cocycles = if d0.rows() == 0 || d0.is_zero() {
        BigUint::from(m).pow(d0.cols() as u32)
    } else {
        howell_form(&kernel_mod(&d0)).module_size()
    };
    let boundaries = howell_form(&dm.transpose()).module_size();
    Ok(cocycles / boundaries)
}

/// `h` acting on every symbol of a chain.
pub fn twist_chain(sc: &Scenario, c: &KChain, h: &[u64]) -> KChain {
    let mut g = vec![0u64; sc.num_primes()];
    g.extend_from_slice(h);
    let mut out = KChain::new();
    for (s, v) in c {
        chain_add(&mut out, KSym { y: s.y, w: s.w.clone(), a: s.a.act(sc, &g) }, v.clone());
    }
    out
}

/// `[1, y, y]`.
pub fn q_seed(sc: &Scenario, y: Mask) -> KSym {
    let w = (0..sc.num_primes()).map(|i| u32::from(y & (1 << i) != 0)).collect();
    KSym { y, w, a: Sym::unit(sc, 0) }
}

/// Solver for `D^0 (q + s) ≡ 0 mod M` with `s` supported on `S^0`.
pub struct LiftSystem {
    d0: ResMatrix,
    s_cols: Vec<usize>,
    restricted: ResMatrix,
}

impl LiftSystem {
    pub fn new(sc: &Scenario, k: &KComplex, reverse: bool) -> Result<LiftSystem, CohomologyError> {
        let d0 = reduce_matrix(&k.total_matrix(sc, 0)?, sc.modulus);
        let b0 = k.basis(0)?;
        let mut s_cols: Vec<usize> = (0..b0.len()).filter(|&j| !is_q_symbol(&b0.syms()[j])).collect();
        if reverse {
            s_cols.reverse();
        }
        let mut restricted = ResMatrix::zeros(sc.modulus, d0.rows(), s_cols.len());
        let pos: BTreeMap<usize, usize> = s_cols.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        for (&(i, j), &v) in d0.entries() {
            if let Some(&jj) = pos.get(&j) {
                restricted.set(i, jj, v);
            }
        }
        Ok(LiftSystem { d0, s_cols, restricted })
    }

    /// A 0-cocycle of `K_z / M` whose `ρ_M` image is `[1, y, y]`.
    pub fn lift(&self, sc: &Scenario, k: &KComplex, y: Mask) -> Result<KChain, CohomologyError> {
        let m = sc.modulus;
        let b0 = k.basis(0)?;
        let seed = q_seed(sc, y);
        let j0 = b0.index_of(&seed).ok_or_else(|| ComplexError::WindowExceeded(seed.label(sc)))?;
        let rhs: Vec<u64> = (0..self.d0.rows()).map(|i| (m - self.d0.get(i, j0)) % m).collect();
        let s = solve_mod(&self.restricted, &rhs)?.ok_or_else(|| CohomologyError::LiftFailed(sc.mask_name(y)))?;
        let mut c = KChain::new();
        c.insert(seed, BigInt::one());
        for (&j, &v) in self.s_cols.iter().zip(&s) {
            chain_add(&mut c, b0.syms()[j].clone(), BigInt::from(v));
        }
        Ok(c)
    }
}

/// Checks `(d + δ) c ≡ 0 mod M` for a degree-0 chain.
pub fn is_cocycle_mod(sc: &Scenario, z: Mask, c: &KChain) -> bool {
    let m = BigInt::from(sc.modulus);
    crate::complex::apply_total(sc, z, c).values().all(|v| (v % &m).is_zero())
}

#[derive(Clone, Debug)]
pub struct CanonicalBasis {
    pub z: Mask,
    pub modulus: u64,
    pub u: UPresentation,
    pub ys: Vec<Mask>,
    /// Lifts of `[1, y, y]`; the lift of `[1_h, y, y]` is the `h`-twist.
    pub lifts: BTreeMap<Mask, KChain>,
    pub classes: BTreeMap<Mask, Vec<u64>>,
    /// Columns `h · c̄_y`, ordered by `y` then `h`.
    pub matrix: ResMatrix,
    pub h_elements: Vec<Vec<u64>>,
}

impl CanonicalBasis {
    pub fn build(sc: &Scenario, z: Mask) -> Result<CanonicalBasis, CohomologyError> {
        let (lo, hi) = KComplex::default_window(sc, z);
        Self::build_in(sc, &KComplex::new(sc, z, lo, hi), false)
    }

    pub fn build_in(sc: &Scenario, k: &KComplex, reverse: bool) -> Result<CanonicalBasis, CohomologyError> {
        let z = k.z;
        let m = sc.modulus;
        let u = UPresentation::build(sc, z)?;
        let sys = LiftSystem::new(sc, k, reverse)?;
        let ys = ordered_divisors(z);
        let mut lifts = BTreeMap::new();
        let mut classes = BTreeMap::new();
        for &y in &ys {
            let c = sys.lift(sc, k, y)?;
            classes.insert(y, bar_to_u(sc, &u, &c)?);
            lifts.insert(y, c);
        }
        let h_elements = sc.h_elements();
        let mut cols: Vec<Vec<u64>> = Vec::new();
        for &y in &ys {
            for h in &h_elements {
                cols.push(act_h(sc, &u, h, &classes[&y]));
            }
        }
        let matrix = ResMatrix::from_dense(m, u.rank, &cols).transpose();
        let basis = CanonicalBasis { z, modulus: m, u, ys, lifts, classes, matrix, h_elements };
        basis.certify(sc)?;
        Ok(basis)
    }

    /// Independence over `T/MT` (free module of full size) and agreement with
    /// the direct fixed-point computation.
    pub fn certify(&self, sc: &Scenario) -> Result<(), CohomologyError> {
        let m = self.modulus;
        let n = self.matrix.cols();
        let span = howell_form(&self.matrix.transpose());
        let expect = BigUint::from(m).pow(n as u32);
        if span.module_size() != expect {
            return Err(CohomologyError::Dependent(format!(
                "span has {} elements, expected {expect}",
                span.module_size()
            )));
        }
        let direct = h0_direct(sc, &self.u);
        if direct.module_size() != expect {
            return Err(CohomologyError::Dependent(format!(
                "H^0 has {} elements, basis spans {expect}",
                direct.module_size()
            )));
        }
        for j in 0..n {
            let col: Vec<u64> = (0..self.matrix.rows()).map(|i| self.matrix.get(i, j)).collect();
            if !direct.contains(&col) {
                return Err(CohomologyError::Dependent(format!("column {j} is not fixed")));
            }
        }
        Ok(())
    }

    pub fn class(&self, y: Mask) -> CohomologyClass {
        CohomologyClass { z: self.z, modulus: self.modulus, rep: self.classes[&y].clone() }
    }

    /// Coordinates over `T/MT`, one `T/MT` element (indexed by `H`) per `y`.
    pub fn coordinates(&self, v: &[u64]) -> Result<BTreeMap<Mask, Vec<u64>>, CohomologyError> {
        let x = solve_mod(&self.matrix, v)?.ok_or(CohomologyError::OutsideSpan)?;
        let nh = self.h_elements.len();
        Ok(self.ys.iter().enumerate().map(|(i, &y)| (y, x[i * nh..(i + 1) * nh].to_vec())).collect())
    }

    /// `Σ_y t_y c̄_y`.
    pub fn combine(&self, sc: &Scenario, coords: &BTreeMap<Mask, Vec<u64>>) -> Vec<u64> {
        let m = self.modulus;
        let mut out = vec![0u64; self.u.rank];
        for (y, t) in coords {
            for (h, &c) in self.h_elements.iter().zip(t) {
                let v = act_h(sc, &self.u, h, &self.classes[y]);
                for (o, x) in out.iter_mut().zip(v) {
                    *o = (*o + c * x) % m;
                }
            }
        }
        out
    }

    /// Lift of `Σ_y t_y c̄_y`, assembled from the stored lifts.
    pub fn lift_of(&self, sc: &Scenario, coords: &BTreeMap<Mask, Vec<u64>>) -> KChain {
        let mut out = KChain::new();
        for (y, t) in coords {
            for (h, &c) in self.h_elements.iter().zip(t) {
                if c == 0 {
                    continue;
                }
                for (s, v) in twist_chain(sc, &self.lifts[y], h) {
                    chain_add(&mut out, s, v * c);
                }
            }
        }
        let m = BigInt::from(self.modulus);
        out.into_iter().map(|(s, v)| (s, ((v % &m) + &m) % &m)).filter(|(_, v)| !v.is_zero()).collect()
    }
}

/// `h` acting on `U_z / M U_z` coordinates.
pub fn act_h(sc: &Scenario, u: &UPresentation, h: &[u64], v: &[u64]) -> Vec<u64> {
    let mut g = vec![0u64; sc.num_primes()];
    g.extend_from_slice(h);
    let a = reduce_matrix(&u.action(sc, &GroupRingElem::monomial(g)), sc.modulus);
    a.mul_vec(v).expect("rank agrees")
}

/// `U_{z'} / M -> U_z / M` on coordinates.
pub fn include_mod(
    sc: &Scenario,
    small: &UPresentation,
    big: &UPresentation,
    v: &[u64],
) -> Result<Vec<u64>, CohomologyError> {
    let inc = reduce_matrix(&include_u(sc, small, big)?, sc.modulus);
    Ok(inc.mul_vec(v)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct H0Report {
    pub level: String,
    pub expected_rank: usize,
    pub direct_rank: Option<usize>,
    pub via_k_rank: Option<usize>,
    pub via_bar_rank: Option<usize>,
    pub ok: bool,
}

/// The three computations of `|H^0|`, each as a power of `M`.
pub fn h0_crosscheck(sc: &Scenario, z: Mask, lo: i32, hi: i32) -> Result<H0Report, CohomologyError> {
    let m = sc.modulus;
    let u = UPresentation::build(sc, z)?;
    let expected_rank = (1usize << z.count_ones()) * sc.h_size();
    let direct = h0_direct(sc, &u).free_rank();
    let k = KComplex::new(sc, z, lo, hi);
    let via_k = crate::exactlin::log_modulus(&h0_size_via_k(sc, &k)?, m);
    let via_bar = crate::exactlin::log_modulus(&crate::complex::bar_h0_size(sc, &u)?, m);
    let ok = [direct, via_k, via_bar].iter().all(|r| *r == Some(expected_rank));
    Ok(H0Report {
        level: sc.mask_name(z),
        expected_rank,
        direct_rank: direct,
        via_k_rank: via_k,
        via_bar_rank: via_bar,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_order() {
        assert_eq!(ordered_divisors(0b111), vec![0, 1, 2, 4, 3, 5, 6, 7]);
        assert_eq!(ordered_divisors(0), vec![0]);
    }

    #[test]
    fn c1_is_class_of_unit() {
        let sc = Scenario::from_json(include_str!("../data/s1.json")).unwrap();
        let b = CanonicalBasis::build(&sc, sc.full()).unwrap();
        let mut unit = crate::distribution::AVector::new();
        unit.insert(Sym::unit(&sc, 0), BigInt::one());
        let expect = crate::exactlin::reduce_vec(&b.u.project_avec(&sc, &unit).unwrap(), sc.modulus);
        assert_eq!(b.classes[&0], expect);
    }
}
