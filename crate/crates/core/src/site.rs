//! Formal primes, levels, stalks, the sign ω, the groups `G_z` and the
//! coefficient ring `T = Z[H]`.
//!
//! Levels are bitmasks over the configured primes: bit `i` set means the
//! `i`-th prime appears with its full configured exponent.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// A squarefree product or a stalk of the full level, as a bitmask over prime indices.
pub type Mask = u32;

/// Raw T-coefficient as it appears in a scenario file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum TCoeffSpec {
    Scalar(i64),
    Vector(Vec<i64>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PrimeSpec {
    pub id: String,
    pub level: u32,
    pub group_order: u64,
    pub p_coeffs: Vec<TCoeffSpec>,
    #[serde(default)]
    pub frobenius: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_coeffs: Option<Vec<TCoeffSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_hint: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub modulus: u64,
    #[serde(default)]
    pub coefficient_group: Vec<u64>,
    pub primes: Vec<PrimeSpec>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Malformed(String),
    #[error("modulus must be at least 2, got {0}")]
    Modulus(u64),
    #[error("duplicate prime id `{0}`")]
    DuplicateId(String),
    #[error("unknown prime id `{0}`")]
    UnknownId(String),
    #[error("prime `{id}`: {msg}")]
    Prime { id: String, msg: String },
    #[error("Kolyvagin condition 1 violated at `{id}`: M ∤ |G_x| (M = {modulus}, |G_x| = {order})")]
    GroupOrder { id: String, modulus: u64, order: u64 },
    #[error("Kolyvagin condition 1 violated at `{id}`: M ∤ p(x;1) (M = {modulus}, p(x;1) = {value})")]
    PAtOne { id: String, modulus: u64, value: String },
    #[error("prime `{id}`: Frobenius must be trivial on its own group G_x")]
    FrobeniusOwn { id: String },
    #[error("prime `{id}`: |G_z(x)| does not divide p(x;t) - p(x;n_x t) coefficient-wise (n_x = {hint})")]
    NormHint { id: String, hint: i64 },
    #[error("prime `{id}`: neither r_coeffs nor norm_hint given")]
    MissingR { id: String },
    #[error("Kolyvagin condition 3 violated at `{id}`: gamma_z(x) has a nontrivial kernel")]
    GammaKernel { id: String },
    #[error("U_z is not certified free: {0}")]
    NotFree(String),
}

/// An element of `T = Z[H]`, indexed by H in lexicographic exponent order.
pub type TElem = Vec<BigInt>;

#[derive(Clone, Debug)]
pub struct Prime {
    pub id: String,
    pub level: u32,
    pub order: u64,
    pub p: Vec<TElem>,
    /// Exponent of `Fr_x` at every prime index (zero at its own index).
    pub frob: Vec<u64>,
    pub r: Vec<TElem>,
    pub norm_hint: Option<i64>,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub modulus: u64,
    pub h_orders: Vec<u64>,
    pub primes: Vec<Prime>,
}

/// Element of `G × H`: one exponent per prime, then one per cyclic factor of H.
pub type GroupElem = Vec<u64>;

fn tcoeff(spec: &TCoeffSpec, h_size: usize, id: &str) -> Result<TElem, ScenarioError> {
    match spec {
        TCoeffSpec::Scalar(v) => {
            let mut t = vec![BigInt::zero(); h_size];
            t[0] = BigInt::from(*v);
            Ok(t)
        }
        TCoeffSpec::Vector(v) => {
            if v.len() != h_size {
                return Err(ScenarioError::Prime {
                    id: id.to_string(),
                    msg: format!("T-coefficient has {} entries, |H| = {}", v.len(), h_size),
                });
            }
            Ok(v.iter().map(|&x| BigInt::from(x)).collect())
        }
    }
}

fn poly_at_one(p: &[TElem], h_size: usize) -> TElem {
    let mut out = vec![BigInt::zero(); h_size];
    for c in p {
        for (o, x) in out.iter_mut().zip(c) {
            *o += x;
        }
    }
    out
}

fn render_t(t: &TElem) -> String {
    if t.len() == 1 {
        t[0].to_string()
    } else {
        format!("{:?}", t.iter().map(|x| x.to_string()).collect::<Vec<_>>())
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
        Scenario::from_spec(spec)
    }

    pub fn from_spec(spec: ScenarioSpec) -> Result<Scenario, ScenarioError> {
        let m = spec.modulus;
        if m < 2 {
            return Err(ScenarioError::Modulus(m));
        }
        if spec.primes.len() > 16 {
            return Err(ScenarioError::Malformed("at most 16 primes are supported".into()));
        }
        if spec.coefficient_group.contains(&0) {
            return Err(ScenarioError::Malformed("coefficient_group orders must be positive".into()));
        }
        let h_size: usize = spec.coefficient_group.iter().product::<u64>() as usize;
        let mut index = BTreeMap::new();
        for (i, p) in spec.primes.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(ScenarioError::DuplicateId(p.id.clone()));
            }
        }
        let mb = BigInt::from(m);
        let mut primes = Vec::new();
        for (i, ps) in spec.primes.iter().enumerate() {
            let id = ps.id.clone();
            if ps.level == 0 {
                return Err(ScenarioError::Prime { id, msg: "level must be positive".into() });
            }
            if ps.group_order == 0 {
                return Err(ScenarioError::Prime { id, msg: "group_order must be positive".into() });
            }
            if ps.group_order % m != 0 {
                return Err(ScenarioError::GroupOrder { id, modulus: m, order: ps.group_order });
            }
            let p: Vec<TElem> = ps.p_coeffs.iter().map(|c| tcoeff(c, h_size, &id)).collect::<Result<_, _>>()?;
            let p1 = poly_at_one(&p, h_size);
            if p1.iter().any(|c| !c.is_multiple_of(&mb)) {
                return Err(ScenarioError::PAtOne { id, modulus: m, value: render_t(&p1) });
            }
            let mut frob = vec![0u64; spec.primes.len()];
            for (k, &e) in &ps.frobenius {
                let j = *index.get(k).ok_or_else(|| ScenarioError::UnknownId(k.clone()))?;
                let ord = spec.primes[j].group_order as i64;
                frob[j] = e.rem_euclid(ord) as u64;
            }
            if frob[i] != 0 {
                return Err(ScenarioError::FrobeniusOwn { id });
            }
            let r = match (&ps.r_coeffs, ps.norm_hint) {
                (Some(rc), _) => rc.iter().map(|c| tcoeff(c, h_size, &id)).collect::<Result<_, _>>()?,
                (None, Some(n)) => {
                    let g = BigInt::from(ps.group_order);
                    let nb = BigInt::from(n);
                    let mut r = Vec::new();
                    let mut npow = BigInt::one();
                    for c in &p {
                        let factor = BigInt::one() - &npow;
                        let mut rc = Vec::new();
                        for x in c {
                            let num = x * &factor;
                            if !num.is_multiple_of(&g) {
                                return Err(ScenarioError::NormHint { id, hint: n });
                            }
                            rc.push(num / &g);
                        }
                        r.push(rc);
                        npow *= &nb;
                    }
                    r
                }
                (None, None) => return Err(ScenarioError::MissingR { id }),
            };
            primes.push(Prime {
                id: ps.id.clone(),
                level: ps.level,
                order: ps.group_order,
                p,
                frob,
                r,
                norm_hint: ps.norm_hint,
            });
        }
        Ok(Scenario { modulus: m, h_orders: spec.coefficient_group.clone(), primes, spec })
    }

    pub fn num_primes(&self) -> usize {
        self.primes.len()
    }

    pub fn full(&self) -> Mask {
        ((1u64 << self.primes.len()) - 1) as Mask
    }

    pub fn h_size(&self) -> usize {
        self.h_orders.iter().product::<u64>() as usize
    }

    pub fn prime_index(&self, id: &str) -> Option<usize> {
        self.primes.iter().position(|p| p.id == id)
    }

    /// Orders of the cyclic factors of `G × H`.
    pub fn group_orders(&self) -> Vec<u64> {
        self.primes.iter().map(|p| p.order).chain(self.h_orders.iter().copied()).collect()
    }

    /// Elements of H in lexicographic exponent order.
    pub fn h_elements(&self) -> Vec<Vec<u64>> {
        enumerate_product(&self.h_orders)
    }

    pub fn h_index(&self, h: &[u64]) -> usize {
        h.iter().zip(&self.h_orders).fold(0usize, |acc, (&e, &o)| acc * o as usize + e as usize)
    }

    pub fn identity(&self) -> GroupElem {
        vec![0; self.primes.len() + self.h_orders.len()]
    }

    /// The generator `σ_z(x)`.
    pub fn sigma(&self, x: usize) -> GroupElem {
        let mut g = self.identity();
        g[x] = 1 % self.primes[x].order;
        g
    }

    pub fn frobenius(&self, x: usize) -> GroupElem {
        let mut g = self.identity();
        g[..self.primes.len()].copy_from_slice(&self.primes[x].frob);
        g
    }

    pub fn group_mul(&self, a: &[u64], b: &[u64]) -> GroupElem {
        let orders = self.group_orders();
        a.iter().zip(b).zip(&orders).map(|((&x, &y), &o)| (x + y) % o).collect()
    }

    pub fn group_inv(&self, a: &[u64]) -> GroupElem {
        let orders = self.group_orders();
        a.iter().zip(&orders).map(|(&x, &o)| (o - x % o) % o).collect()
    }

    pub fn group_pow(&self, a: &[u64], k: i64) -> GroupElem {
        let orders = self.group_orders();
        a.iter().zip(&orders).map(|(&x, &o)| ((x as i128 * k as i128).rem_euclid(o as i128)) as u64).collect()
    }

    /// Embeds a T-coefficient as an element of `Z[G × H]`.
    pub fn t_to_ring(&self, t: &TElem) -> GroupRingElem {
        let mut out = GroupRingElem::zero();
        for (h, c) in self.h_elements().into_iter().zip(t) {
            let mut g = vec![0u64; self.primes.len()];
            g.extend(h);
            out.add_term(g, c.clone());
        }
        out
    }

    /// `p(g) = Σ p_k g^k` in `Z[G × H]`.
    pub fn eval_poly(&self, p: &[TElem], g: &[u64]) -> GroupRingElem {
        let mut out = GroupRingElem::zero();
        for (k, c) in p.iter().enumerate() {
            let gk = GroupRingElem::monomial(self.group_pow(g, k as i64));
            out = out.add(&self.t_to_ring(c).mul(&gk, self));
        }
        out
    }

    /// `p(x; Fr_x^{-1})`.
    pub fn p_frob(&self, x: usize) -> GroupRingElem {
        self.eval_poly(&self.primes[x].p, &self.group_inv(&self.frobenius(x)))
    }

    /// `r_x(Fr_x^{-1})`.
    pub fn r_frob(&self, x: usize) -> GroupRingElem {
        self.eval_poly(&self.primes[x].r, &self.group_inv(&self.frobenius(x)))
    }

    /// `γ_z(x) = p(x;Fr^{-1}) - |G_z(x)| r_x(Fr^{-1})`.
    pub fn gamma(&self, x: usize) -> GroupRingElem {
        self.p_frob(x).sub(&self.r_frob(x).scale(&BigInt::from(self.primes[x].order)))
    }

    /// `N_z(x)`: the sum of all elements of `G_z(x)`.
    pub fn norm_element(&self, x: usize) -> GroupRingElem {
        let mut out = GroupRingElem::zero();
        for j in 0..self.primes[x].order {
            out.add_term(self.group_pow(&self.sigma(x), j as i64), BigInt::one());
        }
        out
    }

    /// `D_z(x) = Σ k σ^k`.
    pub fn kolyvagin_operator(&self, x: usize) -> GroupRingElem {
        let mut out = GroupRingElem::zero();
        for k in 0..self.primes[x].order {
            out.add_term(self.group_pow(&self.sigma(x), k as i64), BigInt::from(k));
        }
        out
    }

    pub fn primes_in(&self, mask: Mask) -> Vec<usize> {
        primes_in(mask, self.primes.len())
    }

    /// Human-readable name of a squarefree product.
    pub fn mask_name(&self, mask: Mask) -> String {
        let ids: Vec<&str> = self.primes_in(mask).into_iter().map(|i| self.primes[i].id.as_str()).collect();
        if ids.is_empty() {
            "1".to_string()
        } else {
            ids.join("*")
        }
    }

    /// Parses a name produced by [`Scenario::mask_name`].
    pub fn parse_mask(&self, name: &str) -> Result<Mask, ScenarioError> {
        let name = name.trim();
        if name == "1" || name.is_empty() {
            return Ok(0);
        }
        let mut mask = 0;
        for part in name.split('*') {
            let i = self.prime_index(part.trim()).ok_or_else(|| ScenarioError::UnknownId(part.to_string()))?;
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Exponents of a stalk, as a level map.
    pub fn stalk_exponents(&self, mask: Mask) -> BTreeMap<String, u32> {
        self.primes_in(mask).into_iter().map(|i| (self.primes[i].id.clone(), self.primes[i].level)).collect()
    }

    /// Converts level exponents to a stalk mask; only 0 or the full level is supported.
    pub fn level_mask(&self, exps: &BTreeMap<String, u32>) -> Result<Mask, ScenarioError> {
        let mut mask = 0;
        for (id, &e) in exps {
            let i = self.prime_index(id).ok_or_else(|| ScenarioError::UnknownId(id.clone()))?;
            if e == 0 {
                continue;
            }
            if e != self.primes[i].level {
                return Err(ScenarioError::Prime {
                    id: id.clone(),
                    msg: format!("only exponents 0 and {} are realized", self.primes[i].level),
                });
            }
            mask |= 1 << i;
        }
        Ok(mask)
    }
}

pub fn primes_in(mask: Mask, k: usize) -> Vec<usize> {
    (0..k).filter(|&i| mask & (1 << i) != 0).collect()
}

/// `ω(x, y)`.
pub fn omega(x: usize, y: Mask) -> i32 {
    if y & (1 << x) == 0 {
        return 0;
    }
    let smaller = (y & ((1u32 << x) - 1)).count_ones();
    if smaller.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// All stalks of `z`, in increasing mask order.
pub fn stalks(z: Mask) -> Vec<Mask> {
    let mut out = Vec::new();
    let mut s: Mask = 0;
    loop {
        out.push(s);
        if s == z {
            break;
        }
        s = (s.wrapping_sub(z)) & z;
    }
    out
}

/// All tuples with `0 <= t[i] < orders[i]`, lexicographically.
pub fn enumerate_product(orders: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for &o in orders {
        let mut next = Vec::with_capacity(out.len() * o as usize);
        for v in &out {
            for e in 0..o {
                let mut w = v.clone();
                w.push(e);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Element of `Z[G × H]` with no stored zero coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct GroupRingElem {
    terms: BTreeMap<GroupElem, BigInt>,
}

impl fmt::Debug for GroupRingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(g, c)| format!("{c}*{g:?}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl GroupRingElem {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(g: GroupElem) -> Self {
        let mut e = Self::zero();
        e.add_term(g, BigInt::one());
        e
    }

    pub fn add_term(&mut self, g: GroupElem, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(g.clone()).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&g);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElem, &BigInt)> {
        self.terms.iter()
    }

    pub fn coeff(&self, g: &[u64]) -> BigInt {
        self.terms.get(g).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(g.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&BigInt::from(-1))
    }

    pub fn scale(&self, s: &BigInt) -> Self {
        let mut out = Self::zero();
        for (g, c) in &self.terms {
            out.add_term(g.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self, sc: &Scenario) -> Self {
        let mut out = Self::zero();
        for (g, a) in &self.terms {
            for (h, b) in &other.terms {
                out.add_term(sc.group_mul(g, h), a * b);
            }
        }
        out
    }

    /// Largest absolute coefficient, for diagnostics.
    pub fn height(&self) -> BigInt {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_default()
    }
}
