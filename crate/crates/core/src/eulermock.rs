//! A finite abelian stand-in for the Euler-system specialization: a group
//! `Γ` acting on `𝕎 = (Z/M)^n` with a submodule `W`, a lift `d̂` on stalk
//! symbols, the map `κ`, the polynomials `Q_x`, and the check that a family
//! satisfying the universal Kolyvagin recursion satisfies the Kolyvagin
//! recursion in `W`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{AVector, DistError, Sym, UPresentation};
use crate::exactlin::{howell_form, kernel_mod, lift_vec, reduce_big, Howell, ResMatrix};
use crate::recursion::RecursiveFamily;
use crate::site::{enumerate_product, stalks, GroupElem, Mask, Scenario, TElem};

pub type GammaElem = Vec<u64>;

/// Element of `Z/M[Γ]`.
pub type GammaRing = Vec<(GammaElem, u64)>;

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("malformed mock: {0}")]
    Malformed(String),
    #[error("mock is for modulus {0}, scenario has {1}")]
    Modulus(u64, u64),
    #[error("mock failed validation: {0:?}")]
    Invalid(Vec<String>),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// On-disk form of a mock model.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MockSpec {
    pub scenario: String,
    pub modulus: u64,
    pub gamma_orders: Vec<u64>,
    /// Image in `G × H` of each generator of `Γ`.
    pub restriction: Vec<GroupElem>,
    /// `σ_z(x)` in `Γ`, keyed by prime id.
    pub sigma: BTreeMap<String, GammaElem>,
    /// Images of the cyclic generators of `H`.
    pub h_generators: Vec<GammaElem>,
    /// `Fr_x` in `Γ`.
    pub frobenius: BTreeMap<String, GammaElem>,
    /// `N_{F(1)/F}`; empty means the identity.
    #[serde(default)]
    pub norm: Vec<(GammaElem, i64)>,
    pub dim: usize,
    /// Sparse `(row, col, value)` matrices, one per generator of `Γ`, acting on columns.
    pub action: Vec<Vec<(usize, usize, u64)>>,
    pub w_generators: Vec<Vec<u64>>,
    /// `d̂([z'])` keyed by stalk name.
    pub dhat: BTreeMap<String, Vec<u64>>,
    /// Per prime, generators of the submodule of `𝕎` that `κ(I_x)` must land in.
    #[serde(default)]
    pub local: BTreeMap<String, Vec<Vec<u64>>>,
}

#[derive(Clone, Debug)]
pub struct MockModel {
    pub spec: MockSpec,
    modulus: u64,
    gens: Vec<ResMatrix>,
    w: Howell,
    dhat: BTreeMap<Mask, Vec<u64>>,
    sigma: Vec<GammaElem>,
    frob: Vec<GammaElem>,
    local: Vec<Howell>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub ok: bool,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub ok: bool,
}

fn ring_one(len: usize) -> GammaRing {
    vec![(vec![0; len], 1)]
}

impl MockModel {
    pub fn from_json(sc: &Scenario, text: &str) -> Result<MockModel, MockError> {
        Self::from_spec(sc, serde_json::from_str(text)?)
    }

    pub fn from_spec(sc: &Scenario, spec: MockSpec) -> Result<MockModel, MockError> {
        let m = spec.modulus;
        if m != sc.modulus {
            return Err(MockError::Modulus(m, sc.modulus));
        }
        let ng = spec.gamma_orders.len();
        let bad = |s: String| MockError::Malformed(s);
        if spec.action.len() != ng || spec.restriction.len() != ng {
            return Err(bad(format!("{ng} generators but {} actions", spec.action.len())));
        }
        let check_elem = |g: &GammaElem, what: &str| {
            if g.len() != ng {
                Err(bad(format!("{what} has length {}", g.len())))
            } else {
                Ok(g.clone())
            }
        };
        let mut gens = Vec::new();
        for a in &spec.action {
            let mut mat = ResMatrix::zeros(m, spec.dim, spec.dim);
            for &(i, j, v) in a {
                if i >= spec.dim || j >= spec.dim {
                    return Err(bad(format!("action entry ({i}, {j}) outside dimension {}", spec.dim)));
                }
                mat.add_to(i, j, v % m);
            }
            gens.push(mat);
        }
        let dense = |v: &Vec<u64>, what: &str| {
            if v.len() != spec.dim {
                Err(bad(format!("{what} has length {}", v.len())))
            } else {
                Ok(v.iter().map(|x| x % m).collect::<Vec<u64>>())
            }
        };
        let wrows = spec.w_generators.iter().map(|v| dense(v, "W generator")).collect::<Result<Vec<_>, _>>()?;
        let w = howell_form(&ResMatrix::from_dense(m, spec.dim, &wrows));
        let mut dhat = BTreeMap::new();
        for (name, v) in &spec.dhat {
            let mask = sc.parse_mask(name).map_err(|e| bad(e.to_string()))?;
            dhat.insert(mask, dense(v, "dhat value")?);
        }
        for z in stalks(sc.full()) {
            if !dhat.contains_key(&z) {
                return Err(bad(format!("dhat missing for {}", sc.mask_name(z))));
            }
        }
        let mut sigma = Vec::new();
        let mut frob = Vec::new();
        let mut local = Vec::new();
        for p in &sc.primes {
            let s = spec.sigma.get(&p.id).ok_or_else(|| bad(format!("no sigma for {}", p.id)))?;
            sigma.push(check_elem(s, "sigma")?);
            let f = spec.frobenius.get(&p.id).ok_or_else(|| bad(format!("no Frobenius for {}", p.id)))?;
            frob.push(check_elem(f, "Frobenius")?);
            let rows = spec
                .local
                .get(&p.id)
                .map(|g| g.iter().map(|v| dense(v, "local generator")).collect::<Result<Vec<_>, _>>())
                .transpose()?
                .unwrap_or_default();
            local.push(howell_form(&ResMatrix::from_dense(m, spec.dim, &rows)));
        }
        if spec.h_generators.len() != sc.h_orders.len() {
            return Err(bad("one image per H generator expected".into()));
        }
        for h in &spec.h_generators {
            check_elem(h, "H image")?;
        }
        for (g, _) in &spec.norm {
            check_elem(g, "norm term")?;
        }
        Ok(MockModel { spec, modulus: m, gens, w, dhat, sigma, frob, local })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.spec).expect("mock serializes")
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn gamma_elements(&self) -> Vec<GammaElem> {
        enumerate_product(&self.spec.gamma_orders)
    }

    pub fn sigma(&self, x: usize) -> &GammaElem {
        &self.sigma[x]
    }

    pub fn frobenius(&self, x: usize) -> &GammaElem {
        &self.frob[x]
    }

    pub fn gamma_mul(&self, a: &[u64], b: &[u64]) -> GammaElem {
        a.iter().zip(b).zip(&self.spec.gamma_orders).map(|((x, y), o)| (x + y) % o).collect()
    }

    pub fn gamma_pow(&self, a: &[u64], k: i64) -> GammaElem {
        a.iter()
            .zip(&self.spec.gamma_orders)
            .map(|(&x, &o)| (x as i128 * k as i128).rem_euclid(o as i128) as u64)
            .collect()
    }

    pub fn act(&self, g: &[u64], v: &[u64]) -> Vec<u64> {
        let mut out = v.to_vec();
        for (mat, &e) in self.gens.iter().zip(g) {
            for _ in 0..e {
                out = mat.mul_vec(&out).expect("dimension");
            }
        }
        out
    }

    pub fn act_ring(&self, r: &GammaRing, v: &[u64]) -> Vec<u64> {
        let m = self.modulus;
        let mut out = vec![0u64; v.len()];
        for (g, c) in r {
            let gv = self.act(g, v);
            for (o, x) in out.iter_mut().zip(gv) {
                *o = (*o + c % m * x) % m;
            }
        }
        out
    }

    /// `φ : G × H -> Γ`.
    pub fn phi(&self, sc: &Scenario, g: &[u64]) -> GammaElem {
        let k = sc.num_primes();
        let mut out = vec![0u64; self.spec.gamma_orders.len()];
        for (s, &e) in self.sigma.iter().zip(&g[..k]) {
            out = self.gamma_mul(&out, &self.gamma_pow(s, e as i64));
        }
        for (j, h) in self.spec.h_generators.iter().enumerate() {
            out = self.gamma_mul(&out, &self.gamma_pow(h, g[k + j] as i64));
        }
        out
    }

    pub fn dhat_sym(&self, sc: &Scenario, s: &Sym) -> Vec<u64> {
        self.act(&self.phi(sc, &s.elem), &self.dhat[&s.stalk])
    }

    pub fn dhat(&self, sc: &Scenario, a: &AVector) -> Vec<u64> {
        let m = self.modulus;
        let mut out = vec![0u64; self.dim()];
        for (s, c) in a {
            let c = reduce_big(c, m);
            if c == 0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.dhat_sym(sc, s)) {
                *o = (*o + c * x) % m;
            }
        }
        out
    }

    /// A `T/MT` coefficient as an element of `Z/M[Γ]`.
    fn t_ring(&self, sc: &Scenario, t: &TElem) -> GammaRing {
        let k = sc.num_primes();
        sc.h_elements()
            .into_iter()
            .zip(t)
            .map(|(h, c)| {
                let mut g = vec![0u64; k];
                g.extend(h);
                (self.phi(sc, &g), reduce_big(c, self.modulus))
            })
            .filter(|(_, c)| *c != 0)
            .collect()
    }

    fn ring_mul(&self, a: &GammaRing, b: &GammaRing) -> GammaRing {
        let m = self.modulus;
        let mut acc: BTreeMap<GammaElem, u64> = BTreeMap::new();
        for (g, c) in a {
            for (h, d) in b {
                let e = acc.entry(self.gamma_mul(g, h)).or_insert(0);
                *e = (*e + c * d) % m;
            }
        }
        acc.into_iter().filter(|(_, c)| *c != 0).collect()
    }

    /// `Σ_k c_k φ(t_k) g^k` for a polynomial with `T` coefficients.
    pub fn eval_poly(&self, sc: &Scenario, p: &[TElem], g: &[u64]) -> GammaRing {
        let mut out = Vec::new();
        for (k, c) in p.iter().enumerate() {
            let gk = vec![(self.gamma_pow(g, k as i64), 1u64)];
            out.extend(self.ring_mul(&self.t_ring(sc, c), &gk));
        }
        out
    }

    /// `p(x; Fr_x^{-1})` in `Z/M[Γ]`.
    pub fn p_frob(&self, sc: &Scenario, x: usize) -> GammaRing {
        self.eval_poly(sc, &sc.primes[x].p, &self.gamma_pow(&self.frob[x], -1))
    }

    /// `γ_z(x) = p(x; Fr_x^{-1}) - |G_z(x)| r_x(Fr_x^{-1})` in `Z/M[Γ]`.
    pub fn gamma_x(&self, sc: &Scenario, x: usize) -> GammaRing {
        let g = BigInt::from(sc.primes[x].order);
        let r: Vec<TElem> = sc.primes[x].r.iter().map(|c| c.iter().map(|v| -(v * &g)).collect()).collect();
        let mut out = self.p_frob(sc, x);
        out.extend(self.eval_poly(sc, &r, &self.gamma_pow(&self.frob[x], -1)));
        out
    }

    pub fn local_size(&self, x: usize) -> num_bigint::BigUint {
        self.local[x].module_size()
    }

    /// `N_{G_z(x)}` in `Z/M[Γ]`.
    pub fn norm_x(&self, sc: &Scenario, x: usize) -> GammaRing {
        (0..sc.primes[x].order).map(|j| (self.gamma_pow(&self.sigma[x], j as i64), 1)).collect()
    }

    pub fn norm_f(&self) -> GammaRing {
        if self.spec.norm.is_empty() {
            return ring_one(self.spec.gamma_orders.len());
        }
        let m = self.modulus as i64;
        self.spec.norm.iter().map(|(g, c)| (g.clone(), c.rem_euclid(m) as u64)).collect()
    }

    pub fn in_w(&self, v: &[u64]) -> bool {
        self.w.contains(v)
    }

    /// `κ(c)(γ) = (γ - 1) N_{F(1)/F} d̂(c̃)` for a lift `c̃ ∈ A_z` of `c ∈ U_z / M`.
    pub fn kappa(&self, sc: &Scenario, u: &UPresentation, c: &[u64], gamma: &[u64]) -> Result<Vec<u64>, MockError> {
        let lift = u.basis.from_coords(&u.section(&lift_vec(c)));
        Ok(self.kappa_of_lift(sc, &lift, gamma))
    }

    pub fn kappa_of_lift(&self, sc: &Scenario, lift: &AVector, gamma: &[u64]) -> Vec<u64> {
        let d = self.act_ring(&self.norm_f(), &self.dhat(sc, lift));
        let gd = self.act(gamma, &d);
        let m = self.modulus;
        gd.iter().zip(&d).map(|(a, b)| (a + m - b) % m).collect()
    }

    pub fn validate(&self, sc: &Scenario) -> ValidationReport {
        let checks = vec![
            self.check_actions(),
            self.check_w_stable(),
            self.check_restriction(sc),
            self.check_inertia_on_w(sc),
            self.check_dhat_well_defined(sc),
            self.check_equivariance(sc),
            self.check_annihilation(sc),
            self.check_decomposition_commute(sc),
            self.check_norm_relation(sc),
            self.check_locality(sc),
        ];
        let ok = checks.iter().all(|c| c.ok);
        ValidationReport { checks, ok }
    }

    fn result(name: &str, failure: Option<String>) -> CheckResult {
        CheckResult { name: name.into(), ok: failure.is_none(), detail: failure }
    }

    fn check_actions(&self) -> CheckResult {
        let n = self.dim();
        let id = ResMatrix::identity(self.modulus, n);
        for (i, a) in self.gens.iter().enumerate() {
            let mut p = id.clone();
            for _ in 0..self.spec.gamma_orders[i] {
                p = p.mul(a).expect("square");
            }
            if p.to_dense() != id.to_dense() {
                return Self::result(
                    "actions",
                    Some(format!("generator {i} does not have order {}", self.spec.gamma_orders[i])),
                );
            }
            for (j, b) in self.gens.iter().enumerate().skip(i + 1) {
                if a.mul(b).unwrap().to_dense() != b.mul(a).unwrap().to_dense() {
                    return Self::result("actions", Some(format!("generators {i} and {j} do not commute")));
                }
            }
        }
        Self::result("actions", None)
    }

    fn check_w_stable(&self) -> CheckResult {
        for (i, a) in self.gens.iter().enumerate() {
            for k in 0..self.w.h.rows() {
                if !self.in_w(&a.mul_vec(&self.w.h.row(k)).unwrap()) {
                    return Self::result("w-stable", Some(format!("generator {i} moves W")));
                }
            }
        }
        Self::result("w-stable", None)
    }

    fn check_restriction(&self, sc: &Scenario) -> CheckResult {
        let res = |g: &[u64]| -> GroupElem {
            let mut out = sc.identity();
            for (e, r) in g.iter().zip(&self.spec.restriction) {
                out = sc.group_mul(&out, &sc.group_pow(r, *e as i64));
            }
            out
        };
        for (i, (r, &o)) in self.spec.restriction.iter().zip(&self.spec.gamma_orders).enumerate() {
            if r.len() != sc.identity().len() || sc.group_pow(r, o as i64) != sc.identity() {
                return Self::result("restriction", Some(format!("generator {i} has no image of compatible order")));
            }
        }
        for x in 0..sc.num_primes() {
            if res(&self.sigma[x]) != sc.sigma(x) {
                return Self::result("restriction", Some(format!("sigma_{} restricts wrongly", sc.primes[x].id)));
            }
            if res(&self.frob[x]) != sc.frobenius(x) {
                return Self::result("restriction", Some(format!("Fr_{} restricts wrongly", sc.primes[x].id)));
            }
        }
        for (j, h) in self.spec.h_generators.iter().enumerate() {
            let mut want = sc.identity();
            want[sc.num_primes() + j] = 1 % sc.h_orders[j];
            if res(h) != want {
                return Self::result("restriction", Some(format!("H generator {j} restricts wrongly")));
            }
        }
        Self::result("restriction", None)
    }

    fn check_inertia_on_w(&self, sc: &Scenario) -> CheckResult {
        for x in 0..sc.num_primes() {
            for k in 0..self.w.h.rows() {
                let w = self.w.h.row(k);
                if self.act(&self.sigma[x], &w) != w {
                    return Self::result("inertia-trivial-on-W", Some(format!("sigma_{} moves W", sc.primes[x].id)));
                }
            }
        }
        Self::result("inertia-trivial-on-W", None)
    }

    fn check_dhat_well_defined(&self, sc: &Scenario) -> CheckResult {
        for (&z, v) in &self.dhat {
            for x in 0..sc.num_primes() {
                if z & (1 << x) == 0 && self.act(&self.sigma[x], v) != *v {
                    return Self::result(
                        "dhat-well-defined",
                        Some(format!("sigma_{} moves dhat[{}]", sc.primes[x].id, sc.mask_name(z))),
                    );
                }
            }
        }
        Self::result("dhat-well-defined", None)
    }

    /// `γ d̂(s) ≡ d̂(res(γ) s) mod W` for each generator `γ` of `Γ`.
    fn check_equivariance(&self, sc: &Scenario) -> CheckResult {
        let m = self.modulus;
        for (i, r) in self.spec.restriction.iter().enumerate() {
            let mut g = vec![0u64; self.spec.gamma_orders.len()];
            g[i] = 1;
            for (&z, v) in &self.dhat {
                let s = Sym::unit(sc, z).act(sc, r);
                let lhs = self.act(&g, v);
                let rhs = self.dhat_sym(sc, &s);
                let diff: Vec<u64> = lhs.iter().zip(&rhs).map(|(a, b)| (a + m - b) % m).collect();
                if !self.in_w(&diff) {
                    return Self::result(
                        "equivariance-mod-W",
                        Some(format!("generator {i} on dhat[{}]", sc.mask_name(z))),
                    );
                }
            }
        }
        Self::result("equivariance-mod-W", None)
    }

    /// `p(x; Fr_x^{-1})` kills `W`.
    fn check_annihilation(&self, sc: &Scenario) -> CheckResult {
        for x in 0..sc.num_primes() {
            let p = self.p_frob(sc, x);
            for k in 0..self.w.h.rows() {
                if self.act_ring(&p, &self.w.h.row(k)).iter().any(|&c| c != 0) {
                    return Self::result(
                        "annihilation",
                        Some(format!("p({}; Fr^-1) does not kill W", sc.primes[x].id)),
                    );
                }
            }
        }
        Self::result("annihilation", None)
    }

    /// `g g' γ d̂([z]) = g' g γ d̂([z])` for `g, g'` in the decomposition
    /// group at `x` (generated by `σ_z(x)` and `Fr_x`).
    fn check_decomposition_commute(&self, sc: &Scenario) -> CheckResult {
        let one = vec![0u64; self.spec.gamma_orders.len()];
        for x in 0..sc.num_primes() {
            let dec = [self.sigma[x].clone(), self.frob[x].clone()];
            for (&z, v) in &self.dhat {
                if z & (1 << x) == 0 {
                    continue;
                }
                for i in 0..self.gens.len() + 1 {
                    let mut gamma = one.clone();
                    if i < self.gens.len() {
                        gamma[i] = 1;
                    }
                    let gv = self.act(&gamma, v);
                    let a = self.act(&dec[0], &self.act(&dec[1], &gv));
                    let b = self.act(&dec[1], &self.act(&dec[0], &gv));
                    if a != b {
                        return Self::result(
                            "decomposition-commute",
                            Some(format!("at {} on dhat[{}]", sc.primes[x].id, sc.mask_name(z))),
                        );
                    }
                }
            }
        }
        Self::result("decomposition-commute", None)
    }

    /// `N_{G_z(x)} γ d̂([z]) = p(x; Fr_x^{-1}) γ d̂([z / z(x)])` for all `γ ∈ Γ`.
    fn check_norm_relation(&self, sc: &Scenario) -> CheckResult {
        let elems = self.gamma_elements();
        for x in 0..sc.num_primes() {
            let n = self.norm_x(sc, x);
            let p = self.p_frob(sc, x);
            for (&z, v) in &self.dhat {
                if z & (1 << x) == 0 {
                    continue;
                }
                let small = &self.dhat[&(z & !(1 << x))];
                let lhs = self.act_ring(&n, v);
                let rhs = self.act_ring(&p, small);
                for g in &elems {
                    if self.act(g, &lhs) != self.act(g, &rhs) {
                        return Self::result(
                            "norm-relation",
                            Some(format!("x = {}, z = {}, gamma = {:?}", sc.primes[x].id, sc.mask_name(z), g)),
                        );
                    }
                }
            }
        }
        Self::result("norm-relation", None)
    }

    /// `κ` of every `I_x` generator, evaluated at every generator of `Γ`,
    /// lies in the configured local submodule at `x`.
    fn check_locality(&self, sc: &Scenario) -> CheckResult {
        let ng = self.spec.gamma_orders.len();
        for x in 0..sc.num_primes() {
            for g in crate::distribution::ix_generators(sc, x, sc.full()) {
                for i in 0..ng {
                    let mut gamma = vec![0u64; ng];
                    gamma[i] = 1;
                    let k = self.kappa_of_lift(sc, &g, &gamma);
                    if k.iter().any(|&c| c != 0) && !self.local[x].contains(&k) {
                        return Self::result(
                            "locality",
                            Some(format!(
                                "I_{} generator escapes the local submodule at generator {i}",
                                sc.primes[x].id
                            )),
                        );
                    }
                }
            }
        }
        Self::result("locality", None)
    }
}

/// `Q_x` with `Q_x(t)(t - 1) = p(x;t) - p(x;1)`, coefficients reduced mod `M`.
pub fn q_polynomial(sc: &Scenario, x: usize) -> Vec<TElem> {
    q_of(&sc.primes[x].p, sc.h_size(), sc.modulus)
}

/// Synthetic division of `p(t) - p(1)` by `t - 1`, reduced mod `modulus`.
pub fn q_of(p: &[TElem], h_size: usize, modulus: u64) -> Vec<TElem> {
    let n = p.len();
    if n <= 1 {
        return vec![vec![BigInt::zero(); h_size]];
    }
    let mut q = vec![vec![BigInt::zero(); h_size]; n - 1];
    q[n - 2] = p[n - 1].clone();
    for k in (1..n - 1).rev() {
        q[k - 1] = p[k].iter().zip(&q[k]).map(|(a, b)| a + b).collect();
    }
    let m = BigInt::from(modulus);
    q.into_iter().map(|c| c.into_iter().map(|v| ((v % &m) + &m) % &m).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub label: String,
    pub value: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KolyvaginReport {
    pub family: String,
    pub identities_checked: usize,
    pub ok: bool,
    pub failures: Vec<String>,
}

/// `Q_x(Fr_x^{-1}) κ(c_{y/x})(Fr_x) = κ(c_y)(σ_z(x))` for all `x | y`.
pub fn verify_kolyvagin_recursion(
    sc: &Scenario,
    u: &UPresentation,
    model: &MockModel,
    family: &RecursiveFamily,
) -> Result<KolyvaginReport, MockError> {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (&y, cy) in &family.classes {
        for x in sc.primes_in(y) {
            let cyx = &family.classes[&(y & !(1 << x))];
            let (lhs, rhs) = kolyvagin_sides(sc, u, model, x, cy, cyx)?;
            checked += 1;
            if !model.in_w(&lhs) || !model.in_w(&rhs) {
                failures.push(format!("kappa value outside W at y = {}, x = {}", sc.mask_name(y), sc.primes[x].id));
            }
            if lhs != rhs {
                failures.push(format!(
                    "y = {}, x = {}: Q(Fr^-1) kappa(c_y/x)(Fr) = {:?}, kappa(c_y)(sigma) = {:?}",
                    sc.mask_name(y),
                    sc.primes[x].id,
                    lhs,
                    rhs
                ));
            }
        }
    }
    Ok(KolyvaginReport { family: family.name.clone(), identities_checked: checked, ok: failures.is_empty(), failures })
}

/// Validates the model first and refuses to verify against an invalid one.
pub fn verify_validated(
    sc: &Scenario,
    u: &UPresentation,
    model: &MockModel,
    family: &RecursiveFamily,
) -> Result<KolyvaginReport, MockError> {
    let v = model.validate(sc);
    if !v.ok {
        return Err(MockError::Invalid(
            v.checks
                .into_iter()
                .filter(|c| !c.ok)
                .map(|c| format!("{}: {}", c.name, c.detail.unwrap_or_default()))
                .collect(),
        ));
    }
    verify_kolyvagin_recursion(sc, u, model, family)
}

/// Both sides of the Kolyvagin recursion at `(y, x)`.
pub fn kolyvagin_sides(
    sc: &Scenario,
    u: &UPresentation,
    model: &MockModel,
    x: usize,
    cy: &[u64],
    cyx: &[u64],
) -> Result<(Vec<u64>, Vec<u64>), MockError> {
    let fr = model.frobenius(x).clone();
    let q = model.eval_poly(sc, &q_polynomial(sc, x), &model.gamma_pow(&fr, -1));
    let lhs = model.act_ring(&q, &model.kappa(sc, u, cyx, &fr)?);
    let rhs = model.kappa(sc, u, cy, model.sigma(x))?;
    Ok((lhs, rhs))
}

/// The intermediate expressions of the implication, each evaluated in `𝕎`.
pub fn replay_chain(
    sc: &Scenario,
    u: &UPresentation,
    model: &MockModel,
    x: usize,
    cy: &[u64],
    cyx: &[u64],
) -> Result<Vec<ChainStep>, MockError> {
    let m = model.modulus();
    let sub = |a: &[u64], b: &[u64]| -> Vec<u64> { a.iter().zip(b).map(|(p, q)| (p + m - q) % m).collect() };
    let fr = model.frobenius(x).clone();
    let fr_inv = model.gamma_pow(&fr, -1);
    let q = model.eval_poly(sc, &q_polynomial(sc, x), &fr_inv);
    let (lhs, rhs) = kolyvagin_sides(sc, u, model, x, cy, cyx)?;
    let lift = |c: &[u64]| u.basis.from_coords(&u.section(&lift_vec(c)));
    let nd_small = model.act_ring(&model.norm_f(), &model.dhat(sc, &lift(cyx)));
    let kappa_small = model.kappa(sc, u, cyx, &fr)?;
    let step1 = sub(&model.act_ring(&q, &model.act(&fr_inv, &kappa_small)), &rhs);
    let ones = vec![0u64; fr.len()];
    let one_minus_finv: GammaRing = vec![(ones.clone(), 1), (fr_inv.clone(), m - 1)];
    let step2 = sub(&model.act_ring(&q, &model.act_ring(&one_minus_finv, &nd_small)), &rhs);
    let p = model.p_frob(sc, x);
    let gamma_op = model.gamma_x(sc, x);
    let gr = model.gamma_x(sc, x).into_iter().chain(p.iter().map(|(g, c)| (g.clone(), (m - c) % m))).collect();
    let step3 = sub(&model.act_ring(&gamma_op, &nd_small), &model.act_ring(&p, &nd_small));
    let step4 = model.act_ring(&gr, &nd_small);
    Ok(vec![
        ChainStep { label: "Q(Fr^-1) kappa(c_y/x)(Fr) - kappa(c_y)(sigma)".into(), value: sub(&lhs, &rhs) },
        ChainStep { label: "Q(Fr^-1) Fr^-1 kappa(c_y/x)(Fr) - kappa(c_y)(sigma)".into(), value: step1 },
        ChainStep { label: "Q(Fr^-1)(1 - Fr^-1) N dhat(c_y/x) - (sigma - 1) N dhat(c_y)".into(), value: step2 },
        ChainStep { label: "(gamma - p(x;Fr^-1)) N dhat(c_y/x)".into(), value: step3 },
        ChainStep { label: "-|G| r(Fr^-1) N dhat(c_y/x)".into(), value: step4 },
    ])
}

/// Builds a random model: `Γ = G × H × C_M`, `𝕎 = Z/M[Γ]`, `W` the line of
/// `Γ`-invariants, `Fr_x = φ(Fr_x) f^{a_x}` with `f` generating `C_M`, and
/// `d̂` drawn from the solution space of the well-definedness,
/// equivariance-mod-`W` and norm-relation constraints.
pub fn generate_mock(sc: &Scenario, name: &str, seed: u64) -> Option<MockModel> {
    let m = sc.modulus;
    let k = sc.num_primes();
    let mut orders = sc.group_orders();
    orders.push(m);
    let ng = orders.len();
    let elems = enumerate_product(&orders);
    let index = |g: &[u64]| g.iter().zip(&orders).fold(0usize, |acc, (&e, &o)| acc * o as usize + e as usize);
    let dim = elems.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let action: Vec<Vec<(usize, usize, u64)>> = (0..ng)
        .map(|i| {
            elems
                .iter()
                .map(|g| {
                    let mut h = g.clone();
                    h[i] = (h[i] + 1) % orders[i];
                    (index(&h), index(g), 1)
                })
                .collect()
        })
        .collect();
    let mut restriction: Vec<GroupElem> = Vec::new();
    for i in 0..ng - 1 {
        let mut r = sc.identity();
        r[i] = 1 % orders[i];
        restriction.push(r);
    }
    restriction.push(sc.identity());
    let unit = |i: usize| {
        let mut g = vec![0u64; ng];
        g[i] = 1;
        g
    };
    let mut sigma = BTreeMap::new();
    let mut frobenius = BTreeMap::new();
    for x in 0..k {
        sigma.insert(sc.primes[x].id.clone(), unit(x));
        let mut f: GammaElem = sc.frobenius(x);
        f.push(rng.gen_range(1..m));
        frobenius.insert(sc.primes[x].id.clone(), f);
    }
    let h_generators = (0..sc.h_orders.len()).map(|j| unit(k + j)).collect();
    let ones = vec![1u64; dim];
    let zs = stalks(sc.full());
    let mut dhat = BTreeMap::new();
    for &z in &zs {
        dhat.insert(sc.mask_name(z), vec![0u64; dim]);
    }
    let local = BTreeMap::new();
    let mut spec = MockSpec {
        scenario: name.into(),
        modulus: m,
        gamma_orders: orders.clone(),
        restriction,
        sigma,
        h_generators,
        frobenius,
        norm: Vec::new(),
        dim,
        action,
        w_generators: vec![ones],
        dhat,
        local,
    };
    let skeleton = MockModel::from_spec(sc, spec.clone()).ok()?;
    // unknowns: d̂([z']) for each stalk, stacked
    let nz = zs.len();
    let pos: BTreeMap<Mask, usize> = zs.iter().enumerate().map(|(i, &z)| (z, i)).collect();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let op_matrix = |r: &GammaRing| -> Vec<Vec<u64>> {
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut e = vec![0u64; dim];
            e[j] = 1;
            cols.push(skeleton.act_ring(r, &e));
        }
        (0..dim).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
    };
    let push_block = |rows: &mut Vec<Vec<u64>>, blocks: &[(usize, &Vec<Vec<u64>>)]| {
        for i in 0..dim {
            let mut row = vec![0u64; nz * dim];
            for &(slot, mat) in blocks {
                for j in 0..dim {
                    row[slot * dim + j] = (row[slot * dim + j] + mat[i][j]) % m;
                }
            }
            if row.iter().any(|&c| c != 0) {
                rows.push(row);
            }
        }
    };
    for &z in &zs {
        for x in 0..k {
            if z & (1 << x) == 0 {
                let d = op_matrix(&vec![(unit(x), 1), (vec![0; ng], m - 1)]);
                push_block(&mut rows, &[(pos[&z], &d)]);
            }
        }
        // (f - 1) v ∈ W: successive coordinates of (f - 1) v agree
        let fm1 = op_matrix(&vec![(unit(ng - 1), 1), (vec![0; ng], m - 1)]);
        for i in 1..dim {
            let mut row = vec![0u64; nz * dim];
            for j in 0..dim {
                row[pos[&z] * dim + j] = (fm1[i][j] + m - fm1[0][j]) % m;
            }
            if row.iter().any(|&c| c != 0) {
                rows.push(row);
            }
        }
        for x in sc.primes_in(z) {
            let n = op_matrix(&skeleton.norm_x(sc, x));
            let p = op_matrix(&skeleton.p_frob(sc, x));
            let neg: Vec<Vec<u64>> = p.iter().map(|r| r.iter().map(|&c| (m - c) % m).collect()).collect();
            push_block(&mut rows, &[(pos[&z], &n), (pos[&(z & !(1 << x))], &neg)]);
        }
    }
    let sys = ResMatrix::from_dense(m, nz * dim, &rows);
    let ker = kernel_mod(&sys);
    if ker.rows() == 0 {
        return None;
    }
    let mut v = vec![0u64; nz * dim];
    for i in 0..ker.rows() {
        let c = rng.gen_range(0..m);
        for (a, b) in v.iter_mut().zip(ker.row(i)) {
            *a = (*a + c * b) % m;
        }
    }
    for &z in &zs {
        spec.dhat.insert(sc.mask_name(z), v[pos[&z] * dim..(pos[&z] + 1) * dim].to_vec());
    }
    // local at x: N_x^{-1}(γ_z(x) 𝕎) + W
    for x in 0..k {
        let n = op_matrix(&skeleton.norm_x(sc, x));
        let g = op_matrix(&skeleton.gamma_x(sc, x));
        let stacked: Vec<Vec<u64>> =
            n.iter().zip(&g).map(|(a, b)| a.iter().cloned().chain(b.iter().map(|&c| (m - c) % m)).collect()).collect();
        let ker = kernel_mod(&ResMatrix::from_dense(m, 2 * dim, &stacked));
        let mut gens: Vec<Vec<u64>> = (0..ker.rows()).map(|i| ker.row(i)[..dim].to_vec()).collect();
        gens.push(vec![1u64; dim]);
        let h = howell_form(&ResMatrix::from_dense(m, dim, &gens));
        let gens = (0..h.h.rows()).map(|i| h.h.row(i)).filter(|r| r.iter().any(|&c| c != 0)).collect();
        spec.local.insert(sc.primes[x].id.clone(), gens);
    }
    MockModel::from_spec(sc, spec).ok()
}
