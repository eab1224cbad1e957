//! Matrices over `Z/M` for composite `M`, Howell form, solving and kernels.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;

use super::LinError;

/// Sparse matrix over `Z/M`; stored entries lie in `[1, M)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ResMatrix {
    modulus: u64,
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), u64>,
}

impl fmt::Debug for ResMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ResMatrix(mod {}, {}x{})[", self.modulus, self.rows, self.cols)?;
        for (i, row) in self.to_dense().iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            let parts: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            write!(f, "{}", parts.join(" "))?;
        }
        write!(f, "]")
    }
}

#[inline]
fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
fn addmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
fn submod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

/// Reduces a signed integer into `[0, m)`.
pub fn reduce_i128(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

impl ResMatrix {
    pub fn zeros(modulus: u64, rows: usize, cols: usize) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        ResMatrix { modulus, rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(modulus: u64, n: usize) -> Self {
        let mut m = Self::zeros(modulus, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_dense(modulus: u64, cols: usize, data: &[Vec<u64>]) -> Self {
        let mut m = Self::zeros(modulus, data.len(), cols);
        for (i, row) in data.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v % modulus);
            }
        }
        m
    }

    pub fn from_i64(modulus: u64, data: &[&[i64]]) -> Self {
        let cols = data.first().map_or(0, |r| r.len());
        let dense: Vec<Vec<u64>> =
            data.iter().map(|r| r.iter().map(|&x| reduce_i128(x as i128, modulus)).collect()).collect();
        Self::from_dense(modulus, cols, &dense)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        let v = v % self.modulus;
        if v == 0 {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), v);
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: u64) {
        let cur = self.get(i, j);
        self.set(i, j, addmod(cur, v % self.modulus, self.modulus));
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &u64)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut d = vec![vec![0u64; self.cols]; self.rows];
        for (&(i, j), &v) in &self.entries {
            d[i][j] = v;
        }
        d
    }

    pub fn row(&self, i: usize) -> Vec<u64> {
        let mut r = vec![0u64; self.cols];
        for (&(_, j), &v) in self.entries.range((i, 0)..(i + 1, 0)) {
            r[j] = v;
        }
        r
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.modulus, self.cols, self.rows);
        for (&(i, j), &v) in &self.entries {
            t.entries.insert((j, i), v);
        }
        t
    }

    pub fn mul(&self, other: &ResMatrix) -> Result<ResMatrix, LinError> {
        if self.modulus != other.modulus {
            return Err(LinError::Modulus(self.modulus, other.modulus));
        }
        if self.cols != other.rows {
            return Err(LinError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let m = self.modulus;
        let mut by_row: Vec<Vec<(usize, u64)>> = vec![Vec::new(); other.rows];
        for (&(i, j), &v) in &other.entries {
            by_row[i].push((j, v));
        }
        let mut acc: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (&(i, k), &a) in &self.entries {
            for &(j, b) in &by_row[k] {
                let e = acc.entry((i, j)).or_insert(0);
                *e = addmod(*e, mulmod(a, b, m), m);
            }
        }
        acc.retain(|_, v| *v != 0);
        Ok(ResMatrix { modulus: m, rows: self.rows, cols: other.cols, entries: acc })
    }

    pub fn mul_vec(&self, v: &[u64]) -> Result<Vec<u64>, LinError> {
        if v.len() != self.cols {
            return Err(LinError::Dimension(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        let m = self.modulus;
        let mut out = vec![0u64; self.rows];
        for (&(i, j), &a) in &self.entries {
            out[i] = addmod(out[i], mulmod(a, v[j] % m, m), m);
        }
        Ok(out)
    }

    /// Row vector times matrix: `v^T * self`.
    pub fn vec_mul(&self, v: &[u64]) -> Result<Vec<u64>, LinError> {
        if v.len() != self.rows {
            return Err(LinError::Dimension(format!("row vector of length {} against {} rows", v.len(), self.rows)));
        }
        let m = self.modulus;
        let mut out = vec![0u64; self.cols];
        for (&(i, j), &a) in &self.entries {
            out[j] = addmod(out[j], mulmod(a, v[i] % m, m), m);
        }
        Ok(out)
    }

    pub fn vstack(&self, other: &ResMatrix) -> Result<ResMatrix, LinError> {
        if self.modulus != other.modulus {
            return Err(LinError::Modulus(self.modulus, other.modulus));
        }
        if self.cols != other.cols {
            return Err(LinError::Dimension("vstack column mismatch".into()));
        }
        let mut m = self.clone();
        m.rows += other.rows;
        for (&(i, j), &v) in &other.entries {
            m.entries.insert((i + self.rows, j), v);
        }
        Ok(m)
    }

    pub fn hstack(&self, other: &ResMatrix) -> Result<ResMatrix, LinError> {
        if self.modulus != other.modulus {
            return Err(LinError::Modulus(self.modulus, other.modulus));
        }
        if self.rows != other.rows {
            return Err(LinError::Dimension("hstack row mismatch".into()));
        }
        let mut m = self.clone();
        m.cols += other.cols;
        for (&(i, j), &v) in &other.entries {
            m.entries.insert((i, j + self.cols), v);
        }
        Ok(m)
    }
}

fn xgcd_i128(a: i128, b: i128) -> (i128, i128, i128) {
    let e = a.extended_gcd(&b);
    if e.gcd < 0 {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// A unit `u` of `Z/m` with `u * g == gcd(g, m)` (mod m), for `g != 0`.
fn normalizing_unit(g: u64, m: u64) -> u64 {
    let d = g.gcd(&m);
    let m1 = m / d;
    let g1 = (g / d) % m1;
    let (_, inv, _) = xgcd_i128(g1 as i128, m1 as i128);
    let mut u = reduce_i128(inv, m1);
    if u == 0 {
        u = 1;
    }
    while u.gcd(&m) != 1 {
        u += m1;
    }
    u % m
}

/// Row vector paired with the combination of input rows producing it.
#[derive(Clone)]
struct TrackedRow {
    v: Vec<u64>,
    t: Vec<u64>,
}

impl TrackedRow {
    fn scale(&self, s: u64, m: u64) -> TrackedRow {
        TrackedRow {
            v: self.v.iter().map(|&x| mulmod(x, s, m)).collect(),
            t: self.t.iter().map(|&x| mulmod(x, s, m)).collect(),
        }
    }

    fn lincomb(a: &TrackedRow, sa: u64, b: &TrackedRow, sb: u64, m: u64) -> TrackedRow {
        let comb = |x: &[u64], y: &[u64]| -> Vec<u64> {
            x.iter().zip(y.iter()).map(|(&p, &q)| addmod(mulmod(p, sa, m), mulmod(q, sb, m), m)).collect()
        };
        TrackedRow { v: comb(&a.v, &b.v), t: comb(&a.t, &b.t) }
    }

    fn sub_multiple(&mut self, other: &TrackedRow, q: u64, m: u64) {
        if q == 0 {
            return;
        }
        for (x, &y) in self.v.iter_mut().zip(other.v.iter()) {
            *x = submod(*x, mulmod(y, q, m), m);
        }
        for (x, &y) in self.t.iter_mut().zip(other.t.iter()) {
            *x = submod(*x, mulmod(y, q, m), m);
        }
    }

    fn is_zero(&self) -> bool {
        self.v.iter().all(|&x| x == 0)
    }
}

/// Howell form `h` of a matrix together with `transform` such that
/// `h = transform * m`.
#[derive(Clone, Debug)]
pub struct Howell {
    pub h: ResMatrix,
    pub transform: ResMatrix,
    pivots: Vec<(usize, u64)>,
}

impl Howell {
    /// Pivot columns and pivot values (each a divisor of the modulus).
    pub fn pivots(&self) -> &[(usize, u64)] {
        &self.pivots
    }

    /// Cardinality of the row module.
    pub fn module_size(&self) -> BigUint {
        let m = self.h.modulus();
        self.pivots.iter().fold(BigUint::one(), |acc, &(_, d)| acc * BigUint::from(m / d))
    }

    /// `log_M` of the module size when it is an exact power of `M`.
    pub fn free_rank(&self) -> Option<usize> {
        log_modulus(&self.module_size(), self.h.modulus())
    }

    /// Greedy reduction of `v` against the rows; returns `(remainder, coefficients)`.
    pub fn reduce(&self, v: &[u64]) -> (Vec<u64>, Vec<u64>) {
        let m = self.h.modulus();
        let mut v: Vec<u64> = v.iter().map(|&x| x % m).collect();
        let mut coeffs = vec![0u64; self.pivots.len()];
        for (k, &(c, d)) in self.pivots.iter().enumerate() {
            let x = v[c];
            if x == 0 || !x.is_multiple_of(d) {
                continue;
            }
            let q = x / d;
            let row = self.h.row(k);
            for (a, &b) in v.iter_mut().zip(row.iter()) {
                *a = submod(*a, mulmod(b, q, m), m);
            }
            coeffs[k] = q;
        }
        (v, coeffs)
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        self.reduce(v).0.iter().all(|&x| x == 0)
    }
}

/// `log_m(size)` when `size` is an exact power of `m`.
pub fn log_modulus(size: &BigUint, m: u64) -> Option<usize> {
    let mut acc = BigUint::one();
    let mb = BigUint::from(m);
    let mut k = 0;
    while &acc < size {
        acc *= &mb;
        k += 1;
    }
    (&acc == size).then_some(k)
}

/// Howell form over `Z/M`: the canonical generating set of the row module.
pub fn howell_form(m: &ResMatrix) -> Howell {
    let modulus = m.modulus;
    let (r, c) = (m.rows, m.cols);
    let mut work: Vec<TrackedRow> = (0..r)
        .map(|i| {
            let mut t = vec![0u64; r];
            t[i] = 1;
            TrackedRow { v: m.row(i), t }
        })
        .filter(|row| !row.is_zero())
        .collect();
    let mut result: Vec<TrackedRow> = Vec::new();
    let mut pivots: Vec<(usize, u64)> = Vec::new();
    for col in 0..c {
        let (mut active, rest): (Vec<TrackedRow>, Vec<TrackedRow>) = work.into_iter().partition(|row| row.v[col] != 0);
        work = rest;
        if active.is_empty() {
            continue;
        }
        let mut pivot = active.remove(0);
        for other in active {
            let a = pivot.v[col] as i128;
            let b = other.v[col] as i128;
            let (g, s, t) = xgcd_i128(a, b);
            let s = reduce_i128(s, modulus);
            let t = reduce_i128(t, modulus);
            let bg = reduce_i128(b / g, modulus);
            let ag = reduce_i128(-(a / g), modulus);
            let np = TrackedRow::lincomb(&pivot, s, &other, t, modulus);
            let no = TrackedRow::lincomb(&pivot, bg, &other, ag, modulus);
            pivot = np;
            if !no.is_zero() {
                work.push(no);
            }
        }
        let u = normalizing_unit(pivot.v[col], modulus);
        pivot = pivot.scale(u, modulus);
        let d = pivot.v[col];
        let ann = pivot.scale(modulus / d, modulus);
        if !ann.is_zero() {
            work.push(ann);
        }
        result.push(pivot);
        pivots.push((col, d));
    }
    for i in 0..result.len() {
        let (c_i, d_i) = pivots[i];
        let pivot_row = result[i].clone();
        for row in result.iter_mut().take(i) {
            let q = row.v[c_i] / d_i;
            row.sub_multiple(&pivot_row, q, modulus);
        }
    }
    let hv: Vec<Vec<u64>> = result.iter().map(|row| row.v.clone()).collect();
    let tv: Vec<Vec<u64>> = result.iter().map(|row| row.t.clone()).collect();
    Howell { h: ResMatrix::from_dense(modulus, c, &hv), transform: ResMatrix::from_dense(modulus, r, &tv), pivots }
}

/// Solves `m * v = rhs` over `Z/M`.
pub fn solve_mod(m: &ResMatrix, rhs: &[u64]) -> Result<Option<Vec<u64>>, LinError> {
    if rhs.len() != m.rows {
        return Err(LinError::Dimension(format!("right-hand side of length {} for {} rows", rhs.len(), m.rows)));
    }
    let hw = howell_form(&m.transpose());
    let (rem, coeffs) = hw.reduce(rhs);
    if rem.iter().any(|&x| x != 0) {
        return Ok(None);
    }
    Ok(Some(hw.transform.vec_mul(&coeffs)?))
}

/// Generators (in Howell form) of `{ v : m * v = 0 }`.
pub fn kernel_mod(m: &ResMatrix) -> ResMatrix {
    let modulus = m.modulus;
    let (r, c) = (m.rows, m.cols);
    let aug = m.transpose().hstack(&ResMatrix::identity(modulus, c)).expect("shapes agree");
    let hw = howell_form(&aug);
    let mut gens: Vec<Vec<u64>> = Vec::new();
    for (k, &(col, _)) in hw.pivots().iter().enumerate() {
        if col >= r {
            gens.push(hw.h.row(k)[r..].to_vec());
        }
    }
    howell_form(&ResMatrix::from_dense(modulus, c, &gens)).h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn howell_already_canonical() {
        let m = ResMatrix::from_i64(4, &[&[2]]);
        let h = howell_form(&m);
        assert_eq!(h.h.to_dense(), vec![vec![2]]);
    }

    #[test]
    fn howell_of_empty() {
        let m = ResMatrix::zeros(6, 0, 3);
        let h = howell_form(&m);
        assert_eq!(h.h.rows(), 0);
        assert_eq!(h.module_size(), BigUint::one());
    }

    #[test]
    fn howell_adds_annihilator_rows() {
        // The row [2, 1] over Z/4 also generates [0, 2].
        let m = ResMatrix::from_i64(4, &[&[2, 1]]);
        let h = howell_form(&m);
        assert_eq!(h.h.to_dense(), vec![vec![2, 1], vec![0, 2]]);
        assert_eq!(h.module_size(), BigUint::from(4u32));
    }

    #[test]
    fn transform_reproduces_form() {
        let m = ResMatrix::from_i64(12, &[&[4, 6, 3], &[8, 2, 9], &[0, 3, 6]]);
        let h = howell_form(&m);
        assert_eq!(h.transform.mul(&m).unwrap(), h.h);
    }

    #[test]
    fn solve_small() {
        let m = ResMatrix::from_i64(4, &[&[2]]);
        let v = solve_mod(&m, &[2]).unwrap().unwrap();
        assert_eq!(m.mul_vec(&v).unwrap(), vec![2]);
        assert_eq!(solve_mod(&m, &[1]).unwrap(), None);
        assert!(solve_mod(&m, &[1, 2]).is_err());
    }

    #[test]
    fn kernel_trivial_cases() {
        let id = ResMatrix::identity(5, 3);
        assert_eq!(kernel_mod(&id).rows(), 0);
        let z = ResMatrix::zeros(5, 2, 3);
        let k = kernel_mod(&z);
        assert_eq!(howell_form(&k).free_rank(), Some(3));
    }

    #[test]
    fn normalizing_unit_hits_gcd() {
        for m in 2..40u64 {
            for g in 1..m {
                let u = normalizing_unit(g, m);
                assert_eq!(u.gcd(&m), 1);
                assert_eq!(mulmod(u, g, m), g.gcd(&m));
            }
        }
    }
}
