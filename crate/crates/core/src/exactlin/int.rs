//! Integer matrices, Smith and Hermite normal forms, and integer solving.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::LinError;

/// Sparse integer matrix in coordinate form. Zero entries are never stored.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix({}x{})[", self.rows, self.cols)?;
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

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[Vec<BigInt>]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, row) in data.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense matrix");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn from_i64(data: &[&[i64]]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let dense: Vec<Vec<BigInt>> = data.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        Self::from_dense(rows, cols, &dense)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> BigInt {
        self.entries.get(&(i, j)).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        if v.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), v);
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: &BigInt) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &BigInt)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<BigInt>> {
        let mut d = vec![vec![BigInt::zero(); self.cols]; self.rows];
        for (&(i, j), v) in &self.entries {
            d[i][j] = v.clone();
        }
        d
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        let mut r = vec![BigInt::zero(); self.cols];
        for (&(_, j), v) in self.entries.range((i, 0)..(i + 1, 0)) {
            r[j] = v.clone();
        }
        r
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (&(i, j), v) in &self.entries {
            t.entries.insert((j, i), v.clone());
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix, LinError> {
        if self.cols != other.rows {
            return Err(LinError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut by_row: Vec<Vec<(usize, &BigInt)>> = vec![Vec::new(); other.rows];
        for (&(i, j), v) in &other.entries {
            by_row[i].push((j, v));
        }
        let mut acc: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        for (&(i, k), a) in &self.entries {
            for &(j, b) in &by_row[k] {
                *acc.entry((i, j)).or_insert_with(BigInt::zero) += a * b;
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(IntMatrix { rows: self.rows, cols: other.cols, entries: acc })
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<Vec<BigInt>, LinError> {
        if v.len() != self.cols {
            return Err(LinError::Dimension(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        let mut out = vec![BigInt::zero(); self.rows];
        for (&(i, j), a) in &self.entries {
            out[i] += a * &v[j];
        }
        Ok(out)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &IntMatrix) -> Result<IntMatrix, LinError> {
        if self.cols != other.cols {
            return Err(LinError::Dimension("vstack column mismatch".into()));
        }
        let mut m = self.clone();
        m.rows += other.rows;
        for (&(i, j), v) in &other.entries {
            m.entries.insert((i + self.rows, j), v.clone());
        }
        Ok(m)
    }

    /// Places `other` to the right of `self`.
    pub fn hstack(&self, other: &IntMatrix) -> Result<IntMatrix, LinError> {
        if self.rows != other.rows {
            return Err(LinError::Dimension("hstack row mismatch".into()));
        }
        let mut m = self.clone();
        m.cols += other.cols;
        for (&(i, j), v) in &other.entries {
            m.entries.insert((i, j + self.cols), v.clone());
        }
        Ok(m)
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<BigInt, LinError> {
        if self.rows != self.cols {
            return Err(LinError::Dimension("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut a = self.to_dense();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        Ok(sign * a[n - 1][n - 1].clone())
    }
}

/// Result of [`smith_normal_form`]: `left * m * right` is diagonal with `diag`.
#[derive(Clone, Debug)]
pub struct Snf {
    pub left: IntMatrix,
    pub diag: Vec<BigInt>,
    pub right: IntMatrix,
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| !d.is_zero()).count()
    }
}

fn find_pivot(a: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in a.iter().enumerate().skip(t) {
        for (j, v) in row.iter().enumerate().skip(t) {
            if v.is_zero() {
                continue;
            }
            match best {
                None => best = Some((i, j)),
                Some((bi, bj)) => {
                    if v.abs() < a[bi][bj].abs() {
                        best = Some((i, j));
                    }
                }
            }
        }
    }
    best
}

fn row_axpy(a: &mut [Vec<BigInt>], dst: usize, src: usize, q: &BigInt) {
    if q.is_zero() {
        return;
    }
    let (d, s) = if dst < src {
        let (lo, hi) = a.split_at_mut(src);
        (&mut lo[dst], &hi[0])
    } else {
        let (lo, hi) = a.split_at_mut(dst);
        (&mut hi[0], &lo[src])
    };
    for (x, y) in d.iter_mut().zip(s.iter()) {
        if !y.is_zero() {
            *x -= q * y;
        }
    }
}

fn col_axpy(a: &mut [Vec<BigInt>], dst: usize, src: usize, q: &BigInt) {
    if q.is_zero() {
        return;
    }
    for row in a.iter_mut() {
        if !row[src].is_zero() {
            let v = q * &row[src];
            row[dst] -= v;
        }
    }
}

/// Smith normal form with unimodular transforms.
///
/// Pivots are the entry of least absolute value in the active block, ties
/// going to the smallest row index and then the smallest column index.
pub fn smith_normal_form(m: &IntMatrix) -> Snf {
    let (r, c) = (m.rows, m.cols);
    let mut a = m.to_dense();
    let mut left = IntMatrix::identity(r).to_dense();
    let mut right = IntMatrix::identity(c).to_dense();
    let steps = r.min(c);
    for t in 0..steps {
        while let Some((pi, pj)) = find_pivot(&a, t) {
            if pi != t {
                a.swap(pi, t);
                left.swap(pi, t);
            }
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(pj, t);
                }
                for row in right.iter_mut() {
                    row.swap(pj, t);
                }
            }
            let mut clean = true;
            for i in t + 1..r {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = &a[i][t] / &a[t][t];
                row_axpy(&mut a, i, t, &q);
                row_axpy(&mut left, i, t, &q);
                if !a[i][t].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..c {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = &a[t][j] / &a[t][t];
                col_axpy(&mut a, j, t, &q);
                col_axpy(&mut right, j, t, &q);
                if !a[t][j].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let pivot = a[t][t].clone();
            let bad = (t + 1..r).find(|&i| a[i][t + 1..].iter().any(|v| !(v % &pivot).is_zero()));
            match bad {
                Some(i) => {
                    let minus_one = -BigInt::one();
                    row_axpy(&mut a, t, i, &minus_one);
                    row_axpy(&mut left, t, i, &minus_one);
                }
                None => break,
            }
        }
        if a[t][t].is_negative() {
            for v in a[t].iter_mut() {
                *v = -v.clone();
            }
            for v in left[t].iter_mut() {
                *v = -v.clone();
            }
        }
    }
    let diag = (0..steps).map(|i| a[i][i].clone()).collect();
    Snf { left: IntMatrix::from_dense(r, r, &left), diag, right: IntMatrix::from_dense(c, c, &right) }
}

/// Rank over the integers (equivalently over the rationals).
pub fn rank(m: &IntMatrix) -> usize {
    hermite_normal_form(m).rows()
}

fn xgcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Row-style Hermite normal form: upper echelon, positive pivots, entries
/// above each pivot reduced into `[0, pivot)`. Zero rows are dropped.
pub fn hermite_normal_form(m: &IntMatrix) -> IntMatrix {
    let c = m.cols;
    let mut a = m.to_dense();
    let r = a.len();
    let mut p = 0;
    for col in 0..c {
        if p >= r {
            break;
        }
        for i in p + 1..r {
            if a[i][col].is_zero() {
                continue;
            }
            let (g, s, t) = xgcd(&a[p][col], &a[i][col]);
            let ap = &a[p][col] / &g;
            let ai = &a[i][col] / &g;
            let rp = a[p].clone();
            let ri = a[i].clone();
            for j in col..c {
                let np = &s * &rp[j] + &t * &ri[j];
                let ni = &ai * &rp[j] - &ap * &ri[j];
                a[p][j] = np;
                a[i][j] = ni;
            }
        }
        if a[p][col].is_zero() {
            continue;
        }
        if a[p][col].is_negative() {
            for v in a[p].iter_mut() {
                *v = -v.clone();
            }
        }
        let pv = a[p][col].clone();
        for k in 0..p {
            if a[k][col].is_zero() {
                continue;
            }
            let q = a[k][col].div_floor(&pv);
            row_axpy(&mut a, k, p, &q);
        }
        p += 1;
    }
    a.truncate(p);
    IntMatrix::from_dense(p, c, &a)
}

/// A sublattice of `Z^n` held in Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    hnf: IntMatrix,
}

impl Lattice {
    pub fn from_rows(m: &IntMatrix) -> Self {
        Lattice { hnf: hermite_normal_form(m) }
    }

    pub fn basis(&self) -> &IntMatrix {
        &self.hnf
    }

    pub fn rank(&self) -> usize {
        self.hnf.rows()
    }

    pub fn dim(&self) -> usize {
        self.hnf.cols()
    }

    /// Reduces `v` against the basis; returns the remainder (zero iff member).
    pub fn reduce(&self, v: &[BigInt]) -> Vec<BigInt> {
        let mut v = v.to_vec();
        for i in 0..self.hnf.rows() {
            let row = self.hnf.row(i);
            let Some(pc) = row.iter().position(|x| !x.is_zero()) else { continue };
            if v[pc].is_zero() {
                continue;
            }
            let (q, _) = v[pc].div_mod_floor(&row[pc]);
            if q.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(row.iter()) {
                *x -= &q * y;
            }
        }
        v
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.reduce(v).iter().all(|x| x.is_zero())
    }

    pub fn contains_lattice(&self, other: &Lattice) -> bool {
        (0..other.hnf.rows()).all(|i| self.contains(&other.hnf.row(i)))
    }

    /// Index in `Z^n` when the lattice has full rank.
    pub fn index(&self) -> Option<BigInt> {
        if self.rank() != self.dim() {
            return None;
        }
        let mut idx = BigInt::one();
        for i in 0..self.hnf.rows() {
            let row = self.hnf.row(i);
            let pv = row.iter().find(|x| !x.is_zero()).cloned().unwrap_or_else(BigInt::one);
            idx *= pv;
        }
        Some(idx)
    }
}

/// Inverse of a unimodular square matrix, or `None` if `m` is not unimodular.
pub fn inverse_unimodular(m: &IntMatrix) -> Option<IntMatrix> {
    if m.rows != m.cols {
        return None;
    }
    let n = m.rows;
    let aug = m.hstack(&IntMatrix::identity(n)).ok()?;
    let h = hermite_normal_form(&aug);
    if h.rows() != n {
        return None;
    }
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { BigInt::one() } else { BigInt::zero() };
            if h.get(i, j) != expect {
                return None;
            }
        }
    }
    let mut inv = IntMatrix::zeros(n, n);
    for (&(i, j), v) in h.entries() {
        if j >= n {
            inv.set(i, j - n, v.clone());
        }
    }
    Some(inv)
}

/// Finds an integer solution of `m * v = rhs`, or `None` when none exists.
pub fn solve_int(m: &IntMatrix, rhs: &[BigInt]) -> Result<Option<Vec<BigInt>>, LinError> {
    if rhs.len() != m.rows {
        return Err(LinError::Dimension(format!("right-hand side of length {} for {} rows", rhs.len(), m.rows)));
    }
    let snf = smith_normal_form(m);
    let lb = snf.left.mul_vec(rhs)?;
    let mut w = vec![BigInt::zero(); m.cols];
    for (i, b) in lb.iter().enumerate() {
        let d = snf.diag.get(i).cloned().unwrap_or_else(BigInt::zero);
        if d.is_zero() {
            if !b.is_zero() {
                return Ok(None);
            }
            continue;
        }
        let (q, rem) = b.div_mod_floor(&d);
        if !rem.is_zero() {
            return Ok(None);
        }
        w[i] = q;
    }
    Ok(Some(snf.right.mul_vec(&w)?))
}
