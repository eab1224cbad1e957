use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use unidist::exactlin::*;

fn all_vectors(m: u64, n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            for x in 0..m {
                let mut w = v.clone();
                w.push(x);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

fn row_span(m: &ResMatrix) -> BTreeSet<Vec<u64>> {
    let modulus = m.modulus();
    all_vectors(modulus, m.rows())
        .into_iter()
        .map(|c| m.vec_mul(&c).unwrap())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|v| v.into_iter().map(|x| x % modulus).collect())
        .collect()
}

#[test]
fn howell_mod4_matches_enumeration() {
    let m = ResMatrix::from_i64(4, &[&[1, 1], &[0, 2]]);
    let h = howell_form(&m);
    let span = row_span(&m);
    assert_eq!(span.len(), 8);
    assert_eq!(h.module_size(), BigUint::from(span.len()));
    assert_eq!(row_span(&h.h), span);
    for v in all_vectors(4, 2) {
        assert_eq!(h.contains(&v), span.contains(&v), "{v:?}");
    }
}

#[test]
fn solve_mod9_matches_search() {
    let m = ResMatrix::from_i64(9, &[&[3, 6], &[1, 2]]);
    for rhs in all_vectors(9, 2) {
        let found = all_vectors(9, 2).into_iter().find(|x| m.mul_vec(x).unwrap() == rhs);
        let got = solve_mod(&m, &rhs).unwrap();
        assert_eq!(got.is_some(), found.is_some(), "rhs {rhs:?}");
        if let Some(x) = got {
            assert_eq!(m.mul_vec(&x).unwrap(), rhs);
        }
    }
}

#[test]
fn cyclic_difference_kernel_mod3() {
    // sigma - 1 acting on Z/3[C3]
    let m = ResMatrix::from_i64(3, &[&[-1, 0, 1], &[1, -1, 0], &[0, 1, -1]]);
    let k = kernel_mod(&m);
    let brute: Vec<Vec<u64>> =
        all_vectors(3, 3).into_iter().filter(|v| m.mul_vec(v).unwrap().iter().all(|&x| x == 0)).collect();
    assert_eq!(brute.len(), 3);
    assert_eq!(howell_form(&k).module_size(), BigUint::from(3u32));
    assert_eq!(howell_form(&k).free_rank(), Some(1));
    assert_eq!(row_span(&k), brute.into_iter().collect());
}

#[test]
fn smith_form_of_known_matrix() {
    let m = IntMatrix::from_i64(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
    let s = smith_normal_form(&m);
    assert_eq!(s.diag, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
}

fn small_res_matrix() -> impl Strategy<Value = ResMatrix> {
    (2u64..=9, 1usize..=3, 1usize..=4).prop_flat_map(|(m, r, c)| {
        proptest::collection::vec(proptest::collection::vec(0..m, c), r)
            .prop_map(move |rows| ResMatrix::from_dense(m, c, &rows))
    })
}

fn small_int_matrix() -> impl Strategy<Value = IntMatrix> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(-6i64..=6, c), r).prop_map(move |rows| {
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            IntMatrix::from_i64(&refs)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn howell_is_idempotent(m in small_res_matrix()) {
        let h1 = howell_form(&m);
        let h2 = howell_form(&h1.h);
        prop_assert_eq!(&h1.h, &h2.h);
        prop_assert_eq!(h1.transform.mul(&m).unwrap(), h1.h.clone());
    }

    #[test]
    fn howell_size_matches_span(m in small_res_matrix()) {
        prop_assume!(m.rows() <= 3 && m.modulus() <= 6);
        let span = row_span(&m);
        prop_assert_eq!(howell_form(&m).module_size(), BigUint::from(span.len()));
    }

    #[test]
    fn solve_substitutes(m in small_res_matrix(), seed in proptest::collection::vec(0u64..9, 4)) {
        let x: Vec<u64> = seed[..m.cols()].to_vec();
        let rhs = m.mul_vec(&x).unwrap();
        let sol = solve_mod(&m, &rhs).unwrap().expect("consistent system");
        prop_assert_eq!(m.mul_vec(&sol).unwrap(), rhs);
    }

    #[test]
    fn kernel_equals_brute_force(m in small_res_matrix()) {
        let k = kernel_mod(&m);
        let brute: BTreeSet<Vec<u64>> = all_vectors(m.modulus(), m.cols())
            .into_iter()
            .filter(|v| m.mul_vec(v).unwrap().iter().all(|&x| x == 0))
            .collect();
        let hk = howell_form(&k);
        prop_assert_eq!(hk.module_size(), BigUint::from(brute.len()));
        for v in &brute {
            prop_assert!(hk.contains(v));
        }
    }

    #[test]
    fn smith_decomposition_is_unimodular(m in small_int_matrix()) {
        let s = smith_normal_form(&m);
        let prod = s.left.mul(&m).unwrap().mul(&s.right).unwrap();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let expect = if i == j && i < s.diag.len() { s.diag[i].clone() } else { BigInt::from(0) };
                prop_assert_eq!(prod.get(i, j), expect);
            }
        }
        let dl = s.left.determinant().unwrap();
        let dr = s.right.determinant().unwrap();
        prop_assert!(dl == BigInt::from(1) || dl == BigInt::from(-1));
        prop_assert!(dr == BigInt::from(1) || dr == BigInt::from(-1));
        for w in s.diag.windows(2) {
            if w[1] != BigInt::from(0) {
                prop_assert_eq!(&w[1] % &w[0], BigInt::from(0));
            }
        }
    }

    #[test]
    fn hermite_preserves_lattice(m in small_int_matrix()) {
        let l1 = Lattice::from_rows(&m);
        let l2 = Lattice::from_rows(&l1.basis().clone());
        prop_assert!(l1.contains_lattice(&l2) && l2.contains_lattice(&l1));
        for i in 0..m.rows() {
            prop_assert!(l1.contains(&m.row(i)));
        }
        prop_assert_eq!(rank(&m), smith_normal_form(&m).rank());
    }
}
