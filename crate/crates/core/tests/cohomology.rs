use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;
use unidist::bundled;
use unidist::cohomology::*;
use unidist::complex::{apply_total, project_q, KComplex};
use unidist::distribution::UPresentation;
use unidist::site::{stalks, Scenario};

fn all() -> Vec<(&'static str, Scenario)> {
    bundled::NAMES.iter().map(|&n| (n, bundled::scenario(n).unwrap())).collect()
}

/// Fixed points by brute force over all of `U/MU` (only used when small).
fn brute_fixed_count(sc: &Scenario, u: &UPresentation) -> usize {
    let f = fixed_point_matrix(sc, u);
    let m = sc.modulus;
    let n = u.rank;
    let mut count = 0;
    let mut v = vec![0u64; n];
    loop {
        if f.mul_vec(&v).unwrap().iter().all(|&x| x == 0) {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return count;
            }
            v[i] += 1;
            if v[i] < m {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn h0_rank_counts() {
    let expect = [("S1", 2), ("S2", 4), ("S3", 2), ("S4", 8)];
    for (name, r) in expect {
        let sc = bundled::scenario(name).unwrap();
        let z = sc.full();
        let (lo, hi) = KComplex::default_window(&sc, z);
        let rep = h0_crosscheck(&sc, z, lo, hi).unwrap();
        assert_eq!(rep.expected_rank, r, "{name}");
        assert_eq!(rep.direct_rank, Some(r), "{name}");
        assert_eq!(rep.via_k_rank, Some(r), "{name}");
        assert_eq!(rep.via_bar_rank, Some(r), "{name}");
        assert!(rep.ok);
    }
}

#[test]
fn h0_crosscheck_every_level() {
    for (name, sc) in all() {
        for z in stalks(sc.full()) {
            let (lo, hi) = KComplex::default_window(&sc, z);
            let rep = h0_crosscheck(&sc, z, lo, hi).unwrap();
            assert!(rep.ok, "{name}: {rep:?}");
        }
    }
}

#[test]
fn direct_h0_against_enumeration() {
    for name in ["S1", "S3"] {
        let sc = bundled::scenario(name).unwrap();
        let u = UPresentation::build(&sc, sc.full()).unwrap();
        let size = h0_direct(&sc, &u).module_size();
        assert_eq!(size, brute_fixed_count(&sc, &u).into(), "{name}");
    }
}

#[test]
fn trivial_level_is_t_mod_m() {
    for (name, sc) in all() {
        let u = UPresentation::build(&sc, 0).unwrap();
        assert_eq!(h0_direct(&sc, &u).free_rank(), Some(sc.h_size()), "{name}");
    }
}

#[test]
fn h0_classes_are_fixed() {
    for (name, sc) in all() {
        let u = UPresentation::build(&sc, sc.full()).unwrap();
        for c in h0_classes(&sc, &u) {
            assert!(is_fixed(&sc, &u, &c.rep), "{name}");
        }
    }
}

#[test]
fn lifts_are_cocycles_over_their_seed() {
    let m = |sc: &Scenario| BigInt::from(sc.modulus);
    for (name, sc) in all() {
        for z in stalks(sc.full()) {
            let b = CanonicalBasis::build(&sc, z).unwrap();
            assert_eq!(b.ys.len(), 1 << z.count_ones());
            for (&y, c) in &b.lifts {
                assert!(apply_total(&sc, z, c).values().all(|v| (v % m(&sc)).is_zero()), "{name} y={y}");
                let q = project_q(c, sc.modulus);
                assert_eq!(q.len(), 1);
                assert_eq!(q.get(&q_seed(&sc, y)), Some(&1));
                assert!(c.keys().all(|s| s.total_degree() == 0));
            }
        }
    }
}

#[test]
fn classes_independent_of_solver_order() {
    for (name, sc) in all() {
        let z = sc.full();
        let (lo, hi) = KComplex::default_window(&sc, z);
        let k = KComplex::new(&sc, z, lo, hi);
        let a = CanonicalBasis::build_in(&sc, &k, false).unwrap();
        let b = CanonicalBasis::build_in(&sc, &k, true).unwrap();
        assert_eq!(a.classes, b.classes, "{name}");
    }
}

#[test]
fn coordinate_examples() {
    let sc = bundled::scenario("S1").unwrap();
    let b = CanonicalBasis::build(&sc, sc.full()).unwrap();
    let c1 = b.coordinates(&b.classes[&0]).unwrap();
    assert_eq!(c1, BTreeMap::from([(0, vec![1]), (1, vec![0])]));
    let zero = b.coordinates(&vec![0; b.u.rank]).unwrap();
    assert!(zero.values().all(|t| t.iter().all(|&x| x == 0)));
    let sum: Vec<u64> = b.classes[&0].iter().zip(&b.classes[&1]).map(|(a, c)| (a + c) % 3).collect();
    assert_eq!(b.coordinates(&sum).unwrap(), BTreeMap::from([(0, vec![1]), (1, vec![1])]));
}

#[test]
fn nonfixed_vector_is_outside_span() {
    let sc = bundled::scenario("S1").unwrap();
    let b = CanonicalBasis::build(&sc, sc.full()).unwrap();
    let mut found = false;
    for i in 0..b.u.rank {
        let mut e = vec![0; b.u.rank];
        e[i] = 1;
        if !is_fixed(&sc, &b.u, &e) {
            assert!(matches!(b.coordinates(&e), Err(CohomologyError::OutsideSpan)));
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn inclusion_carries_canonical_classes() {
    for (name, sc) in all() {
        let z = sc.full();
        let big = CanonicalBasis::build(&sc, z).unwrap();
        for zs in stalks(z) {
            let small = CanonicalBasis::build(&sc, zs).unwrap();
            for (&y, v) in &small.classes {
                let up = include_mod(&sc, &small.u, &big.u, v).unwrap();
                assert!(is_fixed(&sc, &big.u, &up));
                assert_eq!(&up, &big.classes[&y], "{name}: c_{y} from level {zs}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coordinates_round_trip(si in 0usize..4, seed in prop::collection::vec(0u64..3, 8..16)) {
        let sc = bundled::scenario(bundled::NAMES[si]).unwrap();
        let b = CanonicalBasis::build(&sc, sc.full()).unwrap();
        let nh = sc.h_size();
        let coords: BTreeMap<u32, Vec<u64>> = b.ys.iter().enumerate()
            .map(|(i, &y)| (y, (0..nh).map(|j| seed[(i * nh + j) % seed.len()]).collect()))
            .collect();
        let v = b.combine(&sc, &coords);
        prop_assert!(is_fixed(&sc, &b.u, &v));
        prop_assert_eq!(b.coordinates(&v).unwrap(), coords.clone());
        let lift = b.lift_of(&sc, &coords);
        prop_assert!(is_cocycle_mod(&sc, b.z, &lift));
        prop_assert_eq!(unidist::complex::bar_to_u(&sc, &b.u, &lift).unwrap(), v);
    }
}
