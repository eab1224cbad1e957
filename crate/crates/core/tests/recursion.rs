use std::collections::BTreeMap;

use num_bigint::BigInt;
use proptest::prelude::*;
use unidist::bundled;
use unidist::recursion::*;
use unidist::site::{GroupRingElem, Scenario};

fn all() -> Vec<(&'static str, Scenario)> {
    bundled::NAMES.iter().map(|&n| (n, bundled::scenario(n).unwrap())).collect()
}

#[test]
fn kolyvagin_operator_identity() {
    for (name, sc) in all() {
        for x in 0..sc.num_primes() {
            assert!(kolyvagin_identity_holds(&sc, x), "{name} x={x}");
        }
    }
}

#[test]
fn kolyvagin_operator_s1_expansion() {
    // D_x = σ + 2σ² when |G| = 3
    let sc = bundled::scenario("S1").unwrap();
    let d = kolyvagin_operator(&sc, 1);
    let mut want = GroupRingElem::zero();
    want.add_term(sc.group_pow(&sc.sigma(0), 1), BigInt::from(1));
    want.add_term(sc.group_pow(&sc.sigma(0), 2), BigInt::from(2));
    assert!(d.sub(&want).is_zero());
    assert!(kolyvagin_operator(&sc, 0).sub(&GroupRingElem::monomial(sc.identity())).is_zero());
}

#[test]
fn shift_examples_on_classes() {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let top = lv.top();
        for x in sc.primes_in(sc.full()) {
            let low = sc.full() & !(1 << x);
            let d1 = lv.delta_on_class(&sc, x, sc.full(), &top.classes[&0]).unwrap();
            assert!(d1.iter().all(|&v| v == 0), "{name}: Delta c_1 ≠ 0");
            let dx = lv.delta_on_class(&sc, x, sc.full(), &top.classes[&(1 << x)]).unwrap();
            assert_eq!(dx, lv.bases[&low].classes[&0], "{name}: Delta_x c_x ≠ c_1");
        }
    }
}

#[test]
fn shifts_commute_on_classes() {
    for name in ["S2", "S4"] {
        let sc = bundled::scenario(name).unwrap();
        let lv = Levels::new(&sc, 0b11).unwrap();
        for (&y, v) in &lv.top().classes {
            let a = lv.delta_on_class(&sc, 0, 0b11, v).unwrap();
            let a = lv.delta_on_class(&sc, 1, 0b10, &a).unwrap();
            let b = lv.delta_on_class(&sc, 1, 0b11, v).unwrap();
            let b = lv.delta_on_class(&sc, 0, 0b01, &b).unwrap();
            assert_eq!(a, b, "{name} y={y}");
            if y == 0b11 {
                assert_eq!(a, lv.bases[&0].classes[&0]);
            }
        }
    }
}

#[test]
fn characterized_delta_examples() {
    for (name, sc) in all() {
        let z = sc.full();
        let lv = Levels::new(&sc, z).unwrap();
        let top = lv.top();
        for x in sc.primes_in(z) {
            let low = &lv.bases[&(z & !(1 << x))];
            let b = vardelta_characterized(&sc, &top.u, &low.u, x, &top.classes[&0], false).unwrap();
            assert!(b.iter().all(|&v| v == 0), "{name}");
            let cx = kolyvagin_class(&sc, &top.u, 1 << x).unwrap();
            let b = vardelta_characterized(&sc, &top.u, &low.u, x, &cx, false).unwrap();
            assert_eq!(b, unit_class(&sc, &low.u).unwrap(), "{name}: Delta c'_x ≠ [1]");
        }
    }
}

#[test]
fn delta_agreement_all_scenarios() {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let r = verify_delta_agreement(&sc, &lv).unwrap();
        assert!(r.ok, "{name}: {:?}", r.failures);
        assert!(r.well_defined);
    }
}

#[test]
fn kolyvagin_c1_is_canonical_c1() {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let f = RecursiveFamily::kolyvagin(&sc, lv.top()).unwrap();
        assert_eq!(f.classes[&0], lv.top().classes[&0], "{name}");
    }
}

#[test]
fn universal_recursion_both_families() {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).unwrap();
        for f in [RecursiveFamily::canonical(lv.top()), RecursiveFamily::kolyvagin(&sc, lv.top()).unwrap()] {
            let r = verify_universal_recursion(&sc, &lv, &f).unwrap();
            assert!(r.ok, "{name} {}: {:?}", f.name, r.failures);
        }
    }
}

#[test]
fn broken_family_fails_recursion() {
    let sc = bundled::scenario("S1").unwrap();
    let lv = Levels::new(&sc, sc.full()).unwrap();
    let mut f = RecursiveFamily::canonical(lv.top());
    let cx = f.classes.get_mut(&1).unwrap();
    for v in cx.iter_mut() {
        *v = (*v * 2) % 3;
    }
    let r = verify_universal_recursion(&sc, &lv, &f).unwrap();
    assert!(!r.ok);
    assert!(r.failures.iter().any(|s| s.starts_with("Delta_x1 c_x1")), "{:?}", r.failures);
}

#[test]
fn basis_theorem_both_families() {
    for (name, sc) in all() {
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let top = lv.top();
        let canon = verify_basis_theorem(&sc, top, &RecursiveFamily::canonical(top)).unwrap();
        assert!(canon.ok, "{name}");
        for (i, row) in canon.change_of_basis.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                assert_eq!(t.iter().any(|&v| v != 0), i == j);
            }
        }
        let kol = verify_basis_theorem(&sc, top, &RecursiveFamily::kolyvagin(&sc, top).unwrap()).unwrap();
        assert!(kol.ok, "{name}: {:?}", kol.failures);
        assert_eq!(kol.change_of_basis.len(), top.ys.len());
    }
}

#[test]
fn family_json_round_trip_and_errors() {
    let sc = bundled::scenario("S2").unwrap();
    let lv = Levels::new(&sc, sc.full()).unwrap();
    let top = lv.top();
    let text = r#"{"1":[1,0,0,0],"x1":[0,1,0,0],"x2":[0,0,1,0],"x1*x2":[0,0,0,1]}"#;
    let f = RecursiveFamily::from_json(&sc, top, text).unwrap();
    assert_eq!(f.classes, top.classes);
    assert!(RecursiveFamily::from_json(&sc, top, r#"{"1":[1,0,0,0]}"#).is_err());
    assert!(RecursiveFamily::from_json(&sc, top, r#"{"1":[1,0]}"#).is_err());
    assert!(RecursiveFamily::from_json(&sc, top, "[]").is_err());

    let sc4 = bundled::scenario("S4").unwrap();
    let lv4 = Levels::new(&sc4, sc4.full()).unwrap();
    let text = r#"{"1":[1,0,0,0],"x1":[0,[1,0],0,0],"x2":[0,0,[0,1],0],"x1*x2":[0,0,0,1]}"#;
    let f = RecursiveFamily::from_json(&sc4, lv4.top(), text).unwrap();
    let r = verify_basis_theorem(&sc4, lv4.top(), &f).unwrap();
    assert!(!r.unitriangular, "h-twisted diagonal is not 1");
    assert!(r.invertible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // any unitriangular change of basis is accepted
    #[test]
    fn unitriangular_families_are_bases(si in 0usize..4, entries in prop::collection::vec(0u64..3, 16)) {
        let sc = bundled::scenario(bundled::NAMES[si]).unwrap();
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let top = lv.top();
        let nh = sc.h_size();
        let mut classes = BTreeMap::new();
        let mut k = 0;
        for &y in &top.ys {
            let mut coords = BTreeMap::new();
            for &yy in &top.ys {
                let mut t = vec![0u64; nh];
                if yy == y {
                    t[0] = 1;
                } else if yy & !y == 0 && y != 0 {
                    for e in t.iter_mut() {
                        *e = entries[k % entries.len()];
                        k += 1;
                    }
                }
                coords.insert(yy, t);
            }
            classes.insert(y, top.combine(&sc, &coords));
        }
        let f = RecursiveFamily { name: "random".into(), z: top.z, classes };
        let r = verify_basis_theorem(&sc, top, &f).unwrap();
        prop_assert!(r.ok, "{:?}", r.failures);
    }

    #[test]
    fn delta_is_linear(si in 0usize..4, a in prop::collection::vec(0u64..3, 16), b in prop::collection::vec(0u64..3, 16)) {
        let sc = bundled::scenario(bundled::NAMES[si]).unwrap();
        let lv = Levels::new(&sc, sc.full()).unwrap();
        let top = lv.top();
        let nh = sc.h_size();
        let mk = |v: &[u64]| -> BTreeMap<u32, Vec<u64>> {
            top.ys.iter().enumerate().map(|(i, &y)| (y, (0..nh).map(|j| v[(i * nh + j) % v.len()]).collect())).collect()
        };
        let va = top.combine(&sc, &mk(&a));
        let vb = top.combine(&sc, &mk(&b));
        let vs: Vec<u64> = va.iter().zip(&vb).map(|(x, y)| (x + y) % 3).collect();
        for x in sc.primes_in(sc.full()) {
            let da = lv.delta_on_class(&sc, x, top.z, &va).unwrap();
            let db = lv.delta_on_class(&sc, x, top.z, &vb).unwrap();
            let ds = lv.delta_on_class(&sc, x, top.z, &vs).unwrap();
            let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % 3).collect();
            prop_assert_eq!(ds, sum);
        }
    }
}
