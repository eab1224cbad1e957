use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;
use unidist::bundled;
use unidist::distribution::*;
use unidist::exactlin::*;
use unidist::site::{GroupRingElem, Scenario};

/// Rank over F_p by plain Gaussian elimination, independent of the library's normal forms.
fn rank_mod_p(m: &IntMatrix, p: i64) -> usize {
    let mut a: Vec<Vec<i64>> =
        m.to_dense().iter().map(|r| r.iter().map(|x| reduce_big(x, p as u64) as i64).collect()).collect();
    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&i| a[i][c] != 0) else { continue };
        a.swap(rank, piv);
        let inv = (1..p).find(|&t| (a[rank][c] * t) % p == 1).unwrap();
        for v in a[rank].iter_mut() {
            *v = *v * inv % p;
        }
        let pivot = a[rank].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != rank && row[c] != 0 {
                let f = row[c];
                for (v, &q) in row.iter_mut().zip(&pivot) {
                    *v = ((*v - f * q) % p + p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn all() -> Vec<(&'static str, Scenario)> {
    bundled::NAMES.iter().map(|n| (*n, bundled::scenario(n).unwrap())).collect()
}

#[test]
fn u_ranks_match_oracle() {
    let expected = [("s1", 3), ("s2", 18), ("s3", 9), ("s4", 36)];
    for ((name, sc), (_, want)) in all().into_iter().zip(expected) {
        let u = UPresentation::build(&sc, sc.full()).unwrap();
        assert_eq!(u.rank, want, "{name}");
        let oracle = u.basis.len() - rank_mod_p(&u.relations, 1_000_003);
        assert_eq!(u.rank, oracle, "{name}");
        assert!(u.elementary_divisors.iter().all(|d| d.is_one()));
    }
    let s4 = bundled::scenario("s4").unwrap();
    assert_eq!(UPresentation::build(&s4, s4.full()).unwrap().rank_over_t(&s4), 18);
}

#[test]
fn rank_is_multiplicative_on_coprime_stalks() {
    for (name, sc) in all() {
        if sc.num_primes() < 2 {
            continue;
        }
        let r = |z| UPresentation::build(&sc, z).unwrap().rank_over_t(&sc);
        assert_eq!(r(0b11), r(0b01) * r(0b10), "{name}");
    }
}

#[test]
fn inclusions_are_split_injective() {
    for (name, sc) in all() {
        let big = UPresentation::build(&sc, sc.full()).unwrap();
        for z in unidist::site::stalks(sc.full()) {
            let small = UPresentation::build(&sc, z).unwrap();
            let inc = include_u(&sc, &small, &big).unwrap();
            let snf = smith_normal_form(&inc);
            assert_eq!(snf.rank(), small.rank, "{name} z={z}");
            assert!(snf.diag.iter().take(small.rank).all(|d| d.is_one()), "{name} z={z}");
            for q in [2, 5, 7] {
                assert_eq!(rank_mod_p(&inc, q), small.rank);
            }
        }
    }
}

#[test]
fn identity_inclusion() {
    let sc = bundled::scenario("s1").unwrap();
    let u = UPresentation::build(&sc, 1).unwrap();
    let inc = include_u(&sc, &u, &u).unwrap();
    assert_eq!(inc, IntMatrix::identity(u.rank));
    let u1 = UPresentation::build(&sc, 0).unwrap();
    let one = include_u(&sc, &u1, &u).unwrap();
    let unit = u.project_avec(&sc, &[(Sym::unit(&sc, 0), BigInt::one())].into_iter().collect()).unwrap();
    let col: Vec<BigInt> = (0..u.rank).map(|i| one.get(i, 0)).collect();
    assert_eq!(col, unit);
}

#[test]
fn beta_lambda_is_gamma_and_commutes() {
    for (name, sc) in all() {
        let z = sc.full();
        for x in sc.primes_in(z) {
            let zx = z & !(1 << x);
            let lam = lambda_matrix(&sc, x, z).unwrap();
            let beta = beta_matrix(&sc, x, z).unwrap();
            let gamma = ring_matrix(&sc, &sc.gamma(x), &ABasis::new(&sc, zx));
            assert_eq!(beta.mul(&lam).unwrap(), gamma, "{name} x={x}");
            for x2 in sc.primes_in(z) {
                if x2 == x {
                    continue;
                }
                // β_x λ_{x'} = λ_{x'} β_x as maps A_{z/z(x')} -> A_{z/z(x)}
                let lam2_big = lambda_matrix(&sc, x2, z).unwrap();
                let beta_small = beta_matrix(&sc, x, z & !(1 << x2)).unwrap();
                let lam2_small = lambda_matrix(&sc, x2, zx).unwrap();
                assert_eq!(beta.mul(&lam2_big).unwrap(), lam2_small.mul(&beta_small).unwrap(), "{name} x={x} x'={x2}");
            }
        }
    }
}

#[test]
fn exact_sequence_all_scenarios() {
    for (name, sc) in all() {
        for x in 0..sc.num_primes() {
            let rep = check_exact(&sc, x, sc.full()).unwrap();
            assert!(rep.exact, "{name}: {rep:?}");
            // smallest instance z = z(x)
            let rep = check_exact(&sc, x, 1 << x).unwrap();
            assert!(rep.exact, "{name} at z(x): {rep:?}");
        }
    }
}

#[test]
fn gamma_determinant_s1() {
    // γ = 1 - 4 Fr^{-1} = -3 on U_1 = Z
    let sc = bundled::scenario("s1").unwrap();
    let u1 = UPresentation::build(&sc, 0).unwrap();
    assert_eq!(gamma_matrix(&sc, 0, &u1).determinant().unwrap(), BigInt::from(-3));
    // r = 0 gives γ = p(x;Fr^{-1}) = 0 on U_1
    let mut sc0 = sc.clone();
    sc0.primes[0].r = vec![vec![BigInt::zero()]];
    assert_eq!(sc0.gamma(0), sc0.p_frob(0));
    assert!(!gamma_injective(&sc0, 0).unwrap());
}

#[test]
fn sigma_minus_one_x_in_ix() {
    let sc = bundled::scenario("s1").unwrap();
    let u = UPresentation::build(&sc, 1).unwrap();
    let ix = build_ix(&sc, 0, &u).unwrap();
    let x = Sym::unit(&sc, 1);
    let mut v = AVector::new();
    add_term(&mut v, x.act(&sc, &sc.sigma(0)), BigInt::one());
    add_term(&mut v, x, BigInt::from(-1));
    assert!(ix.lattice.contains(&u.project_avec(&sc, &v).unwrap()));
}

#[test]
fn lambda_rejects_prime_outside_level() {
    let sc = bundled::scenario("s2").unwrap();
    assert!(lambda_matrix(&sc, 1, 0b01).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sigma_images_lie_in_ix(which in 0usize..4, coeffs in proptest::collection::vec(-5i64..=5, 36)) {
        let sc = bundled::scenario(bundled::NAMES[which]).unwrap();
        let u = UPresentation::build(&sc, sc.full()).unwrap();
        let v: Vec<BigInt> = coeffs.iter().cycle().take(u.rank).map(|&c| BigInt::from(c)).collect();
        for x in 0..sc.num_primes() {
            let ix = build_ix(&sc, x, &u).unwrap();
            let s = u.action(&sc, &GroupRingElem::monomial(sc.sigma(x)).sub(&GroupRingElem::monomial(sc.identity())));
            let w = s.mul_vec(&v).unwrap();
            prop_assert!(ix.lattice.contains(&w));
            prop_assert!(ix.howell.contains(&reduce_vec(&w, sc.modulus)));
        }
    }

    #[test]
    fn u_action_is_a_representation(which in 0usize..4) {
        let sc = bundled::scenario(bundled::NAMES[which]).unwrap();
        let u = UPresentation::build(&sc, sc.full()).unwrap();
        let gens: Vec<_> = (0..sc.num_primes()).map(|x| GroupRingElem::monomial(sc.sigma(x))).collect();
        for a in &gens {
            for b in &gens {
                let ab = u.action(&sc, &a.mul(b, &sc));
                prop_assert_eq!(ab, u.action(&sc, a).mul(&u.action(&sc, b)).unwrap());
            }
        }
    }
}
