use brwd_core::oracles::{binom_parity_even_pmf, parity_dist_enumerate, random_rational_weights};
use brwd_core::orders::{self, sigma, DistOnSigma, ParityConfig, WeightVector};
use brwd_core::scalar::Scalar;
use brwd_core::{seed, stats};
use num_rational::BigRational;
use proptest::prelude::*;

fn rational_law(c: &[u32]) -> Vec<BigRational> {
    let total: u32 = c.iter().sum::<u32>().max(1);
    let mut v: Vec<BigRational> = c
        .iter()
        .map(|&x| BigRational::from_ratio(x as i64, total as i64))
        .collect();
    if c.iter().all(|&x| x == 0) {
        v[0] = BigRational::from_ratio(1, 1);
    }
    v
}

fn law(n: usize) -> impl Strategy<Value = DistOnSigma<BigRational>> {
    proptest::collection::vec(0u32..8, 1 << n).prop_map(move |c| DistOnSigma::new(n, rational_law(&c)).unwrap())
}

#[test]
fn closed_form_parity_matches_pmf_sum() {
    for n in 0..=30 {
        for j in 0..=20 {
            let p = j as f64 * 0.05;
            let a = orders::binom_parity_even(n, p);
            let b = binom_parity_even_pmf(n, p);
            assert!((a - b).abs() <= 1e-12, "n={n} p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn parity_dp_matches_enumeration_exactly() {
    let mut rng = seed::rng_from(seed::derive(5, "orders-it", 0));
    for bins in 2..=5 {
        for k in (0..=6).step_by(2) {
            for _ in 0..4 {
                let w = random_rational_weights(bins, &mut rng);
                assert_eq!(orders::parity_dist(&w, k).unwrap(), parity_dist_enumerate(&w, k));
            }
        }
    }
}

#[test]
fn sigma_has_even_weight_and_right_size() {
    for n in 1..=6 {
        let s = sigma(n);
        assert_eq!(s.len(), 1 << n);
        assert!(s.iter().all(|c| c.weight() % 2 == 0 && c.len() == n + 1));
        for (i, c) in s.iter().enumerate() {
            assert_eq!(c.sigma_index(), i);
            assert_eq!(ParityConfig::from_sigma_index(i, n), *c);
        }
    }
}

#[test]
fn sorted_weights_give_monotone_parity_laws() {
    let mut rng = seed::rng_from(seed::derive(6, "orders-it", 0));
    for bins in 2..=5 {
        for _ in 0..100 {
            let w = random_rational_weights(bins, &mut rng);
            for k in 1..=3 {
                assert!(orders::parity_order_violations(&w, k).unwrap().is_empty());
            }
        }
    }
}

#[test]
fn unsorted_weights_can_break_monotonicity() {
    let q = |a, b| BigRational::from_ratio(a, b);
    let w = WeightVector::unsorted(vec![q(8, 10), q(1, 10), q(1, 10)]).unwrap();
    assert!(!orders::parity_order_violations(&w, 1).unwrap().is_empty());
}

#[test]
fn uniform_is_majorized_by_everything() {
    for n in 1..=3 {
        let u = DistOnSigma::<BigRational>::uniform(n);
        for i in 0..(1 << n) {
            let mut p = vec![BigRational::from_ratio(0, 1); 1 << n];
            p[i] = BigRational::from_ratio(1, 1);
            let point = DistOnSigma::new(n, p).unwrap();
            assert!(orders::majorization_leq(&u, &point).unwrap());
            assert!(!orders::majorization_leq(&point, &u).unwrap());
        }
    }
}

#[test]
fn coupling_respects_order_and_marginals() {
    let w = WeightVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let k = 2;
    let lo = orders::parity_dist(&w, 2 * k).unwrap();
    let hi = orders::parity_dist(&w, 2 * k + 2).unwrap();
    let mut rng = seed::rng_from(seed::derive(7, "coupling", 0));
    let (mut ca, mut cb) = (vec![0u64; 8], vec![0u64; 8]);
    for _ in 0..200_000 {
        let (a, b) = orders::couple_parity(&w, k, &mut rng).unwrap();
        assert!(orders::prefix_leq(&a, &b).unwrap());
        ca[a.sigma_index()] += 1;
        cb[b.sigma_index()] += 1;
    }
    let (_, _, pa) = stats::chi_square_gof(&ca, lo.probs(), 5.0);
    let (_, _, pb) = stats::chi_square_gof(&cb, hi.probs(), 5.0);
    assert!(pa > 1e-4 && pb > 1e-4, "chi-square p-values {pa} {pb}");
}

#[test]
fn walk_ratio_bound_holds_exhaustively() {
    for l in 0..=40u64 {
        for k in (l % 2..=l).step_by(2) {
            for x1 in (-(k as i64)..=k as i64).step_by(2) {
                assert!(orders::walk_ratio_bound(k, l, x1).unwrap(), "k={k} l={l} x1={x1}");
            }
        }
    }
}

#[test]
fn jump_count_laws_are_lr_ordered() {
    for kappa in [0.5, 1.0, 4.0] {
        for x1 in [0, 2] {
            let c = orders::lr_order_check(kappa, x1, 60).unwrap();
            assert!(c.lr_holds && c.cdf_dominates, "rate {kappa} x1 {x1}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefix_order_is_a_partial_order(n in 1usize..6, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let mask = (1u32 << n) - 1;
        let [x, y, z] = [a, b, c].map(|v| ParityConfig::from_sigma_index((v & mask) as usize, n));
        prop_assert!(orders::prefix_leq(&x, &x).unwrap());
        if orders::prefix_leq(&x, &y).unwrap() && orders::prefix_leq(&y, &x).unwrap() {
            prop_assert_eq!(&x, &y);
        }
        if orders::prefix_leq(&x, &y).unwrap() && orders::prefix_leq(&y, &z).unwrap() {
            prop_assert!(orders::prefix_leq(&x, &z).unwrap());
        }
    }

    #[test]
    fn majorization_matches_hinge_and_transfers((mu, nu) in (1usize..4).prop_flat_map(|n| (law(n), law(n)))) {
        let m = orders::majorization_leq(&mu, &nu).unwrap();
        prop_assert_eq!(m, orders::convex_hinge_check(mu.probs(), nu.probs()));
        prop_assert_eq!(m, orders::t_transform_path(mu.probs(), nu.probs()).is_some());
        if m {
            prop_assert!(orders::power_family_check(&mu.to_f64(), &nu.to_f64()));
        }
    }

    #[test]
    fn majorization_is_reflexive_and_transitive(a in law(2), b in law(2), c in law(2)) {
        prop_assert!(orders::majorization_leq(&a, &a).unwrap());
        if orders::majorization_leq(&a, &b).unwrap() && orders::majorization_leq(&b, &c).unwrap() {
            prop_assert!(orders::majorization_leq(&a, &c).unwrap());
        }
    }

    #[test]
    fn parity_law_sums_to_one(w in proptest::collection::vec(1u32..20, 2..6), k in 0usize..5) {
        let wv = WeightVector::new(rational_law(&w)).unwrap();
        let p = orders::parity_dist(&wv, 2 * k).unwrap();
        let total = p.probs().iter().fold(BigRational::from_ratio(0, 1), |a, b| a + b);
        prop_assert_eq!(total, BigRational::from_ratio(1, 1));
    }
}
