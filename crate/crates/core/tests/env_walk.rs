use brwd_core::walk::{self, annealed_survival, extinction_time, quenched, simulate_walk};
use brwd_core::{seed, stats, superpose, DisasterField, Environment, Site};
use proptest::prelude::*;

fn poisson_cells(mu: f64, kmax: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..kmax).map(|k| stats::poisson_pmf(k as u64, mu)).collect();
    p.push(1.0 - p.iter().sum::<f64>());
    p
}

fn bin_counts(xs: &[usize], kmax: usize) -> Vec<u64> {
    let mut c = vec![0u64; kmax + 1];
    for &x in xs {
        c[x.min(kmax)] += 1;
    }
    c
}

#[test]
fn window_counts_are_poisson() {
    let rate = 1.3;
    let mut env = DisasterField::new(21, rate, 2).unwrap().environment();
    let counts: Vec<usize> = (0..40)
        .flat_map(|x| (0..50).map(move |y| Site::new(&[x, y]).unwrap()))
        .map(|s| env.disasters_in_window(&s, 2.0, 4.5).unwrap().len())
        .collect();
    let (_, _, p) = stats::chi_square_gof(&bin_counts(&counts, 9), &poisson_cells(rate * 2.5, 9), 5.0);
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn gaps_are_exponential() {
    let rate = 0.7;
    let mut env = DisasterField::new(22, rate, 1).unwrap().environment();
    // first arrival and the gap after it, both exponential
    let mut gaps = Vec::new();
    for x in 0..2000 {
        let site = Site::d1(x);
        let t1 = env.next_after(&site, 0.0);
        gaps.push(t1);
        gaps.push(env.next_after(&site, t1) - t1);
    }
    let (_, p) = stats::ks_one_sample(&gaps, |g| 1.0 - (-rate * g).exp());
    assert!(p > 1e-3, "KS p = {p}");
}

#[test]
fn superposition_adds_rates() {
    let a = DisasterField::new(23, 0.4, 1).unwrap();
    let b = DisasterField::new(24, 0.9, 1).unwrap();
    let c = superpose(&a, &b).unwrap();
    assert!((c.rate() - 1.3).abs() < 1e-15);
    let mut env = c.environment();
    let counts: Vec<usize> = (0..3000)
        .map(|x| env.disasters_in_window(&Site::d1(x), 0.0, 2.0).unwrap().len())
        .collect();
    let (_, _, p) = stats::chi_square_gof(&bin_counts(&counts, 8), &poisson_cells(2.6, 8), 5.0);
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn neighbouring_sites_are_uncorrelated() {
    let mut env = DisasterField::new(25, 1.0, 1).unwrap().environment();
    let a: Vec<f64> = (0..4000)
        .map(|x| env.disasters_in_window(&Site::d1(2 * x), 0.0, 1.0).unwrap().len() as f64)
        .collect();
    let b: Vec<f64> = (0..4000)
        .map(|x| env.disasters_in_window(&Site::d1(2 * x + 1), 0.0, 1.0).unwrap().len() as f64)
        .collect();
    let (r, _) = stats::pearson(&a, &b);
    assert!(r.abs() < 4.0 / (4000f64).sqrt(), "r = {r}");
}

#[test]
fn annealed_survival_is_exponential_in_time() {
    for (kappa, d, t) in [(0.5, 1, 1.0), (2.0, 2, 0.5), (8.0, 1, 2.0)] {
        let mut rng = seed::rng_from(seed::derive(26, "annealed", d as u64));
        let s = annealed_survival(kappa, 1.0, d, t, 40_000, &mut rng).unwrap();
        let target = (-t).exp();
        assert!(
            (s.value - target).abs() <= 3.0 * stats::binomial_se(target, 40_000),
            "{kappa} {d} {t}: {}",
            s.value
        );
    }
}

#[test]
fn return_probability_matches_walkers() {
    let (kappa, d, t) = (1.5, 2, 1.2);
    let mut rng = seed::rng_from(27);
    let n = 60_000;
    let hits = (0..n)
        .filter(|_| simulate_walk(kappa, d, t, &mut rng).unwrap().end_site() == Site::origin(d))
        .count() as u64;
    let p = walk::return_probability(kappa, d, t);
    assert!((hits as f64 / n as f64 - p).abs() <= 4.0 * stats::binomial_se(p, n));
}

#[test]
fn quenched_solver_agrees_with_walkers_in_d2() {
    let field = DisasterField::new(28, 1.0, 2).unwrap();
    let mut env = field.environment();
    let exact = quenched::log_survival(&mut env, 2.0, &[1.5], false).unwrap()[0].exp();
    let mut rng = seed::rng_from(29);
    let mc = walk::estimate_survival(&mut env, 2.0, 1.5, 80_000, false, &mut rng).unwrap();
    assert!(
        (mc.value - exact).abs() <= 4.0 * mc.std_err.max(1e-4),
        "{} vs {exact}",
        mc.value
    );
}

/// First disaster met along the path, by scanning each occupancy interval.
fn extinction_by_scan(path: &walk::WalkPath, env: &mut Environment) -> Option<f64> {
    for (site, from, to) in path.intervals() {
        if let Some(&t) = env.disasters_in_window(&site, from, to).unwrap().first() {
            return Some(t);
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queries_do_not_depend_on_order(s in any::<u64>(), x in -20i32..20, windows in proptest::collection::vec((0.0f64..10.0, 0.0f64..5.0), 1..6)) {
        let field = DisasterField::new(s, 1.5, 1).unwrap();
        let mut fresh = field.environment();
        let mut reused = field.environment();
        let site = Site::d1(x);
        // warm the cache with a long query first
        reused.disasters_in_window(&site, 0.0, 20.0).unwrap();
        for (a, w) in windows.into_iter().rev() {
            prop_assert_eq!(fresh.disasters_in_window(&site, a, a + w).unwrap(), reused.disasters_in_window(&site, a, a + w).unwrap());
            fresh.clear();
        }
    }

    #[test]
    fn extinction_matches_interval_scan(s in any::<u64>(), kappa in 0.0f64..6.0, alpha in 0.0f64..3.0, d in 1usize..4) {
        let mut env = DisasterField::new(s, alpha, d).unwrap().environment();
        let mut rng = seed::rng_from(seed::mix64(s));
        let path = simulate_walk(kappa, d, 5.0, &mut rng).unwrap();
        prop_assert_eq!(extinction_time(&path, &mut env).unwrap(), extinction_by_scan(&path, &mut env));
    }

    #[test]
    fn paths_are_nearest_neighbour_and_increasing(s in any::<u64>(), kappa in 0.1f64..10.0, d in 1usize..5) {
        let path = simulate_walk(kappa, d, 3.0, &mut seed::rng_from(s)).unwrap();
        let mut prev = (path.start_time, path.start_site);
        for &(t, x) in &path.jumps {
            prop_assert!(t > prev.0 && t <= path.horizon);
            prop_assert!(x.is_nearest_neighbor_of(&prev.1));
            prev = (t, x);
        }
    }
}
