use brwd_core::boxes::{
    classify_exit, exit_counts, fkg_from_pairs, paired_exit_counts, zero_product_bound_check, zero_product_extremal,
    ExitRegion, Functional, SpaceTimeBox,
};
use brwd_core::brw::{simulate, Caps, RecordLevel, SimOptions};
use brwd_core::oracles::{exit_counts_from_records, random_rational_pmf};
use brwd_core::scalar::Scalar;
use brwd_core::{seed, BrwParams, Configuration, DisasterField, Site};
use num_rational::BigRational;
use proptest::prelude::*;

fn record_run(
    params: &BrwParams,
    eta: &Configuration,
    b: &SpaceTimeBox,
    horizon: f64,
    i: u64,
) -> brwd_core::brw::SimResult {
    let field = DisasterField::new(seed::derive(41, "field", i), params.alpha, params.d).unwrap();
    let mut env = field.environment();
    let opts = SimOptions::new(horizon)
        .starting_at(b.origin_time)
        .max_alive(20_000)
        .recording(RecordLevel::Full);
    simulate(params, eta, &mut env, seed::derive(41, "tree", i), &opts).unwrap()
}

#[test]
fn exit_counts_match_lineage_replay() {
    let cases = [(1usize, 3, 2.0), (2, 2, 1.5), (3, 2, 1.0)];
    let mut checked = 0;
    for (d, l, t) in cases {
        let params = BrwParams::new(1.5, 1.0, vec![0.3, 0.2, 0.5], 0.3, d).unwrap();
        let b = SpaceTimeBox::new(l, t, d).unwrap();
        let mut eta = Configuration::single(Site::origin(d), 2);
        eta.add(Site::origin(d).with_coord(0, 1), 1);
        for i in 0..34 {
            // past the top, so the counts must ignore later events
            let res = record_run(&params, &eta, &b, t + 0.5, i);
            if res.capped() {
                continue;
            }
            let fast = exit_counts(res.log.as_ref().unwrap(), &b).unwrap();
            let slow = exit_counts_from_records(&res.records, &b).unwrap();
            assert_eq!(fast, slow, "d={d} run {i}");
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} uncapped runs");
}

#[test]
fn exit_counts_need_interior_start_and_covering_log() {
    let params = BrwParams::binary(1.0, 0.5, 0.0, 1).unwrap();
    let b = SpaceTimeBox::new(2, 1.0, 1).unwrap();
    let res = record_run(&params, &Configuration::single(Site::d1(2), 1), &b, 1.0, 0);
    assert!(exit_counts(res.log.as_ref().unwrap(), &b).is_err());
    let res = record_run(&params, &Configuration::single(Site::d1(0), 1), &b, 0.5, 0);
    assert!(exit_counts(res.log.as_ref().unwrap(), &b).is_err());
}

#[test]
fn classification_partitions_the_boundary() {
    for d in 1..=3 {
        for l in 1..=3 {
            let b = SpaceTimeBox::new(l, 1.0, d).unwrap();
            let mut tops = vec![0; b.n_top_regions()];
            let mut faces = vec![0; b.n_face_regions()];
            for x in brwd_core::Region::cube(Site::origin(d), l).sites() {
                match classify_exit(&b, 1.0, &x).unwrap() {
                    r @ ExitRegion::Top { .. } => tops[r.index()] += 1,
                    _ => unreachable!(),
                }
                if x.linf_norm() == l {
                    let r = classify_exit(&b, 0.5, &x).unwrap();
                    assert!(!r.is_top());
                    faces[r.index()] += 1;
                } else {
                    assert!(classify_exit(&b, 0.5, &x).is_err());
                }
            }
            assert_eq!(tops.iter().sum::<i32>(), (2 * l + 1).pow(d as u32));
            // with L = 1 the zero coordinate has sign +1, so some orthants are empty
            if l >= 2 {
                assert!(faces.iter().all(|&c| c > 0));
            }
        }
    }
}

#[test]
fn zero_product_bound_on_random_laws() {
    let mut rng = seed::rng_from(seed::derive(42, "zp", 0));
    for i in 0..10_000 {
        let m = 1 + i % 5;
        let s = 1 + (i / 5 % 4) as u64;
        let joint = random_rational_pmf(m, &mut rng);
        let r = zero_product_bound_check(&joint, s).unwrap();
        assert!(r.holds, "m={m} s={s} lhs={} rhs={}", r.lhs, r.rhs);
    }
}

#[test]
fn zero_product_bound_is_attained() {
    for m in 1..=5 {
        for s in 1..=4 {
            let r = zero_product_bound_check(&zero_product_extremal::<BigRational>(m), s).unwrap();
            assert_eq!(r.slack, BigRational::from_ratio(0, 1));
        }
    }
}

#[test]
fn fkg_covariances_are_not_significantly_negative() {
    let d = 1;
    let params = BrwParams::new(1.0, 1.0, vec![0.25, 0.25, 0.5], 0.5, d).unwrap();
    let b = SpaceTimeBox::new(3, 1.5, d).unwrap();
    let eta = Configuration::single(Site::origin(d), 2);
    let (pairs, capped) = paired_exit_counts(&params, &eta, &eta, &b, 400, Caps::default(), 43).unwrap();
    assert_eq!(capped, 0);
    for (f, g) in Functional::standard_suite(d) {
        let e = fkg_from_pairs(&pairs, &f, &g, 0);
        assert!(e.cov.value >= -3.0 * e.cov.std_err - 1e-12, "{f:?} {g:?}: {:?}", e.cov);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_product_bound_holds_in_floats(c in proptest::collection::vec(0u32..50, 8), s in 1u64..5) {
        let total = c.iter().sum::<u32>().max(1) as f64;
        let mut joint: Vec<f64> = c.iter().map(|&x| x as f64 / total).collect();
        if c.iter().all(|&x| x == 0) {
            joint[0] = 1.0;
        }
        prop_assert!(zero_product_bound_check(&joint, s).unwrap().holds);
    }
}
