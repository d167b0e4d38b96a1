use brwd_core::oracles::{detect_copy_full_scan, open_by_paths};
use brwd_core::percolation::{
    build_eta_from_brw, detect_occupied_copy, independent_dependence_probe, independent_perc, lattice_from_uniforms,
    logged_run, open_closure, uniform_field, Construction, PercConfig,
};
use brwd_core::{seed, BrwParams, Configuration, DisasterField, Region, Site};
use proptest::prelude::*;

fn occupancy(rows: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    proptest::collection::vec(any::<bool>(), (rows + 1) * (rows + 2) / 2).prop_map(move |bits| {
        let mut it = bits.into_iter();
        let mut occ: Vec<Vec<bool>> = (0..=rows)
            .map(|k| (0..=k).map(|_| it.next().unwrap()).collect())
            .collect();
        occ[0][0] = true;
        occ
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closure_matches_path_enumeration(occ in (0usize..7).prop_flat_map(occupancy)) {
        prop_assert_eq!(open_closure(&occ), open_by_paths(&occ));
    }

    #[test]
    fn open_points_are_occupied_with_open_predecessor(occ in (1usize..9).prop_flat_map(occupancy)) {
        let open = open_closure(&occ);
        for k in 1..occ.len() {
            for l in 0..=k {
                if open[k][l] {
                    prop_assert!(occ[k][l]);
                    let left = l < k && open[k - 1][l];
                    let down = l > 0 && open[k - 1][l - 1];
                    prop_assert!(left || down);
                }
            }
        }
    }

    #[test]
    fn closure_is_monotone_in_occupancy(occ in (1usize..9).prop_flat_map(occupancy), k in 0usize..9, l in 0usize..9) {
        let mut more = occ.clone();
        let k = k % occ.len();
        more[k][l % (k + 1)] = true;
        let (a, b) = (open_closure(&occ), open_closure(&more));
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!(!x | y);
            }
        }
    }

    #[test]
    fn independent_survival_is_monotone_pathwise(s in any::<u64>(), p in 0.0f64..1.0, dp in 0.0f64..0.5) {
        let u = uniform_field(12, &mut seed::rng_from(s));
        let lo = lattice_from_uniforms(&u, p);
        let hi = lattice_from_uniforms(&u, (p + dp).min(1.0));
        for (ra, rb) in lo.open.iter().zip(&hi.open) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!(!x | y);
            }
        }
    }
}

#[test]
fn detection_matches_full_scan() {
    let mut agree_found = 0;
    for d in 1..=2 {
        let params = BrwParams::new(1.0, 1.5, vec![0.2, 0.3, 0.5], 0.3, d).unwrap();
        for i in 0..30u64 {
            let field = DisasterField::new(seed::derive(51, "field", i), params.alpha, d).unwrap();
            let eta = Configuration::single(Site::origin(d), 2);
            let log = logged_run(&params, &eta, &field, seed::derive(51, "tree", i), 3.0).unwrap();
            for (n, need) in [(0, 1), (0, 2), (1, 1), (1, 2)] {
                for (t0, t1) in [(0.0, 3.0), (0.7, 1.9), (2.2, 3.0)] {
                    let cands = Region::cube(Site::origin(d), 2);
                    let fast = detect_occupied_copy(&log, n, need, t0, t1, &cands);
                    let slow = detect_copy_full_scan(&log, n, need, t0, t1, &cands);
                    assert_eq!(fast, slow, "d={d} run {i} n={n} need={need} window=({t0},{t1})");
                    agree_found += fast.is_some() as u32;
                }
            }
        }
    }
    assert!(
        agree_found > 50,
        "too few detections to be a meaningful check: {agree_found}"
    );
}

#[test]
fn single_particle_is_an_immediate_copy() {
    let params = BrwParams::binary(1.0, 1.0, 0.5, 1).unwrap();
    let field = DisasterField::new(1, 0.5, 1).unwrap();
    let log = logged_run(&params, &Configuration::single(Site::d1(0), 1), &field, 2, 1.0).unwrap();
    assert_eq!(
        detect_occupied_copy(&log, 0, 1, 0.0, 1.0, &Region::cube(Site::d1(0), 0)),
        Some((0.0, Site::d1(0)))
    );
}

#[test]
fn dead_process_occupies_nothing_after_row_zero() {
    let params = BrwParams::new(1.0, 2.0, vec![1.0], 0.5, 1).unwrap();
    let field = DisasterField::new(3, 0.5, 1).unwrap();
    for construction in [Construction::Direct, Construction::Truncated] {
        let cfg = PercConfig::new(2, 1.0, 1, 1, 4, construction).unwrap();
        let lat = build_eta_from_brw(&params, &field, 4, &cfg).unwrap();
        assert!(lat.occupied[0][0]);
        assert!(lat.occupied[1..].iter().flatten().all(|&b| !b));
        assert!(!lat.reaches(1));
    }
}

#[test]
fn independent_percolation_extremes() {
    assert_eq!(independent_perc(1.0, 20, 50, 1).unwrap().value, 1.0);
    assert_eq!(independent_perc(0.0, 1, 50, 1).unwrap().value, 0.0);
}

#[test]
fn independent_rows_show_no_long_range_correlation() {
    let cs = independent_dependence_probe(0.75, 8, 4000, 9).unwrap();
    assert!(!cs.is_empty());
    for c in cs.iter().filter(|c| !c.degenerate) {
        assert!(c.corr.value.abs() <= 3.0 * c.corr.std_err, "{c:?}");
    }
}

#[test]
fn lattice_dump_lists_every_point() {
    let u = uniform_field(3, &mut seed::rng_from(2));
    let dump = lattice_from_uniforms(&u, 0.6).dump();
    assert_eq!(dump.lines().count(), 1 + 10);
}
