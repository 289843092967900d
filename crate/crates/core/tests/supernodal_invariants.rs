mod common;

use kchol::geometry::{gen_deformed_manifold, gen_uniform, BoundaryPolicy, PointCloud};
use kchol::ordering::maximin_fast;
use kchol::supernodal::{build_supernodal, lift_pattern, DEFAULT_H};
use proptest::prelude::*;

fn check(cloud: &PointCloud, rho: f64, h: f64) -> common::PlanReport {
    let r = maximin_fast(cloud, rho).unwrap();
    let plan = build_supernodal(&r.ordering, cloud, rho, h).unwrap();
    assert_eq!(lift_pattern(&plan).unwrap(), plan.pattern);
    common::check_plan(&plan, &r.ordering, cloud).unwrap_or_else(|e| panic!("rho={rho} h={h}: {e}"))
}

#[test]
fn invariants_over_dimensions_and_boundaries() {
    for d in 1..=3 {
        for unit_box in [false, true] {
            let mut cloud = gen_uniform(600, d, 40 + d as u64).unwrap();
            if unit_box {
                cloud = cloud.with_boundary(BoundaryPolicy::UnitBox).unwrap();
            }
            for rho in [1.5, 3.0] {
                for h in [0.5, DEFAULT_H] {
                    check(&cloud, rho, h);
                }
            }
        }
    }
}

#[test]
fn invariants_on_manifold() {
    let cloud = gen_deformed_manifold(800, 0.3, 2, true).unwrap();
    check(&cloud, 2.0, DEFAULT_H);
}

#[test]
fn lifted_pattern_exceeds_two_rho_but_not_five() {
    // The triangle inequality through two centers only gives 5 rho.
    let cloud = gen_uniform(1000, 2, 3).unwrap();
    let rep = check(&cloud, 2.0, DEFAULT_H);
    assert!(rep.max_ratio <= 5.0);
    assert!(rep.over_two_rho > 0, "{rep:?}");
}

#[test]
fn color_count_is_bounded_independently_of_n() {
    let mut counts = Vec::new();
    for n in [1000, 4000] {
        let cloud = gen_uniform(n, 2, 11).unwrap();
        let r = maximin_fast(&cloud, 2.0).unwrap();
        let plan = build_supernodal(&r.ordering, &cloud, 2.0, DEFAULT_H).unwrap();
        counts.push(plan.max_colors());
    }
    assert!(counts.iter().all(|&c| c <= 50), "{counts:?}");
    assert!(counts[0].abs_diff(counts[1]) <= 3, "{counts:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_on_random_clouds(n in 5usize..150, d in 1usize..=3, seed in 0u64..1000, rho in 1.0f64..4.0, h in 0.3f64..0.9) {
        let cloud = gen_uniform(n, d, seed).unwrap();
        let r = maximin_fast(&cloud, rho).unwrap();
        let plan = build_supernodal(&r.ordering, &cloud, rho, h).unwrap();
        let rep = common::check_plan(&plan, &r.ordering, &cloud);
        prop_assert!(rep.is_ok(), "{:?}", rep);
    }
}
