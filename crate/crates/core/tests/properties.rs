use proptest::prelude::*;

use kcmlab::bootstrap::{closure, closure_naive, probe_in_frame, Configuration, LineFrame, Region};
use kcmlab::difficulty::{family_difficulties, OracleParams};
use kcmlab::family::{Offset, Rule, UpdateFamily};
use kcmlab::geometry::{is_unstable, quasi_stable_directions, stable_set, unstable_arc, Arc, Direction};

fn arb_family() -> impl Strategy<Value = UpdateFamily> {
    let offset = (-2i32..=2, -2i32..=2).prop_filter("non-zero", |&(x, y)| (x, y) != (0, 0));
    let rule = proptest::collection::btree_set(offset, 1..=4);
    proptest::collection::btree_set(rule, 1..=3).prop_map(|rules| {
        let rules = rules.into_iter().map(|r| Rule::new(r.into_iter().map(|(x, y)| Offset::new(x, y))).unwrap()).collect();
        UpdateFamily::new("random", rules).unwrap()
    })
}

fn arb_direction() -> impl Strategy<Value = Direction> {
    (-7i64..=7, -7i64..=7).prop_filter("non-zero", |&(x, y)| (x, y) != (0, 0)).prop_map(|(x, y)| Direction::of(x, y))
}

fn arb_box_config() -> impl Strategy<Value = Configuration> {
    (1i64..=20, 1i64..=20).prop_flat_map(|(w, h)| {
        proptest::collection::vec(proptest::bool::weighted(0.3), (w * h) as usize).prop_map(move |bits| {
            let sites = bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| (i as i64 % w, i as i64 / w));
            Configuration::with_sites(Region::boxed(0, 0, w - 1, h - 1), sites)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closure_matches_naive_fixpoint(f in arb_family(), c in arb_box_config()) {
        prop_assert_eq!(closure(&f, &c), closure_naive(&f, &c));
    }

    #[test]
    fn closure_is_idempotent(f in arb_family(), c in arb_box_config()) {
        let once = closure(&f, &c).final_config;
        let twice = closure(&f, &once).final_config;
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn closure_is_monotone(f in arb_family(), c in arb_box_config(), keep in proptest::collection::vec(any::<bool>(), 400)) {
        let sub: Vec<(i64, i64)> =
            c.infected_sites().into_iter().zip(keep.iter().cycle()).filter(|(_, k)| **k).map(|(p, _)| p).collect();
        let small = Configuration::with_sites(c.region.clone(), sub);
        prop_assert!(small.is_subset_of(&c));
        prop_assert!(closure(&f, &small).final_config.is_subset_of(&closure(&f, &c).final_config));
    }

    #[test]
    fn torus_closure_commutes_with_translation(
        f in arb_family(),
        w in 5i64..=14,
        h in 5i64..=14,
        seed_bits in proptest::collection::vec(proptest::bool::weighted(0.25), 196),
        dx in 0i64..14,
        dy in 0i64..14,
    ) {
        let sites: Vec<(i64, i64)> = (0..w * h)
            .filter(|&i| seed_bits[i as usize])
            .map(|i| (i % w, i / w))
            .collect();
        let shift = |(x, y): (i64, i64)| ((x + dx).rem_euclid(w), (y + dy).rem_euclid(h));
        let region = Region::torus(w, h);
        let a = closure(&f, &Configuration::with_sites(region.clone(), sites.iter().copied())).final_config;
        let b = closure(&f, &Configuration::with_sites(region.clone(), sites.iter().copied().map(shift))).final_config;
        let a_shifted = Configuration::with_sites(region, a.infected_sites().into_iter().map(shift));
        prop_assert_eq!(a_shifted, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn instability_agrees_with_half_plane_probe(f in arb_family(), u in arb_direction()) {
        let frame = LineFrame::new(u);
        let r = 3 * f.radius() as i64;
        let probe = probe_in_frame(&frame.transform_family(&f), &[], r, r, true);
        if is_unstable(&f, u) {
            prop_assert!(probe.left && probe.right, "{probe:?}");
        } else {
            prop_assert_eq!((probe.left_advance, probe.right_advance), (0, 0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stable_set_is_the_complement_of_unstable_arcs(
        f in arb_family(),
        dirs in proptest::collection::vec(arb_direction(), 100),
    ) {
        let s = stable_set(&f);
        let arcs: Vec<Arc> = f.rules().iter().filter_map(unstable_arc).collect();
        for d in dirs {
            let unstable = arcs.iter().any(|a| a.contains(d));
            prop_assert_eq!(s.contains(d), !unstable, "{}", d);
            prop_assert_eq!(is_unstable(&f, d), unstable);
            prop_assert!(s.arcs.iter().filter(|a| a.contains(d)).count() <= 1, "overlapping arcs at {}", d);
            prop_assert!(!(s.is_isolated(d) && s.arcs.iter().any(|a| a.contains(d))));
        }
        for pair in s.isolated.windows(2) {
            prop_assert_eq!(pair[0].angle_cmp(pair[1]), std::cmp::Ordering::Less);
        }
    }

    #[test]
    fn quasi_stable_directions_are_reflection_symmetric(f in arb_family(), u in arb_direction()) {
        if let Ok(q) = quasi_stable_directions(&f, u) {
            let mut a = q.clone();
            let mut b: Vec<Direction> = q.iter().map(|d| d.reflect_about(u)).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn alpha_never_exceeds_beta(f in arb_family()) {
        let mut p = OracleParams::for_family(&f);
        p.bound = 2;
        p.window_radius = 3 * f.radius() as i64;
        p.line_span = 16;
        let r = family_difficulties(&f, &p).unwrap();
        prop_assert!(r.alpha <= r.beta, "{} > {}", r.alpha, r.beta);
    }
}
