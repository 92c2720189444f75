use kcmlab::difficulty::{alpha_of_direction, DifficultyValue, OracleParams};
use kcmlab::droplet::{
    build_half_ring, helping_sets_upto, q, verify_spread, voracious_for_ring, RingKind, RingSpec, SpreadMode, Verdict,
};
use kcmlab::family::{builtin, BUILTIN_NAMES};
use kcmlab::geometry::{stable_set, Direction};
use kcmlab::kcm::{stationarity_check, KcmParams};

#[test]
fn larger_oracle_parameters_never_hurt() {
    for name in ["duarte", "fa2f", "anisotropic"] {
        let f = builtin(name).unwrap();
        let r = f.radius() as i64;
        let mut grid = Vec::new();
        for bound in 1..=3 {
            for window in [2 * r, 4 * r, 8 * r] {
                for span in [16, 64] {
                    grid.push(OracleParams { bound, window_radius: window, line_span: span, budget: 1_000_000 });
                }
            }
        }
        for &u in &stable_set(&f).isolated {
            let values: Vec<DifficultyValue> =
                grid.iter().map(|p| alpha_of_direction(&f, u, p).unwrap().value).collect();
            for (i, a) in grid.iter().enumerate() {
                for (j, b) in grid.iter().enumerate() {
                    let bigger = b.bound >= a.bound && b.window_radius >= a.window_radius && b.line_span >= a.line_span;
                    if let (true, DifficultyValue::Finite(k)) = (bigger, values[i]) {
                        match values[j] {
                            DifficultyValue::Finite(k2) => assert!(k2 <= k, "{name} {u}: {a:?} -> {b:?}"),
                            DifficultyValue::Exceeds(_) => panic!("{name} {u}: finite at {a:?}, exceeds at {b:?}"),
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn iterated_single_advances_agree_with_full_width() {
    let duarte = builtin("duarte").unwrap();
    let params = OracleParams::for_family(&duarte);
    let mut agreements = 0;
    for w in 2..=6 {
        for l in [8, 16, 24, 40] {
            let ring = build_half_ring(&duarte, &RingSpec::new(Direction::of(1, 0), RingKind::Plain, q(w), q(l))).unwrap();
            let vors = voracious_for_ring(&duarte, &ring, &params, 32).unwrap();
            let all = helping_sets_upto(&ring, &vors, q(w), |_| true);
            assert!(all.iter().all(|h| h.matches_shape(&vors[h.strip])), "w={w} l={l}");
            let width = verify_spread(&duarte, &ring, &all, &vors, SpreadMode::AdvanceWidth, 32);
            assert!(width.naive_agrees);

            let mut t = q(0);
            let mut every_step = true;
            while t < q(w) {
                let r = ring.translated(t);
                let one = helping_sets_upto(&r, &vors, r.step_to_new_point(), |_| true);
                let rep = verify_spread(&duarte, &r, &one, &vors, SpreadMode::AdvanceOne, 32);
                assert!(rep.naive_agrees);
                every_step &= rep.verdict == Verdict::Pass;
                t += r.step_to_new_point();
            }
            assert_eq!(every_step, width.verdict == Verdict::Pass, "w={w} l={l}");
            agreements += 1;
        }
    }
    assert_eq!(agreements, 20);
}

#[test]
fn every_cataloged_family_keeps_its_density() {
    for name in BUILTIN_NAMES {
        let f = builtin(name).unwrap();
        for qv in [0.1, 0.2, 0.3] {
            let p = KcmParams::new(f.clone(), qv, 16, 16, 0.0, 101).unwrap();
            let r = stationarity_check(&p, 10.0, 40.0, 4).unwrap();
            assert_eq!(r.witness_violations, 0, "{name} q={qv}");
            assert_eq!(r.density_ok, Some(true), "{name} q={qv}: {}", r.to_text());
            assert!(r.balance_ok, "{name} q={qv}: {}", r.to_text());
        }
    }
}
