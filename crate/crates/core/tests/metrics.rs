mod common;

use common::oracles::{angle_deg, exhaustive_assignment, unit};
use common::scenes::random_scenario;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::metrics::{evaluate, match_doas, FrameEvents, MetricReport};

const K: usize = 14;

fn report(reference: &FrameEvents, prediction: &FrameEvents) -> MetricReport {
    evaluate(reference, prediction, K).unwrap()
}

fn single(frames: usize, events: &[(usize, usize, f64, f64)]) -> FrameEvents {
    let mut fe = FrameEvents::new(frames);
    for &(t, class, az, el) in events {
        fe.push(t, class, unit(az, el)).unwrap();
    }
    fe
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn perfect_prediction_scores_ideally_on_both_suites() {
    for seed in 0..20 {
        let (reference, _) = random_scenario(seed, 60, K);
        let r = report(&reference, &reference);
        assert_eq!((r.er20, r.f20, r.le_cd, r.lr_cd), (0.0, 1.0, 0.0, 1.0), "seed {seed}");
        assert_eq!((r.er, r.f, r.lr), (0.0, 1.0, 1.0), "seed {seed}");
        assert!(r.le.abs() < 1e-6, "seed {seed}: LE {}", r.le);
    }
}

#[test]
fn twenty_five_degrees_off_fails_the_gate_but_not_detection() {
    let reference = single(10, &[(0, 3, 0.0, 0.0)]);
    let prediction = single(10, &[(0, 3, 25.0, 0.0)]);
    let r = report(&reference, &prediction);
    assert!(close(r.er20, 1.0) && close(r.f20, 0.0), "{r:?}");
    assert_eq!(r.segments_2020[0].s, 1);
    assert!(close(r.le_cd, 25.0) && close(r.lr_cd, 1.0), "{r:?}");
    assert!(close(r.er, 0.0) && close(r.f, 1.0), "{r:?}");
    assert!(close(r.le, 25.0) && close(r.lr, 1.0), "{r:?}");
}

#[test]
fn wrong_class_is_a_substitution_with_sentinel_localization() {
    let reference = single(10, &[(4, 0, 30.0, 10.0)]);
    let prediction = single(10, &[(4, 5, 30.0, 10.0)]);
    let r = report(&reference, &prediction);
    assert!(close(r.er20, 1.0) && close(r.f20, 0.0), "{r:?}");
    assert!(close(r.lr_cd, 0.0) && close(r.le_cd, 180.0), "{r:?}");
}

#[test]
fn spurious_extra_event_is_an_insertion_and_breaks_frame_recall() {
    let reference = single(10, &[(2, 1, -40.0, 0.0)]);
    let prediction = single(10, &[(2, 1, -40.0, 0.0), (2, 9, 120.0, 20.0)]);
    let r = report(&reference, &prediction);
    let seg = &r.segments_2019[0];
    assert_eq!((seg.s, seg.d, seg.i, seg.n), (0, 0, 1, 1));
    assert!(close(r.er, 1.0), "{r:?}");
    // Frame 2 has one reference DOA but two predicted; the other nine agree (0 = 0).
    assert!(close(r.lr, 0.9), "{r:?}");
    assert!(close(r.f, 2.0 / 3.0), "{r:?}");
}

#[test]
fn empty_prediction_is_all_deletions() {
    for seed in 0..20 {
        let (reference, _) = random_scenario(seed, 40, K);
        if reference.frames().all(|f| f.is_empty()) {
            continue;
        }
        let r = report(&reference, &FrameEvents::new(40));
        assert_eq!(
            (r.f20, r.f, r.lr_cd, r.er20, r.er),
            (0.0, 0.0, 0.0, 1.0, 1.0),
            "seed {seed}"
        );
    }
}

#[test]
fn assignment_matches_exhaustive_enumeration() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 0..=4 {
            for m in 0..=4 {
                let dir = |rng: &mut ChaCha8Rng| unit(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0));
                let refs: Vec<[f64; 3]> = (0..n).map(|_| dir(&mut rng)).collect();
                let preds: Vec<[f64; 3]> = (0..m).map(|_| dir(&mut rng)).collect();
                let cost: Vec<Vec<f64>> = refs
                    .iter()
                    .map(|&r| preds.iter().map(|&p| angle_deg(r, p)).collect())
                    .collect();
                let got = match_doas(&refs, &preds).unwrap();
                let want = exhaustive_assignment(&cost);
                assert!(
                    (got.total() - want).abs() < 1e-9,
                    "seed {seed} {n}x{m}: {} vs {want}",
                    got.total()
                );
                assert_eq!(got.pairs.len(), n.min(m));
                assert_eq!(got.unmatched_refs.len(), n - n.min(m));
                assert_eq!(got.unmatched_preds.len(), m - n.min(m));
            }
        }
    }
}

#[test]
fn gated_f_never_exceeds_ungated_f_and_ranges_hold() {
    for seed in 0..1000u64 {
        let (reference, prediction) = random_scenario(seed, 30, K);
        let r = report(&reference, &prediction);
        assert!(r.f20 <= r.f + 1e-12, "seed {seed}: F20 {} > F {}", r.f20, r.f);
        assert!(r.er20 >= 0.0 && r.er >= 0.0, "seed {seed}");
        for v in [r.f20, r.f, r.lr_cd, r.lr] {
            assert!((0.0..=1.0).contains(&v), "seed {seed}: {v}");
        }
        for v in [r.le_cd, r.le] {
            assert!((0.0..=180.0).contains(&v), "seed {seed}: {v}");
        }
    }
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        out
    };
    mul(rz, mul(ry, rx))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_are_rotation_invariant(seed in any::<u64>(), a in -3.2f64..3.2, b in -3.2f64..3.2, c in -3.2f64..3.2) {
        let (reference, prediction) = random_scenario(seed, 30, K);
        let m = rotation(a, b, c);
        let rot = |v: [f64; 3]| [0, 1, 2].map(|i| (0..3).map(|k| m[i][k] * v[k]).sum::<f64>());
        let before = report(&reference, &prediction);
        let after = report(&reference.map_directions(rot), &prediction.map_directions(rot));
        let pairs = [
            (before.er20, after.er20), (before.f20, after.f20), (before.le_cd, after.le_cd), (before.lr_cd, after.lr_cd),
            (before.er, after.er), (before.f, after.f), (before.le, after.le), (before.lr, after.lr),
        ];
        for (x, y) in pairs {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn scores_stay_in_range(seed in any::<u64>(), frames in 1usize..45) {
        let (reference, prediction) = random_scenario(seed, frames, K);
        let r = report(&reference, &prediction);
        prop_assert!(r.f20 <= r.f + 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.f20) && (0.0..=1.0).contains(&r.lr_cd));
        prop_assert!(r.er20 >= 0.0 && (0.0..=180.0).contains(&r.le_cd));
    }
}
