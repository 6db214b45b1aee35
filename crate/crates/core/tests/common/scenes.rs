//! Synthetic segments and random metric scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::data::{encode_labels, segments_from, synth_scene, RandomEvents, SceneSpec, Segment, N_CLASSES};
use seld_core::dsp::{extract_features, FeatureConfig};
use seld_core::metrics::FrameEvents;

use super::oracles::unit;

/// One labeled 6 s segment per seed, with `n_events` random events.
pub fn synthetic_segments(seeds: impl IntoIterator<Item = u64>, n_events: usize, snr_db: (f64, f64)) -> Vec<Segment> {
    let cfg = FeatureConfig::default();
    let bounds = RandomEvents {
        snr_db,
        ..RandomEvents::default()
    };
    seeds
        .into_iter()
        .flat_map(|seed| {
            let spec = SceneSpec::random(seed, 6.0, n_events, &bounds).expect("valid scene");
            let scene = synth_scene(&spec).expect("synthesis");
            let blocks = extract_features(&scene.audio.channels, &cfg, &format!("scene{seed}")).expect("features");
            let grid = encode_labels(&scene.metadata, spec.label_frames(), N_CLASSES).expect("labels");
            segments_from(blocks, Some(&grid), 60)
        })
        .collect()
}

/// A reference with up to two events per frame, and a prediction derived
/// from it by random deletions, insertions, class swaps and DOA jitter
/// ranging from a few degrees to far beyond the 20° gate.
pub fn random_scenario(seed: u64, n_frames: usize, n_classes: usize) -> (FrameEvents, FrameEvents) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reference = FrameEvents::new(n_frames);
    let mut prediction = FrameEvents::new(n_frames);
    let random_dir = |rng: &mut ChaCha8Rng| unit(rng.gen_range(-180.0..180.0), rng.gen_range(-60.0..60.0));
    for t in 0..n_frames {
        let n = rng.gen_range(0..=2);
        for _ in 0..n {
            let class = rng.gen_range(0..n_classes);
            let (az, el) = (rng.gen_range(-180.0..180.0), rng.gen_range(-60.0..60.0));
            reference.push(t, class, unit(az, el)).expect("valid event");
            match rng.gen_range(0..6) {
                0 => {}
                1 => {
                    let other = (class + rng.gen_range(1..n_classes)) % n_classes;
                    prediction.push(t, other, unit(az, el)).expect("valid event");
                }
                _ => {
                    let jitter = rng.gen_range(0.0..40.0);
                    prediction.push(t, class, unit(az + jitter, el)).expect("valid event");
                }
            }
        }
        if rng.gen_bool(0.15) {
            prediction
                .push(t, rng.gen_range(0..n_classes), random_dir(&mut rng))
                .expect("valid event");
        }
    }
    (reference, prediction)
}
