//! Synthetic four-microphone scenes.
//!
//! Sources are far-field plane waves reaching a regular tetrahedral array
//! with integer-sample delays, mixed over independent per-channel noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::labels::LABEL_RATE_HZ;
use super::wav::Audio;
use crate::doa::{dot, to_cartesian};
use crate::error::{Error, Result};
use crate::events::{Event, EventList};

pub const N_CLASSES: usize = 14;
pub const MAX_POLYPHONY: usize = 2;
pub const SPEED_OF_SOUND: f64 = 343.0;
pub const MIC_RADIUS_M: f64 = 0.042;
pub const SAMPLE_RATE: u32 = 24_000;
/// Microphone (azimuth, elevation) in degrees on the array sphere.
pub const MIC_DIRECTIONS: [(f64, f64); 4] = [(45.0, 35.0), (-45.0, -35.0), (135.0, -35.0), (-135.0, 35.0)];

const RAMP_S: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneEvent {
    pub class: usize,
    pub onset_s: f64,
    pub offset_s: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub snr_db: f64,
}

impl SceneEvent {
    fn frames(&self) -> std::ops::Range<usize> {
        (self.onset_s * LABEL_RATE_HZ).round() as usize..(self.offset_s * LABEL_RATE_HZ).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub noise_rms: f64,
    pub events: Vec<SceneEvent>,
}

/// Bounds for randomly drawn events.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomEvents {
    pub min_len_s: f64,
    pub max_len_s: f64,
    pub snr_db: (f64, f64),
}

impl Default for RandomEvents {
    fn default() -> Self {
        Self {
            min_len_s: 0.5,
            max_len_s: 3.0,
            snr_db: (10.0, 20.0),
        }
    }
}

impl SceneSpec {
    pub fn new(seed: u64, duration_s: f64, events: Vec<SceneEvent>) -> Result<Self> {
        let spec = Self {
            seed,
            duration_s,
            noise_rms: 0.01,
            events,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n_events` events on the label grid with random class, extent,
    /// direction (10 degree steps) and SNR.
    pub fn random(seed: u64, duration_s: f64, n_events: usize, bounds: &RandomEvents) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = (duration_s * LABEL_RATE_HZ).round() as usize;
        let min_len = ((bounds.min_len_s * LABEL_RATE_HZ).round() as usize).max(1);
        let max_len = ((bounds.max_len_s * LABEL_RATE_HZ).round() as usize).clamp(min_len, total.max(min_len));
        let mut load = vec![0usize; total];
        let mut busy = vec![vec![false; total]; N_CLASSES];
        let mut events = Vec::with_capacity(n_events);
        for _ in 0..n_events {
            let placed = (0..1000).find_map(|_| {
                let class = rng.gen_range(0..N_CLASSES);
                let len = rng.gen_range(min_len..=max_len);
                if len > total {
                    return None;
                }
                let start = rng.gen_range(0..=total - len);
                let az = rng.gen_range(-18..18) as f64 * 10.0;
                let el = rng.gen_range(-4..=4) as f64 * 10.0;
                let snr = rng.gen_range(bounds.snr_db.0..=bounds.snr_db.1);
                let span = start..start + len;
                if span.clone().any(|t| load[t] >= MAX_POLYPHONY || busy[class][t]) {
                    return None;
                }
                for t in span.clone() {
                    load[t] += 1;
                    busy[class][t] = true;
                }
                Some(SceneEvent {
                    class,
                    onset_s: span.start as f64 / LABEL_RATE_HZ,
                    offset_s: span.end as f64 / LABEL_RATE_HZ,
                    azimuth: az,
                    elevation: el,
                    snr_db: snr,
                })
            });
            events.push(placed.ok_or_else(|| Error::Config(format!("could not place {n_events} events")))?);
        }
        events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.class.cmp(&b.class)));
        Self::new(seed, duration_s, events)
    }

    pub fn label_frames(&self) -> usize {
        (self.duration_s * LABEL_RATE_HZ).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.duration_s.is_nan() || self.duration_s <= 0.0 || self.noise_rms.is_nan() || self.noise_rms < 0.0 {
            return bad("scene duration must be positive and noise non-negative".into());
        }
        let total = self.label_frames();
        let mut load = vec![0usize; total];
        let mut busy = vec![vec![false; total]; N_CLASSES];
        for (i, e) in self.events.iter().enumerate() {
            if e.class >= N_CLASSES {
                return bad(format!("event {i}: class {} out of range", e.class));
            }
            if !(0.0 <= e.onset_s && e.onset_s < e.offset_s && e.offset_s <= self.duration_s) {
                return bad(format!(
                    "event {i}: extent {}..{} s outside scene",
                    e.onset_s, e.offset_s
                ));
            }
            if !(-90.0..=90.0).contains(&e.elevation) || !e.azimuth.is_finite() || !e.snr_db.is_finite() {
                return bad(format!("event {i}: invalid direction or SNR"));
            }
            for t in e.frames() {
                load[t] += 1;
                if load[t] > MAX_POLYPHONY {
                    return bad(format!("more than {MAX_POLYPHONY} simultaneous events at frame {t}"));
                }
                if busy[e.class][t] {
                    return bad(format!("class {} overlaps itself at frame {t}", e.class));
                }
                busy[e.class][t] = true;
            }
        }
        Ok(())
    }

    /// Ground truth at the label rate.
    pub fn metadata(&self) -> EventList {
        EventList::new(
            self.events
                .iter()
                .flat_map(|e| {
                    e.frames().map(move |frame| Event {
                        frame,
                        class: e.class,
                        azimuth: e.azimuth,
                        elevation: e.elevation,
                    })
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub audio: Audio,
    pub metadata: EventList,
}

/// Per-mic arrival offsets in samples for a plane wave from the given
/// direction; mics nearer the source hear it earlier (negative offset).
pub fn mic_delays(azimuth: f64, elevation: f64) -> [i64; 4] {
    let u = to_cartesian(azimuth, elevation);
    MIC_DIRECTIONS.map(|(az, el)| {
        let r = to_cartesian(az, el).map(|x| x * MIC_RADIUS_M);
        (-dot(r, u) / SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as i64
    })
}

/// Passband of class `k`'s source, in Hz.
fn class_band(class: usize) -> (f64, f64) {
    let lo = 200.0 * 1.6f64.powi((class % 7) as i32);
    (lo, (4.0 * lo).min(11_500.0))
}

/// Unit-RMS source signal: band-limited noise for classes 0..7, a harmonic
/// tone complex over the same bands for classes 7..14.
pub fn class_template(class: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = class_band(class);
    let fs = SAMPLE_RATE as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x: Vec<f64> = if class < 7 {
        let mut spec: Vec<Complex64> = (0..n).map(|_| Complex64::new(normal.sample(rng), 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut spec);
        for (k, c) in spec.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * fs / n as f64;
            if f < lo || f > hi {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        planner.plan_fft_inverse(n).process(&mut spec);
        spec.iter().map(|c| c.re).collect()
    } else {
        let f0 = lo;
        let harmonics: Vec<(f64, f64)> = (1..)
            .map(|h| h as f64 * f0)
            .take_while(|&f| f <= hi)
            .map(|f| (f, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                harmonics
                    .iter()
                    .enumerate()
                    .map(|(h, &(f, ph))| (std::f64::consts::TAU * f * t + ph).sin() / ((h + 1) as f64).sqrt())
                    .sum::<f64>()
                    + 0.05 * normal.sample(rng)
            })
            .collect()
    };
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

/// Renders a scene: noise floor plus every event delayed per microphone.
pub fn synth_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let fs = SAMPLE_RATE as f64;
    let n = (spec.duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut channels: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..n).map(|_| spec.noise_rms * normal.sample(&mut rng)).collect())
        .collect();
    let ramp = (RAMP_S * fs) as usize;
    for (i, e) in spec.events.iter().enumerate() {
        let mut ev_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        ev_rng.set_stream(i as u64 + 1);
        let start = (e.onset_s * fs).round() as usize;
        let len = ((e.offset_s * fs).round() as usize).min(n) - start;
        let gain = spec.noise_rms.max(1e-3) * 10f64.powf(e.snr_db / 20.0);
        let mut src = class_template(e.class, len, &mut ev_rng);
        for k in 0..ramp.min(len / 2) {
            let w = 0.5 - 0.5 * (std::f64::consts::PI * k as f64 / ramp as f64).cos();
            src[k] *= w;
            src[len - 1 - k] *= w;
        }
        for (ch, d) in channels.iter_mut().zip(mic_delays(e.azimuth, e.elevation)) {
            for (k, &s) in src.iter().enumerate() {
                let idx = start as i64 + k as i64 + d;
                if (0..n as i64).contains(&idx) {
                    ch[idx as usize] += gain * s;
                }
            }
        }
    }
    let peak = channels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.99 {
        let g = 0.99 / peak;
        channels.iter_mut().flatten().for_each(|v| *v *= g);
    }
    Ok(Scene {
        audio: Audio {
            sample_rate: SAMPLE_RATE,
            channels,
        },
        metadata: spec.metadata(),
    })
}
