//! Criterion-level checks shared by the integration tests and the
//! acceptance runner. Each returns a short summary or a failure message.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::checkpoint::Checkpoint;
use seld_core::dsp::{gcc_phat, log_mel, FeatureConfig, MelFilterbank, Stft};
use seld_core::gradcheck::uniform_variable;
use seld_core::metrics::{evaluate, match_doas, FrameEvents, MetricReport};
use seld_core::model::{evaluate_segments, ModelConfig, SeldModel, TrainRunConfig, Trainer, Variant};
use seld_core::nn::Parameter;
use seld_core::ops::Mode;
use seld_core::{no_grad, Tensor};

use super::oracles::{angle_deg, exhaustive_assignment, mel_band_for, mel_edges, se_overhead, unit, xcorr_lag};
use super::scenes::{random_scenario, synthetic_segments};

pub type Check = Result<String, String>;

pub const RATIOS: [usize; 5] = [1, 2, 4, 8, 16];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: seld_core::Error) -> String {
    e.to_string()
}

pub fn all_configs() -> Vec<ModelConfig> {
    let mut v = vec![ModelConfig::baseline(), ModelConfig::conv_residual()];
    v.extend(
        RATIOS
            .iter()
            .map(|&r| ModelConfig::standard_post(r).expect("grid ratio")),
    );
    v
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty")
}

// ---- shapes and SE ------------------------------------------------------

/// `[2, 10, 300, 64]` maps to `[2, 60, 14]` / `[2, 60, 42]` for every
/// variant and ratio, with outputs inside the activation ranges.
pub fn shape_law() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = uniform_variable(&[2, 10, 300, 64], &mut rng).map_err(err)?.detach();
    for cfg in all_configs() {
        let label = format!("{} r{:?}", cfg.variant, cfg.ratio);
        let model = SeldModel::<f64>::new(cfg, 0).map_err(err)?;
        let out = no_grad(|| model.forward(&x, Mode::Eval)).map_err(err)?;
        ensure(out.sed.shape() == [2, 60, 14], || {
            format!("{label}: sed {:?}", out.sed.shape())
        })?;
        ensure(out.doa.shape() == [2, 60, 42], || {
            format!("{label}: doa {:?}", out.doa.shape())
        })?;
        ensure(out.sed.data().iter().all(|&v| v > 0.0 && v < 1.0), || {
            format!("{label}: sed outside (0,1)")
        })?;
        ensure(out.doa.data().iter().all(|&v| v > -1.0 && v < 1.0), || {
            format!("{label}: doa outside (-1,1)")
        })?;
    }
    Ok("7 configurations: sed [2,60,14], doa [2,60,42]".into())
}

fn copy_shared(from: &[&Parameter<f64>], to: &[&Parameter<f64>]) -> usize {
    let mut copied = 0;
    for p in to {
        if let Some(q) = from.iter().find(|q| q.name() == p.name()) {
            *p.tensor().data_mut() = q.tensor().to_vec();
            copied += 1;
        }
    }
    copied
}

/// With zeroed excitation layers a standard-post model reproduces the
/// conv-residual model carrying the same remaining weights, bit for bit.
pub fn se_identity_at_init(n_inputs: usize) -> Check {
    let mut checked = 0;
    for ratio in RATIOS {
        let cfg_sp = ModelConfig::standard_post(ratio)
            .and_then(|c| c.with_input_frames(60))
            .map_err(err)?;
        let cfg_res = ModelConfig::conv_residual().with_input_frames(60).map_err(err)?;
        let sp = SeldModel::<f64>::new(cfg_sp, ratio as u64).map_err(err)?;
        let res = SeldModel::<f64>::new(cfg_res, 99).map_err(err)?;
        for block in &sp.blocks {
            if let seld_core::model::ConvBlock::Residual(b) = block {
                b.scse
                    .as_ref()
                    .ok_or("standard-post block without scSE")?
                    .zero_excitation();
            }
        }
        let shared = copy_shared(&sp.parameters(), &res.parameters());
        ensure(shared == res.parameters().len(), || {
            format!("only {shared} parameters shared")
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(ratio as u64);
        let per_ratio = n_inputs.div_ceil(RATIOS.len());
        for i in 0..per_ratio {
            let x = uniform_variable(&[1, 10, 60, 64], &mut rng).map_err(err)?.detach();
            let (a, b) =
                no_grad(|| Ok::<_, seld_core::Error>((sp.forward(&x, Mode::Eval)?, res.forward(&x, Mode::Eval)?)))
                    .map_err(err)?;
            let same = |p: &Tensor<f64>, q: &Tensor<f64>| {
                p.data()
                    .iter()
                    .zip(q.data().iter())
                    .all(|(u, v)| u.to_bits() == v.to_bits())
            };
            ensure(same(&a.sed, &b.sed) && same(&a.doa, &b.doa), || {
                format!("ratio {ratio} input {i} differs")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} random inputs bit-identical across ratios {RATIOS:?}"
    ))
}

/// Standard-post minus conv-residual parameter counts equal three times
/// the closed-form SE overhead for C = 64; 8385 per block at ratio 1.
pub fn se_parameter_overhead() -> Check {
    let count = |cfg: ModelConfig| SeldModel::<f64>::new(cfg, 0).map(|m| m.parameter_count()).map_err(err);
    let residual = count(ModelConfig::conv_residual())?;
    ensure(se_overhead(64, 1) == 8385, || {
        format!("closed form gives {}", se_overhead(64, 1))
    })?;
    for ratio in RATIOS {
        let sp = count(ModelConfig::standard_post(ratio).map_err(err)?)?;
        let want = 3 * se_overhead(64, ratio);
        ensure(sp - residual == want, || {
            format!("ratio {ratio}: overhead {} vs {want}", sp - residual)
        })?;
    }
    Ok(format!(
        "overhead 3 x {} at ratio 1, closed form for all ratios",
        se_overhead(64, 1)
    ))
}

// ---- DSP ------------------------------------------------------------------

pub fn frames_per_segment() -> Check {
    let cfg = FeatureConfig::default();
    let frames = Stft::new(&cfg)
        .compute(&vec![0.1; cfg.segment_samples()])
        .map_err(err)?
        .frames;
    ensure(frames == 300, || format!("{frames} frames"))?;
    Ok("6 s -> 300 frames".into())
}

fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn delayed(x: &[f64], d: i64) -> Vec<f64> {
    (0..x.len() as i64)
        .map(|t| {
            usize::try_from(t - d)
                .ok()
                .and_then(|s| x.get(s))
                .copied()
                .unwrap_or(0.0)
        })
        .collect()
}

/// Fraction of frames whose GCC-PHAT argmax equals the delay found by
/// brute-force cross-correlation, over integer delays -20..=20.
pub fn gcc_delay_recovery() -> Check {
    let cfg = FeatureConfig::default();
    let half = cfg.gcc_lags as i64 / 2;
    let (mut hits, mut total) = (0usize, 0usize);
    for d in -20..=20i64 {
        let a = white_noise(12_000, (1000 + d) as u64);
        let b = delayed(&a, d);
        let oracle = xcorr_lag(&a, &b, half);
        ensure(oracle == d, || format!("oracle finds {oracle} for injected delay {d}"))?;
        let g = gcc_phat(&a, &b, &cfg).map_err(err)?;
        for frame in g.chunks(cfg.gcc_lags) {
            total += 1;
            hits += usize::from(argmax(frame) as i64 - half == oracle);
        }
    }
    let rate = hits as f64 / total as f64;
    ensure(rate >= 0.95, || format!("recovered in {:.1}% of frames", 100.0 * rate))?;
    Ok(format!("{:.1}% of {total} frames", 100.0 * rate))
}

/// Argmax mel band of five probe tones equals the band predicted from the
/// mel formula.
pub fn mel_probe_tones() -> Check {
    let cfg = FeatureConfig::default();
    let edges = mel_edges(cfg.n_mels, cfg.f_min, cfg.f_max);
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
    let stft = Stft::new(&cfg);
    let fb = MelFilterbank::new(&cfg);
    let mut bands = Vec::new();
    for target in [300.0, 1000.0, 2500.0, 5000.0, 9000.0] {
        let centre = (target / bin_hz).round() as i64;
        // Exact bin frequency near the target whose analytic band is unambiguous.
        let f = (centre - 4..=centre + 4)
            .map(|b| b as f64 * bin_hz)
            .max_by(|x, y| mel_band_for(*x, &edges).1.total_cmp(&mel_band_for(*y, &edges).1))
            .expect("non-empty range");
        let (expected, _) = mel_band_for(f, &edges);
        let tone: Vec<f64> = (0..24_000)
            .map(|i| (std::f64::consts::TAU * f * i as f64 / cfg.sample_rate as f64).sin())
            .collect();
        let mel = log_mel(&stft.compute(&tone).map_err(err)?.power(), &fb, cfg.log_floor);
        for (t, frame) in mel.chunks(cfg.n_mels).enumerate().skip(2).take(40) {
            let got = argmax(frame);
            ensure(got == expected, || {
                format!("{f:.1} Hz frame {t}: band {got}, expected {expected}")
            })?;
        }
        bands.push(expected);
    }
    Ok(format!("bands {bands:?}"))
}

// ---- metrics --------------------------------------------------------------

fn report(reference: &FrameEvents, prediction: &FrameEvents) -> Result<MetricReport, String> {
    evaluate(reference, prediction, 14).map_err(err)
}

pub fn perfect_prediction() -> Check {
    for seed in 0..20 {
        let (reference, _) = random_scenario(seed, 60, 14);
        let r = report(&reference, &reference)?;
        ensure((r.er20, r.f20, r.le_cd, r.lr_cd) == (0.0, 1.0, 0.0, 1.0), || {
            format!("2020 suite: {r:?}")
        })?;
        ensure((r.er, r.f, r.lr) == (0.0, 1.0, 1.0) && r.le.abs() < 1e-6, || {
            format!("2019 suite: {r:?}")
        })?;
    }
    Ok("(0, 1, 0°, 1) on both suites".into())
}

fn single(events: &[(usize, usize, f64, f64)]) -> FrameEvents {
    let mut fe = FrameEvents::new(10);
    for &(t, class, az, el) in events {
        fe.push(t, class, unit(az, el)).expect("valid event");
    }
    fe
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// The 25°-off, wrong-class and spurious-insertion scenarios.
pub fn hand_scenarios() -> Check {
    let r = report(&single(&[(0, 3, 0.0, 0.0)]), &single(&[(0, 3, 25.0, 0.0)]))?;
    ensure(
        close(r.er20, 1.0)
            && r.segments_2020[0].s == 1
            && close(r.f20, 0.0)
            && close(r.le_cd, 25.0)
            && close(r.lr_cd, 1.0),
        || format!("25° off, 2020 suite: {r:?}"),
    )?;
    ensure(
        close(r.er, 0.0) && close(r.f, 1.0) && close(r.le, 25.0) && close(r.lr, 1.0),
        || format!("25° off, 2019 suite: {r:?}"),
    )?;
    let r = report(&single(&[(4, 0, 30.0, 10.0)]), &single(&[(4, 5, 30.0, 10.0)]))?;
    ensure(
        close(r.er20, 1.0) && close(r.f20, 0.0) && close(r.lr_cd, 0.0) && close(r.le_cd, 180.0),
        || format!("wrong class: {r:?}"),
    )?;
    let r = report(
        &single(&[(2, 1, -40.0, 0.0)]),
        &single(&[(2, 1, -40.0, 0.0), (2, 9, 120.0, 20.0)]),
    )?;
    let seg = &r.segments_2019[0];
    ensure(
        (seg.s, seg.d, seg.i, seg.n) == (0, 0, 1, 1) && close(r.er, 1.0) && close(r.lr, 0.9),
        || format!("spurious event: {r:?}"),
    )?;
    let m = match_doas(&[unit(0.0, 0.0), unit(90.0, 0.0)], &[unit(88.0, 0.0), unit(2.0, 0.0)]).map_err(err)?;
    ensure(close(m.total(), 4.0) && m.pairs.len() == 2, || {
        format!("crossing pairs: {m:?}")
    })?;
    Ok("3 scenarios and the crossing assignment reproduce".into())
}

pub fn assignment_vs_exhaustive(seeds: u64) -> Check {
    let mut cases = 0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 0..=4 {
            for m in 0..=4 {
                let mut dir = || unit(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0));
                let refs: Vec<[f64; 3]> = (0..n).map(|_| dir()).collect();
                let preds: Vec<[f64; 3]> = (0..m).map(|_| dir()).collect();
                let cost: Vec<Vec<f64>> = refs
                    .iter()
                    .map(|&r| preds.iter().map(|&p| angle_deg(r, p)).collect())
                    .collect();
                let got = match_doas(&refs, &preds).map_err(err)?;
                let want = exhaustive_assignment(&cost);
                ensure((got.total() - want).abs() < 1e-9, || {
                    format!("seed {seed} {n}x{m}: {} vs {want}", got.total())
                })?;
                ensure(
                    got.pairs.len() == n.min(m) && got.unmatched_refs.len() + got.pairs.len() == n,
                    || format!("seed {seed} {n}x{m}: wrong matching size"),
                )?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases over {seeds} seeds"))
}

pub fn gated_f_bounded(scenarios: u64) -> Check {
    for seed in 0..scenarios {
        let (reference, prediction) = random_scenario(seed, 30, 14);
        let r = report(&reference, &prediction)?;
        ensure(r.f20 <= r.f + 1e-12, || {
            format!("seed {seed}: F20 {} > F {}", r.f20, r.f)
        })?;
        ensure(r.er20 >= 0.0 && (0.0..=1.0).contains(&r.f20), || {
            format!("seed {seed}: {r:?}")
        })?;
    }
    Ok(format!("F20 <= F on {scenarios} scenarios"))
}

// ---- training ---------------------------------------------------------------

pub fn small_config(variant: Variant, ratio: Option<usize>) -> ModelConfig {
    ModelConfig::new(variant, ratio).expect("valid variant")
}

/// Two fresh runs with the same seed give the same epoch-1 loss to the bit.
pub fn epoch_one_loss_reproducible() -> Check {
    let data = synthetic_segments([7, 8], 2, (15.0, 25.0));
    let run = || -> Result<f64, String> {
        let model = SeldModel::<f64>::new(ModelConfig::standard_post(1).map_err(err)?, 5).map_err(err)?;
        let cfg = TrainRunConfig {
            batch_size: 1,
            seed: 5,
            ..TrainRunConfig::default()
        };
        Trainer::new(&model, cfg)
            .and_then(|mut t| t.train_epoch(&data))
            .map_err(err)
    };
    let (a, b) = (run()?, run()?);
    ensure(a.to_bits() == b.to_bits(), || format!("{a:e} vs {b:e}"))?;
    Ok(format!("epoch-1 loss {a:.6} twice"))
}

/// Save/load of a trained model restores every value and its outputs bit-exactly.
pub fn checkpoint_round_trip(dir: &std::path::Path) -> Check {
    let data = synthetic_segments([9], 2, (15.0, 25.0));
    let model = SeldModel::<f64>::new(ModelConfig::standard_post(4).map_err(err)?, 3).map_err(err)?;
    Trainer::new(
        &model,
        TrainRunConfig {
            batch_size: 1,
            ..TrainRunConfig::default()
        },
    )
    .and_then(|mut t| t.train_epoch(&data))
    .map_err(err)?;
    let path = dir.join("round_trip.ckpt");
    model.to_checkpoint(0xfeed).save(&path).map_err(err)?;
    let loaded = Checkpoint::load(&path).map_err(err)?;
    let restored = SeldModel::<f64>::from_checkpoint(&loaded).map_err(err)?;
    let (a, b) = (model.state_dict(), restored.state_dict());
    ensure(a.len() == b.len(), || format!("{} vs {} entries", a.len(), b.len()))?;
    for (x, y) in a.iter().zip(&b) {
        let same = x.name == y.name
            && x.shape == y.shape
            && x.data.iter().zip(&y.data).all(|(u, v)| u.to_bits() == v.to_bits());
        ensure(same, || format!("`{}` differs after reload", x.name))?;
    }
    let ma = evaluate_segments(&model, &data, 1, 0.5).map_err(err)?;
    let mb = evaluate_segments(&restored, &data, 1, 0.5).map_err(err)?;
    ensure(ma.csv_row() == mb.csv_row(), || "outputs differ after reload".into())?;
    Ok(format!("{} arrays restored bit-exactly", a.len()))
}

pub struct OverfitResult {
    pub epochs: usize,
    pub f20: f64,
    pub losses: Vec<f64>,
}

/// Trains standard-post(1) on eight 6 s synthetic segments until training
/// F20 reaches 0.9 (checked every `every` epochs) or `max_epochs` pass.
pub fn overfit(max_epochs: usize, every: usize, stop_after: Option<usize>) -> Result<OverfitResult, String> {
    let data = synthetic_segments(100..108, 3, (15.0, 25.0));
    let model = SeldModel::<f64>::new(ModelConfig::standard_post(1).map_err(err)?, 1).map_err(err)?;
    let cfg = TrainRunConfig {
        batch_size: 2,
        seed: 1,
        ..TrainRunConfig::default()
    };
    let mut trainer = Trainer::new(&model, cfg).map_err(err)?;
    let mut losses = Vec::new();
    let mut f20 = 0.0;
    for epoch in 1..=max_epochs {
        losses.push(trainer.train_epoch(&data).map_err(err)?);
        if stop_after == Some(epoch) {
            return Ok(OverfitResult {
                epochs: epoch,
                f20,
                losses,
            });
        }
        if epoch % every == 0 || epoch == max_epochs {
            f20 = evaluate_segments(&model, &data, 4, 0.5).map_err(err)?.f20;
            if f20 >= 0.9 {
                return Ok(OverfitResult {
                    epochs: epoch,
                    f20,
                    losses,
                });
            }
        }
    }
    Err(format!("training F20 {f20:.3} after {max_epochs} epochs"))
}
