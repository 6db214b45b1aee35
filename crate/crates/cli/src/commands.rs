use std::path::{Path, PathBuf};

use seld_core::checkpoint::Checkpoint;
use seld_core::data::{
    fold_of, load_split, read_wav, segments_from, synth_scene, write_wav, DatasetLayout, FoldPlan, RandomEvents,
    SceneSpec, Segment, Stage, N_CLASSES,
};
use seld_core::dsp::{
    extract_features, read_feature_file, read_manifest, write_feature_file, write_manifest, FeatureConfig,
    ManifestEntry,
};
use seld_core::metrics::{evaluate, FrameEvents, MetricReport, TableRow, SEGMENT_FRAMES};
use seld_core::model::{
    frame_events, log_csv, predict, train as train_model, Decoded, ModelConfig, SeldModel, TrainRunConfig, Variant,
};
use seld_core::{Error, EventList, Result};

use crate::{EvalArgs, ExtractArgs, GridArgs, InferArgs, RunArgs, SynthArgs, TrainArgs};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Files in `dir` with the given extension, sorted by name.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Row label in the comparison tables.
fn system_label(cfg: &ModelConfig) -> String {
    match cfg.variant {
        Variant::Baseline => "baseline".into(),
        Variant::ConvResidual => "Conv-Residual".into(),
        Variant::StandardPost => format!("ρ = {}", cfg.ratio.unwrap_or(0)),
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let layout = DatasetLayout::new(&a.out);
    let (audio_dir, meta_dir) = (layout.audio_dir(), layout.metadata_dir());
    create_dir(&audio_dir)?;
    create_dir(&meta_dir)?;
    let n_events = a.events.unwrap_or((a.duration / 3.0).round() as usize);
    let mut written = 0;
    for fold in 1..=a.folders {
        for i in 0..a.files_per_folder {
            let seed = a
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(((fold as u64) << 32) | i as u64);
            let spec = SceneSpec::random(seed, a.duration, n_events, &RandomEvents::default())?;
            let scene = synth_scene(&spec)?;
            let name = DatasetLayout::file_stem(fold, i);
            write_wav(&audio_dir.join(format!("{name}.wav")), &scene.audio)?;
            scene.metadata.save_metadata(&meta_dir.join(format!("{name}.csv")))?;
            written += 1;
        }
    }
    println!("wrote {written} scenes to {}", a.out.display());
    Ok(())
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let cfg = FeatureConfig {
        segment_frames: a.segment_frames,
        ..FeatureConfig::default()
    };
    cfg.validate()?;
    let audio_dir = DatasetLayout::new(&a.input).audio_dir();
    let wavs = files_with_ext(&audio_dir, "wav")?;
    if wavs.is_empty() {
        return Err(Error::format(
            "dataset",
            format!("no WAV files in {}", audio_dir.display()),
        ));
    }
    create_dir(&a.out)?;
    let mut entries = Vec::with_capacity(wavs.len());
    for path in &wavs {
        let audio = read_wav(path)?;
        if audio.sample_rate != cfg.sample_rate {
            return Err(Error::format(
                "wav",
                format!(
                    "{}: sample rate {} Hz, expected {}",
                    path.display(),
                    audio.sample_rate,
                    cfg.sample_rate
                ),
            ));
        }
        let name = stem(path);
        let blocks = extract_features(&audio.channels, &cfg, &name)?;
        write_feature_file(&a.out.join(format!("{name}.feat")), cfg.hash(), &blocks)?;
        entries.push(ManifestEntry {
            file: name,
            segments: blocks.len(),
        });
    }
    write_manifest(&a.out, &entries)?;
    println!("extracted {} files into {}", entries.len(), a.out.display());
    Ok(())
}

/// Config hash and frames per segment of an extracted feature directory.
fn probe_features(dir: &Path) -> Result<(u64, usize)> {
    let manifest = read_manifest(dir)?;
    let first = manifest
        .first()
        .ok_or_else(|| Error::format("manifest", format!("{} lists no files", dir.display())))?;
    let file = read_feature_file(&dir.join(format!("{}.feat", first.file)), None)?;
    let frames = file.blocks.first().map_or(0, |b| b.frames);
    Ok((file.config_hash, frames))
}

/// Labeled segments of the test folders, or of the validation folders
/// when test labels are unavailable.
fn scoring_set(
    features: &Path,
    metadata: &Path,
    plan: &FoldPlan,
    hash: u64,
    label_frames: usize,
) -> Result<(Vec<Segment>, &'static str)> {
    let test = load_split(features, metadata, &plan.test, hash, label_frames, N_CLASSES, false)?;
    if !test.is_empty() && test.iter().all(|s| s.labels.is_some()) {
        return Ok((test, "test"));
    }
    eprintln!(
        "note: no labeled test folders {:?}; scoring validation folders {:?}",
        plan.test, plan.validation
    );
    let val = load_split(
        features,
        metadata,
        &plan.validation,
        hash,
        label_frames,
        N_CLASSES,
        true,
    )?;
    if val.is_empty() {
        return Err(Error::format("dataset", "no labeled test or validation segments"));
    }
    Ok((val, "validation"))
}

/// Per-file event lists from consecutive segment predictions.
fn per_file_events(segments: &[Segment], preds: &[Decoded], label_frames: usize) -> Vec<(String, EventList)> {
    let mut out: Vec<(String, EventList)> = Vec::new();
    for (seg, pred) in segments.iter().zip(preds) {
        if out.last().is_none_or(|(name, _)| name != seg.source()) {
            out.push((seg.source().to_string(), EventList::default()));
        }
        let list = &mut out.last_mut().expect("pushed above").1;
        list.extend_shifted(&pred.events, seg.features.segment_index * label_frames);
    }
    out
}

struct TrainedSystem {
    checkpoint: PathBuf,
    model: SeldModel<f64>,
    hash: u64,
}

fn run_training(cfg: ModelConfig, run: &RunArgs, out: &Path) -> Result<TrainedSystem> {
    let (hash, frames) = probe_features(&run.features)?;
    let cfg = cfg.with_input_frames(frames)?;
    let plan = FoldPlan::new(run.stage);
    let l = cfg.label_frames();
    let train_set = load_split(&run.features, &run.metadata, &plan.train, hash, l, N_CLASSES, true)?;
    if train_set.is_empty() {
        return Err(Error::format(
            "dataset",
            format!("no training segments in folders {:?}", plan.train),
        ));
    }
    let val_set: Vec<Segment> = load_split(
        &run.features,
        &run.metadata,
        &plan.validation,
        hash,
        l,
        N_CLASSES,
        false,
    )?
    .into_iter()
    .filter(|s| s.labels.is_some())
    .collect();
    let run_cfg = TrainRunConfig {
        epochs: run.epochs,
        learning_rate: run.lr,
        batch_size: run.batch_size,
        seed: run.seed,
        ..TrainRunConfig::default()
    };
    let model = SeldModel::<f64>::new(cfg.clone(), run.seed)?;
    println!(
        "training {} on {} segments ({} validation), {} parameters",
        system_label(&cfg),
        train_set.len(),
        val_set.len(),
        model.parameter_count()
    );
    let outcome = train_model(&model, &train_set, &val_set, &run_cfg, |r| {
        let val = r
            .validation
            .as_ref()
            .map(|m| {
                format!(
                    " val ER20 {:.3} F20 {:.3} LEcd {:.1} LRcd {:.3}",
                    m.er20, m.f20, m.le_cd, m.lr_cd
                )
            })
            .unwrap_or_default();
        println!("epoch {:>3} loss {:.5}{val}", r.epoch, r.train_loss);
    })?;
    model.load_state(&outcome.best_state)?;
    create_dir(out)?;
    let tag = format!("{}_r{}_s{}", cfg.variant, cfg.ratio.unwrap_or(0), run.seed);
    let checkpoint = out.join(format!("{tag}_e{}.ckpt", outcome.best_epoch));
    model.to_checkpoint(hash).save(&checkpoint)?;
    write_text(&out.join(format!("{tag}.log.csv")), &log_csv(&outcome.log))?;
    println!("best epoch {} -> {}", outcome.best_epoch, checkpoint.display());
    Ok(TrainedSystem {
        checkpoint,
        model,
        hash,
    })
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = ModelConfig::new(a.variant, a.ratio)?;
    run_training(cfg, &a.run, &a.run.out).map(|_| ())
}

fn score_model(
    model: &SeldModel<f64>,
    hash: u64,
    features: &Path,
    metadata: &Path,
    plan: &FoldPlan,
    threshold: f64,
    pred_dir: Option<&Path>,
) -> Result<MetricReport> {
    let l = model.config().label_frames();
    let (segments, _) = scoring_set(features, metadata, plan, hash, l)?;
    let preds = predict(model, &segments, 4, threshold)?;
    if let Some(dir) = pred_dir {
        create_dir(dir)?;
        for (name, events) in per_file_events(&segments, &preds, l) {
            events.save_prediction(&dir.join(format!("{name}.csv")))?;
        }
    }
    let (reference, predicted) = frame_events(&segments, &preds)?;
    evaluate(&reference, &predicted, model.config().n_classes)
}

/// Scores prediction CSVs against metadata CSVs file by file.
fn score_predictions(pred_dir: &Path, metadata: &Path, plan: &FoldPlan) -> Result<MetricReport> {
    let mut folds = plan.test.clone();
    let mut metas: Vec<PathBuf> = files_with_ext(metadata, "csv")?
        .into_iter()
        .filter(|p| fold_of(&stem(p)).is_some_and(|f| folds.contains(&f)))
        .collect();
    if metas.is_empty() {
        eprintln!(
            "note: no test metadata for folders {:?}; scoring validation folders",
            plan.test
        );
        folds = plan.validation.clone();
        metas = files_with_ext(metadata, "csv")?
            .into_iter()
            .filter(|p| fold_of(&stem(p)).is_some_and(|f| folds.contains(&f)))
            .collect();
    }
    let mut reference = EventList::default();
    let mut predicted = EventList::default();
    let mut offset = 0;
    for meta in &metas {
        let name = stem(meta);
        let r = EventList::load(meta)?;
        let pred_path = pred_dir.join(format!("{name}.csv"));
        let p = if pred_path.exists() {
            EventList::load(&pred_path)?
        } else {
            EventList::default()
        };
        let span = r.frame_span().max(p.frame_span()).div_ceil(SEGMENT_FRAMES) * SEGMENT_FRAMES;
        reference.extend_shifted(&r, offset);
        predicted.extend_shifted(&p, offset);
        offset += span;
    }
    evaluate(
        &FrameEvents::from_events(&reference, offset)?,
        &FrameEvents::from_events(&predicted, offset)?,
        N_CLASSES,
    )
}

fn write_report(out: &Path, label: &str, report: &MetricReport) -> Result<()> {
    create_dir(out)?;
    let table = report.to_table(label);
    write_text(&out.join("report.txt"), &table)?;
    write_text(&out.join("metrics.csv"), &report.to_csv())?;
    write_text(&out.join("classes.csv"), &report.class_csv())?;
    print!("{table}");
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let plan = FoldPlan::new(a.stage);
    match (&a.checkpoint, &a.predictions) {
        (Some(ckpt), _) => {
            let features = a
                .features
                .as_ref()
                .ok_or_else(|| Error::Config("--features is required with --checkpoint".into()))?;
            let ck = Checkpoint::load(ckpt)?;
            let model = SeldModel::<f64>::from_checkpoint(&ck)?;
            let report = score_model(
                &model,
                ck.header.feature_hash,
                features,
                &a.metadata,
                &plan,
                a.threshold,
                Some(&a.out.join("predictions")),
            )?;
            write_report(&a.out, &system_label(model.config()), &report)
        }
        (None, Some(preds)) => {
            let report = score_predictions(preds, &a.metadata, &plan)?;
            write_report(&a.out, "predictions", &report)
        }
        (None, None) => Err(Error::Config("one of --checkpoint or --predictions is required".into())),
    }
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let model = SeldModel::<f64>::from_checkpoint(&ck)?;
    let cfg = FeatureConfig {
        segment_frames: model.config().input_frames,
        ..FeatureConfig::default()
    };
    if cfg.hash() != ck.header.feature_hash {
        return Err(Error::ConfigHash {
            expected: ck.header.feature_hash,
            found: cfg.hash(),
        });
    }
    let audio = read_wav(&a.wav)?;
    if audio.sample_rate != cfg.sample_rate {
        return Err(Error::format(
            "wav",
            format!("sample rate {} Hz, expected {}", audio.sample_rate, cfg.sample_rate),
        ));
    }
    let blocks = extract_features(&audio.channels, &cfg, &stem(&a.wav))?;
    let l = model.config().label_frames();
    let segments = segments_from(blocks, None, l);
    let preds = predict(&model, &segments, 4, a.threshold)?;
    let mut events = EventList::default();
    for (seg, p) in segments.iter().zip(&preds) {
        events.extend_shifted(&p.events, seg.features.segment_index * l);
    }
    print!("{}", events.to_prediction_csv());
    Ok(())
}

pub fn gridsearch(a: &GridArgs) -> Result<()> {
    let mut systems = vec![ModelConfig::baseline(), ModelConfig::conv_residual()];
    for &r in &a.ratios {
        systems.push(ModelConfig::standard_post(r)?);
    }
    let plan = FoldPlan::new(a.run.stage);
    let (mut rows_2019, mut rows_2020) = (Vec::new(), Vec::new());
    for cfg in systems {
        let label = system_label(&cfg);
        let dir = a.run.out.join(format!("{}_r{}", cfg.variant, cfg.ratio.unwrap_or(0)));
        let trained = run_training(cfg, &a.run, &dir)?;
        let report = score_model(
            &trained.model,
            trained.hash,
            &a.run.features,
            &a.run.metadata,
            &plan,
            0.5,
            None,
        )?;
        println!("{label}: {}", trained.checkpoint.display());
        rows_2019.push(report.row_2019(&label));
        rows_2020.push(report.row_2020(&label));
    }
    let table_2020 = format!(
        "{} results, 2020 metrics\n{}",
        a.run.stage,
        TableRow::render_2020(&rows_2020)
    );
    // Test-fold labels are withheld at the evaluation stage, so only the
    // 2020 comparison is reported there.
    let text = match a.run.stage {
        Stage::Development => format!(
            "{} results, 2019 metrics\n{}\n{table_2020}",
            a.run.stage,
            TableRow::render_2019(&rows_2019)
        ),
        Stage::Evaluation => table_2020,
    };
    create_dir(&a.run.out)?;
    write_text(&a.run.out.join("gridsearch.txt"), &text)?;
    print!("{text}");
    Ok(())
}
