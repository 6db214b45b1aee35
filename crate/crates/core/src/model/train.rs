use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decode::{decode, Decoded, DEFAULT_THRESHOLD};
use super::loss::{batch_input, seld_loss, LabelBatch};
use super::network::SeldModel;
use crate::checkpoint::NamedArray;
use crate::data::Segment;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, FrameEvents, MetricReport};
use crate::ops::Mode;
use crate::optim::{zero_grad, Adam, AdamConfig};
use crate::scalar::Scalar;
use crate::tensor::no_grad;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Validate every this many epochs (0 disables validation).
    pub validate_every: usize,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            validate_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Option<MetricReport>,
    pub wall_seconds: f64,
}

pub const LOG_HEADER: &str = "epoch,train_loss,er20,f20,le_cd,lr_cd,er,f,le,lr,wall_seconds";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let metrics = match &self.validation {
            Some(r) => r.csv_row(),
            None => ",,,,,,,".into(),
        };
        format!(
            "{},{},{},{:.3}",
            self.epoch, self.train_loss, metrics, self.wall_seconds
        )
    }
}

pub fn log_csv(records: &[EpochRecord]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Mini-batch optimization state bound to one model.
pub struct Trainer<'m, S: Scalar> {
    model: &'m SeldModel<S>,
    adam: Adam<S>,
    cfg: TrainRunConfig,
    epoch: usize,
}

impl<'m, S: Scalar> Trainer<'m, S> {
    /// Reseeds the model's dropout stream from the run seed.
    pub fn new(model: &'m SeldModel<S>, cfg: TrainRunConfig) -> Result<Self> {
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        model.reseed_dropout(cfg.seed);
        let adam = Adam::new(AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        });
        Ok(Self {
            model,
            adam,
            cfg,
            epoch: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn optimizer(&self) -> &Adam<S> {
        &self.adam
    }

    /// One pass over `data` in seeded shuffled order; returns the mean batch loss.
    pub fn train_epoch(&mut self, data: &[Segment]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let (w_sed, w_doa) = self.model.config().loss_weights;
        let params = self.model.parameters();
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            let segs: Vec<&Segment> = chunk.iter().map(|&i| &data[i]).collect();
            let x = batch_input::<S>(&segs)?;
            let labels = LabelBatch::from_segments(&segs)?;
            let out = self.model.forward(&x, Mode::Train)?;
            let loss = seld_loss(&out, &labels, w_sed, w_doa)?;
            let value = loss.total.item().as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b + 1,
                    detail: format!("loss is {value}"),
                });
            }
            zero_grad(&params);
            loss.total.backward()?;
            if let Some(p) = params
                .iter()
                .find(|p| p.tensor().grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())))
            {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b + 1,
                    detail: format!("gradient of `{}`", p.name()),
                });
            }
            self.adam.step(&params)?;
            total += value;
            batches += 1;
        }
        self.epoch = epoch;
        Ok(total / batches as f64)
    }
}

/// Eval-mode predictions, one per segment.
pub fn predict<S: Scalar>(
    model: &SeldModel<S>,
    segments: &[Segment],
    batch_size: usize,
    threshold: f64,
) -> Result<Vec<Decoded>> {
    let mut out = Vec::with_capacity(segments.len());
    for chunk in segments.chunks(batch_size.max(1)) {
        let segs: Vec<&Segment> = chunk.iter().collect();
        let decoded = no_grad(|| -> Result<_> {
            let x = batch_input::<S>(&segs)?;
            Ok(decode(&model.forward(&x, Mode::Eval)?, threshold))
        })?;
        out.extend(decoded);
    }
    Ok(out)
}

/// Reference and predicted frames of consecutive segments, concatenated.
pub fn frame_events(segments: &[Segment], predictions: &[Decoded]) -> Result<(FrameEvents, FrameEvents)> {
    let frames: usize = segments.iter().map(|s| s.labels.as_ref().map_or(0, |g| g.frames)).sum();
    let mut reference = FrameEvents::new(frames);
    let mut predicted = FrameEvents::new(frames);
    let mut offset = 0;
    for (seg, pred) in segments.iter().zip(predictions) {
        let grid = seg
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config(format!("segment of `{}` has no labels", seg.source())))?;
        for t in 0..grid.frames {
            for c in 0..grid.n_classes {
                if grid.is_active(t, c) {
                    reference.push(offset + t, c, grid.direction(t, c))?;
                }
            }
        }
        for e in pred.events.iter() {
            predicted.push(offset + e.frame, e.class, e.direction())?;
        }
        offset += grid.frames;
    }
    Ok((reference, predicted))
}

/// Both metric suites over labeled segments.
pub fn evaluate_segments<S: Scalar>(
    model: &SeldModel<S>,
    segments: &[Segment],
    batch_size: usize,
    threshold: f64,
) -> Result<MetricReport> {
    let preds = predict(model, segments, batch_size, threshold)?;
    let (reference, predicted) = frame_events(segments, &preds)?;
    evaluate(&reference, &predicted, model.config().n_classes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    /// Epoch of `best_state`; 0 means the initialization.
    pub best_epoch: usize,
    pub best_rank: Option<f64>,
    pub best_state: Vec<NamedArray>,
}

/// Full run: `epochs` passes, periodic validation, best state by aggregate rank.
///
/// Without validation the final state is kept.
pub fn train<S: Scalar>(
    model: &SeldModel<S>,
    train_set: &[Segment],
    val_set: &[Segment],
    cfg: &TrainRunConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let mut outcome = TrainOutcome {
        log: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_rank: None,
        best_state: model.state_dict(),
    };
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        let train_loss = trainer.train_epoch(train_set)?;
        let validate =
            cfg.validate_every > 0 && !val_set.is_empty() && (epoch % cfg.validate_every == 0 || epoch == cfg.epochs);
        let validation = if validate {
            Some(evaluate_segments(model, val_set, cfg.batch_size, cfg.threshold)?)
        } else {
            None
        };
        match &validation {
            Some(report) => {
                let rank = report.aggregate_rank();
                if outcome.best_rank.is_none_or(|b| rank < b) {
                    outcome.best_rank = Some(rank);
                    outcome.best_epoch = epoch;
                    outcome.best_state = model.state_dict();
                }
            }
            None if outcome.best_rank.is_none() => {
                outcome.best_epoch = epoch;
                outcome.best_state = model.state_dict();
            }
            None => {}
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            validation,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        outcome.log.push(record);
    }
    Ok(outcome)
}
