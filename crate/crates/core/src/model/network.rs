use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant};
use crate::checkpoint::{Checkpoint, CheckpointHeader, NamedArray};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, BiGru, Conv2d, Dense, Parameter};
use crate::ops::{self, Mode, RunningStats};
use crate::scalar::Scalar;
use crate::se::{ResidualBlock, ResidualBlockConfig};
use crate::tensor::Tensor;

/// Feature extractor of one stage, before pooling.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum ConvBlock<S: Scalar> {
    Plain { conv: Conv2d<S>, bn: BatchNorm2d<S> },
    Residual(ResidualBlock<S>),
}

impl<S: Scalar> ConvBlock<S> {
    fn forward(&self, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        match self {
            ConvBlock::Plain { conv, bn } => Ok(ops::relu(&bn.forward(&conv.forward(x)?, mode)?)),
            ConvBlock::Residual(block) => block.forward(x, mode),
        }
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        match self {
            ConvBlock::Plain { conv, bn } => {
                let mut v = conv.parameters();
                v.extend(bn.parameters());
                v
            }
            ConvBlock::Residual(block) => block.parameters(),
        }
    }

    pub fn batch_norms(&self) -> Vec<&BatchNorm2d<S>> {
        match self {
            ConvBlock::Plain { bn, .. } => vec![bn],
            ConvBlock::Residual(block) => block.batch_norms(),
        }
    }
}

/// Per-frame class activity in `(0, 1)` and per-class Cartesian DOA in `(-1, 1)`.
#[derive(Clone, Debug)]
pub struct ModelOutput<S: Scalar> {
    /// `[B, L, K]`.
    pub sed: Tensor<S>,
    /// `[B, L, 3K]`, blocked by axis.
    pub doa: Tensor<S>,
}

/// Convolutional blocks, bidirectional GRUs and the two dense heads.
#[derive(Debug)]
pub struct SeldModel<S: Scalar> {
    cfg: ModelConfig,
    pub blocks: Vec<ConvBlock<S>>,
    pub rnns: Vec<BiGru<S>>,
    pub sed_fc1: Dense<S>,
    pub sed_fc2: Dense<S>,
    pub doa_fc1: Dense<S>,
    pub doa_fc2: Dense<S>,
    dropout_rng: RefCell<ChaCha8Rng>,
}

const DROPOUT_STREAM: u64 = 0x5e1d;

impl<S: Scalar> SeldModel<S> {
    /// Deterministic in `seed`: equal seeds give bit-identical parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(cfg.n_blocks());
        for i in 0..cfg.n_blocks() {
            let name = format!("block{}", i + 1);
            let c_in = if i == 0 { cfg.input_channels } else { cfg.filters };
            let block = match cfg.variant {
                Variant::Baseline => ConvBlock::Plain {
                    conv: Conv2d::new(&format!("{name}.conv1"), c_in, cfg.filters, (3, 3), &mut rng)?,
                    bn: BatchNorm2d::new(&format!("{name}.bn1"), cfg.filters)?.with_identity_stats(),
                },
                Variant::ConvResidual => ConvBlock::Residual(ResidualBlock::new(
                    &name,
                    ResidualBlockConfig::plain(c_in, cfg.filters),
                    &mut rng,
                )?),
                Variant::StandardPost => {
                    let ratio = cfg.ratio.expect("validated ratio");
                    let mut bc = ResidualBlockConfig::standard_post(c_in, cfg.filters, ratio)?;
                    if let Some(se) = bc.se.as_mut() {
                        se.combine = cfg.combine;
                    }
                    ConvBlock::Residual(ResidualBlock::new(&name, bc, &mut rng)?)
                }
            };
            blocks.push(block);
        }
        let mut rnns = Vec::with_capacity(cfg.rnn_layers);
        let mut width = cfg.rnn_input();
        for i in 0..cfg.rnn_layers {
            let g = BiGru::new(&format!("rnn{}", i + 1), width, cfg.rnn_hidden, cfg.merge, &mut rng)?;
            width = g.output_width();
            rnns.push(g);
        }
        let sed_fc1 = Dense::new("sed.fc1", width, cfg.fnn_hidden, &mut rng)?;
        let sed_fc2 = Dense::new("sed.fc2", cfg.fnn_hidden, cfg.n_classes, &mut rng)?;
        let doa_fc1 = Dense::new("doa.fc1", width, cfg.fnn_hidden, &mut rng)?;
        let doa_fc2 = Dense::new("doa.fc2", cfg.fnn_hidden, cfg.doa_width(), &mut rng)?;
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
        dropout_rng.set_stream(DROPOUT_STREAM);
        Ok(Self {
            cfg,
            blocks,
            rnns,
            sed_fc1,
            sed_fc2,
            doa_fc1,
            doa_fc2,
            dropout_rng: RefCell::new(dropout_rng),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Restarts the dropout mask sequence.
    pub fn reseed_dropout(&self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DROPOUT_STREAM);
        *self.dropout_rng.borrow_mut() = rng;
    }

    /// `[B, C, T, F]` features to SED and DOA predictions.
    pub fn forward(&self, x: &Tensor<S>, mode: Mode) -> Result<ModelOutput<S>> {
        let c = &self.cfg;
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!("model input must be [B,C,T,F], got {s:?}")));
        }
        for (axis, expected, actual) in [
            ("input channels", c.input_channels, s[1]),
            ("input frames", c.input_frames, s[2]),
            ("input bins", c.input_bins, s[3]),
        ] {
            if expected != actual {
                return Err(Error::dim(axis, expected, actual));
            }
        }
        let batch = s[0];
        let mut h = x.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            h = block.forward(&h, mode)?;
            h = ops::max_pool2d(&h, c.t_pool[i], c.f_pool[i])?;
            if mode == Mode::Train && c.dropout > 0.0 {
                h = ops::dropout(&h, c.dropout, &mut *self.dropout_rng.borrow_mut())?;
            }
        }
        let l = c.label_frames();
        h = ops::permute(&h, &[0, 2, 1, 3])?;
        h = ops::reshape(&h, &[batch, l, c.rnn_input()])?;
        for rnn in &self.rnns {
            h = rnn.forward(&h)?;
        }
        let sed = ops::sigmoid(&self.sed_fc2.forward(&self.sed_fc1.forward(&h)?)?);
        let doa = ops::tanh(&self.doa_fc2.forward(&self.doa_fc1.forward(&h)?)?);
        Ok(ModelOutput { sed, doa })
    }

    /// Every trainable parameter, in a fixed order.
    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut v: Vec<&Parameter<S>> = self.blocks.iter().flat_map(ConvBlock::parameters).collect();
        v.extend(self.rnns.iter().flat_map(BiGru::parameters));
        for d in [&self.sed_fc1, &self.sed_fc2, &self.doa_fc1, &self.doa_fc2] {
            v.extend(d.parameters());
        }
        v
    }

    pub fn batch_norms(&self) -> Vec<&BatchNorm2d<S>> {
        self.blocks.iter().flat_map(ConvBlock::batch_norms).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    /// Parameters and batch-norm running statistics as doubles.
    pub fn state_dict(&self) -> Vec<NamedArray> {
        let mut out: Vec<NamedArray> = self
            .parameters()
            .into_iter()
            .map(|p| NamedArray {
                name: p.name().to_string(),
                shape: p.shape().to_vec(),
                data: p.tensor().data().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        for bn in self.batch_norms() {
            if let Some(rs) = bn.stats.borrow().as_ref() {
                for (suffix, vals) in [("running_mean", &rs.mean), ("running_var", &rs.var)] {
                    out.push(NamedArray {
                        name: format!("{}.{suffix}", bn.name()),
                        shape: vec![vals.len()],
                        data: vals.iter().map(|v| v.as_f64()).collect(),
                    });
                }
            }
        }
        out
    }

    /// Overwrites parameters and running statistics; every parameter must be present.
    pub fn load_state(&self, entries: &[NamedArray]) -> Result<()> {
        let find = |name: &str| entries.iter().find(|e| e.name == name);
        for p in self.parameters() {
            let e = find(p.name())
                .ok_or_else(|| Error::format("checkpoint", format!("missing parameter `{}`", p.name())))?;
            if e.shape != p.shape() {
                return Err(Error::format(
                    "checkpoint",
                    format!("`{}` has shape {:?}, model expects {:?}", p.name(), e.shape, p.shape()),
                ));
            }
            let mut data = p.tensor().data_mut();
            for (d, &v) in data.iter_mut().zip(&e.data) {
                *d = S::of(v);
            }
        }
        for bn in self.batch_norms() {
            let mean = find(&format!("{}.running_mean", bn.name()));
            let var = find(&format!("{}.running_var", bn.name()));
            if let (Some(m), Some(v)) = (mean, var) {
                if m.data.len() != bn.gamma.numel() || v.data.len() != bn.gamma.numel() {
                    return Err(Error::format(
                        "checkpoint",
                        format!("`{}` running stats size", bn.name()),
                    ));
                }
                *bn.stats.borrow_mut() = Some(RunningStats {
                    mean: m.data.iter().map(|&x| S::of(x)).collect(),
                    var: v.data.iter().map(|&x| S::of(x)).collect(),
                });
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, feature_hash: u64) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                variant: self.cfg.variant.to_string(),
                ratio: self.cfg.ratio.unwrap_or(0) as u32,
                config_json: self.cfg.to_json(),
                feature_hash,
            },
            entries: self.state_dict(),
        }
    }

    /// Rebuilds the model recorded in a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg = ModelConfig::from_json(&ckpt.header.config_json)?;
        let model = Self::new(cfg, 0)?;
        model.load_state(&ckpt.entries)?;
        Ok(model)
    }
}
