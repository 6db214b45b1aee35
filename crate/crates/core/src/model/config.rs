use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Merge;
use crate::se::Combine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// One `conv -> BN -> ReLU` per block.
    Baseline,
    /// Residual block without recalibration.
    ConvResidual,
    /// Residual block with scSE after the residual sum.
    StandardPost,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::ConvResidual, Variant::StandardPost];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::ConvResidual => "conv-residual",
            Variant::StandardPost => "standard-post",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// SE bottleneck ratio; only for `standard-post`.
    pub ratio: Option<usize>,
    pub input_channels: usize,
    pub input_frames: usize,
    pub input_bins: usize,
    pub filters: usize,
    /// Per-block pooling along time and frequency; the length is the block count.
    pub t_pool: Vec<usize>,
    pub f_pool: Vec<usize>,
    pub rnn_layers: usize,
    pub rnn_hidden: usize,
    pub fnn_hidden: usize,
    pub n_classes: usize,
    pub dropout: f64,
    /// `(w_sed, w_doa)`.
    pub loss_weights: (f64, f64),
    pub combine: Combine,
    pub merge: Merge,
}

impl ModelConfig {
    pub fn new(variant: Variant, ratio: Option<usize>) -> Result<Self> {
        let cfg = Self {
            variant,
            ratio,
            input_channels: 10,
            input_frames: 300,
            input_bins: 64,
            filters: 64,
            t_pool: vec![5, 1, 1],
            f_pool: vec![4, 4, 2],
            rnn_layers: 2,
            rnn_hidden: 128,
            fnn_hidden: 128,
            n_classes: 14,
            dropout: 0.05,
            loss_weights: (1.0, 1000.0),
            combine: Combine::Add,
            merge: Merge::Multiply,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn baseline() -> Self {
        Self::new(Variant::Baseline, None).expect("default baseline config")
    }

    pub fn conv_residual() -> Self {
        Self::new(Variant::ConvResidual, None).expect("default residual config")
    }

    pub fn standard_post(ratio: usize) -> Result<Self> {
        Self::new(Variant::StandardPost, Some(ratio))
    }

    /// Same network on inputs of `frames` time steps.
    pub fn with_input_frames(mut self, frames: usize) -> Result<Self> {
        self.input_frames = frames;
        self.validate()?;
        Ok(self)
    }

    pub fn n_blocks(&self) -> usize {
        self.t_pool.len()
    }

    pub fn label_frames(&self) -> usize {
        self.input_frames / self.t_pool.iter().product::<usize>()
    }

    pub fn pooled_bins(&self) -> usize {
        self.input_bins / self.f_pool.iter().product::<usize>()
    }

    pub fn rnn_input(&self) -> usize {
        self.filters * self.pooled_bins()
    }

    pub fn doa_width(&self) -> usize {
        3 * self.n_classes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (self.variant, self.ratio) {
            (Variant::StandardPost, None) => return bad("standard-post requires a ratio".into()),
            (Variant::StandardPost, Some(r)) if r == 0 || !self.filters.is_multiple_of(r) => {
                return bad(format!("ratio {r} must divide {} filters", self.filters))
            }
            (v, Some(r)) if v != Variant::StandardPost => return bad(format!("variant {v} takes no ratio (got {r})")),
            _ => {}
        }
        if self.t_pool.is_empty() || self.t_pool.len() != self.f_pool.len() {
            return bad("t_pool and f_pool must be non-empty and of equal length".into());
        }
        let tp: usize = self.t_pool.iter().product();
        let fp: usize = self.f_pool.iter().product();
        if tp == 0 || fp == 0 || !self.input_frames.is_multiple_of(tp) || !self.input_bins.is_multiple_of(fp) {
            return bad(format!(
                "pooling {tp}x{fp} must divide the {}x{} input",
                self.input_frames, self.input_bins
            ));
        }
        if self.input_frames / tp == 0 || self.input_bins / fp == 0 {
            return bad("pooling leaves nothing".into());
        }
        if [
            self.input_channels,
            self.filters,
            self.rnn_hidden,
            self.fnn_hidden,
            self.n_classes,
        ]
        .contains(&0)
        {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::format("model config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
