//! Squeeze-excitation recalibration and the residual conv blocks that use it.
//!
//! * channel SE (cSE): spatial mean per channel, a `C -> C/ratio -> C`
//!   bottleneck MLP and a sigmoid gate per channel.
//! * spatial SE (sSE): a `1x1` conv `C -> 1` and a sigmoid gate per
//!   time-frequency position, shared across channels.
//! * scSE: both gates applied to the same input and combined.
//!
//! `ResidualBlock` implements the plain residual block and the
//! "standard POST" block, which applies scSE to the residual sum before
//! the final ReLU.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, Dense, Parameter};
use crate::ops::{self, Mode};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Ratios explored by the grid search.
pub const RATIO_GRID: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    #[default]
    Add,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeConfig {
    pub ratio: usize,
    pub channels: usize,
    #[serde(default)]
    pub combine: Combine,
}

impl SeConfig {
    pub fn new(ratio: usize, channels: usize) -> Result<Self> {
        let cfg = Self {
            ratio,
            channels,
            combine: Combine::Add,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio == 0 || self.channels == 0 {
            return Err(Error::Config("SE ratio and channels must be positive".into()));
        }
        if !self.channels.is_multiple_of(self.ratio) {
            return Err(Error::Config(format!(
                "SE ratio {} does not divide {} channels",
                self.ratio, self.channels
            )));
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> usize {
        self.channels / self.ratio
    }

    /// Weights and biases added by the channel branch: `2·C·C/ρ + C/ρ + C`.
    pub fn cse_parameter_count(&self) -> usize {
        let (c, b) = (self.channels, self.bottleneck());
        2 * c * b + b + c
    }

    /// Weights and biases added by the spatial branch: `C + 1`.
    pub fn sse_parameter_count(&self) -> usize {
        self.channels + 1
    }
}

#[derive(Debug)]
pub struct ChannelSe<S: Scalar> {
    pub fc1: Dense<S>,
    pub fc2: Dense<S>,
    cfg: SeConfig,
}

impl<S: Scalar> ChannelSe<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, cfg: SeConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            fc1: Dense::new(&format!("{name}.fc1"), cfg.channels, cfg.bottleneck(), rng)?,
            fc2: Dense::new(&format!("{name}.fc2"), cfg.bottleneck(), cfg.channels, rng)?,
            cfg,
        })
    }

    /// Per-channel gates `[B, C, 1, 1]` in (0, 1).
    pub fn gate(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = u.shape();
        if shape.len() != 4 || shape[1] != self.cfg.channels {
            return Err(Error::dim(
                "cSE channels",
                self.cfg.channels,
                shape.get(1).copied().unwrap_or(0),
            ));
        }
        let z = ops::global_avg_pool2d(u)?;
        let s = ops::relu(&self.fc1.forward(&z)?);
        let g = ops::sigmoid(&self.fc2.forward(&s)?);
        ops::reshape(&g, &[shape[0], shape[1], 1, 1])
    }

    pub fn forward(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        ops::mul(u, &self.gate(u)?)
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut v = self.fc1.parameters();
        v.extend(self.fc2.parameters());
        v
    }
}

#[derive(Debug)]
pub struct SpatialSe<S: Scalar> {
    pub conv: Conv2d<S>,
}

impl<S: Scalar> SpatialSe<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, channels: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(&format!("{name}.conv"), channels, 1, (1, 1), rng)?,
        })
    }

    /// Per-position gates `[B, 1, H, W]` in (0, 1).
    pub fn gate(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(ops::sigmoid(&self.conv.forward(u)?))
    }

    pub fn forward(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        ops::mul(u, &self.gate(u)?)
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        self.conv.parameters()
    }
}

/// Concurrent spatial and channel squeeze-excitation.
#[derive(Debug)]
pub struct ScSe<S: Scalar> {
    pub cse: ChannelSe<S>,
    pub sse: SpatialSe<S>,
    pub combine: Combine,
}

impl<S: Scalar> ScSe<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, cfg: SeConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            cse: ChannelSe::new(&format!("{name}.cse"), cfg, rng)?,
            sse: SpatialSe::new(&format!("{name}.sse"), cfg.channels, rng)?,
            combine: cfg.combine,
        })
    }

    pub fn forward(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        let c = self.cse.forward(u)?;
        let s = self.sse.forward(u)?;
        match self.combine {
            Combine::Add => ops::add(&c, &s),
            Combine::Max => ops::maximum(&c, &s),
        }
    }

    /// Zeroes every excitation weight and bias, making each gate exactly 0.5.
    pub fn zero_excitation(&self) {
        for p in self.parameters() {
            p.zero_();
        }
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut v = self.cse.parameters();
        v.extend(self.sse.parameters());
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockVariant {
    PlainResidual,
    StandardPost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualBlockConfig {
    pub variant: BlockVariant,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub se: Option<SeConfig>,
}

impl ResidualBlockConfig {
    pub fn plain(in_channels: usize, out_channels: usize) -> Self {
        Self {
            variant: BlockVariant::PlainResidual,
            in_channels,
            out_channels,
            kernel: (3, 3),
            se: None,
        }
    }

    pub fn standard_post(in_channels: usize, out_channels: usize, ratio: usize) -> Result<Self> {
        Ok(Self {
            variant: BlockVariant::StandardPost,
            in_channels,
            out_channels,
            kernel: (3, 3),
            se: Some(SeConfig::new(ratio, out_channels)?),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("block channels must be positive".into()));
        }
        if self.kernel.0.is_multiple_of(2) || self.kernel.1.is_multiple_of(2) {
            return Err(Error::Config(format!("block kernel {:?} must be odd", self.kernel)));
        }
        match (self.variant, self.se) {
            (BlockVariant::PlainResidual, Some(_)) => {
                Err(Error::Config("plain residual block takes no SE configuration".into()))
            }
            (BlockVariant::StandardPost, None) => {
                Err(Error::Config("standard-post block requires an SE configuration".into()))
            }
            (BlockVariant::StandardPost, Some(se)) if se.channels != self.out_channels => {
                Err(Error::dim("SE channels", self.out_channels, se.channels))
            }
            (_, se) => se.map_or(Ok(()), |s| s.validate()),
        }
    }
}

/// `conv -> BN -> ReLU -> conv -> BN`, plus an identity or `1x1 conv -> BN`
/// shortcut, summed, optionally recalibrated by scSE, then ReLU.
#[derive(Debug)]
pub struct ResidualBlock<S: Scalar> {
    pub conv1: Conv2d<S>,
    pub bn1: BatchNorm2d<S>,
    pub conv2: Conv2d<S>,
    pub bn2: BatchNorm2d<S>,
    pub shortcut: Option<(Conv2d<S>, BatchNorm2d<S>)>,
    pub scse: Option<ScSe<S>>,
    cfg: ResidualBlockConfig,
}

impl<S: Scalar> ResidualBlock<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, cfg: ResidualBlockConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (ci, co) = (cfg.in_channels, cfg.out_channels);
        let conv1 = Conv2d::new(&format!("{name}.conv1"), ci, co, cfg.kernel, rng)?;
        let bn1 = BatchNorm2d::new(&format!("{name}.bn1"), co)?.with_identity_stats();
        let conv2 = Conv2d::new(&format!("{name}.conv2"), co, co, cfg.kernel, rng)?;
        let bn2 = BatchNorm2d::new(&format!("{name}.bn2"), co)?.with_identity_stats();
        let shortcut = if ci != co {
            Some((
                Conv2d::new(&format!("{name}.shortcut"), ci, co, (1, 1), rng)?,
                BatchNorm2d::new(&format!("{name}.shortcut_bn"), co)?.with_identity_stats(),
            ))
        } else {
            None
        };
        let scse = match cfg.se {
            Some(se) => Some(ScSe::new(name, se, rng)?),
            None => None,
        };
        Ok(Self {
            conv1,
            bn1,
            conv2,
            bn2,
            shortcut,
            scse,
            cfg,
        })
    }

    pub fn config(&self) -> &ResidualBlockConfig {
        &self.cfg
    }

    pub fn forward(&self, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != self.cfg.in_channels {
            return Err(Error::dim(
                "block input channels",
                self.cfg.in_channels,
                shape.get(1).copied().unwrap_or(0),
            ));
        }
        let h = ops::relu(&self.bn1.forward(&self.conv1.forward(x)?, mode)?);
        let main = self.bn2.forward(&self.conv2.forward(&h)?, mode)?;
        let skip = match &self.shortcut {
            Some((conv, bn)) => bn.forward(&conv.forward(x)?, mode)?,
            None => x.clone(),
        };
        if main.shape() != skip.shape() {
            return Err(Error::Shape(format!(
                "residual paths disagree: {:?} vs {:?}",
                main.shape(),
                skip.shape()
            )));
        }
        let mut sum = ops::add(&main, &skip)?;
        if let Some(scse) = &self.scse {
            sum = scse.forward(&sum)?;
        }
        Ok(ops::relu(&sum))
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut v = self.conv1.parameters();
        v.extend(self.bn1.parameters());
        v.extend(self.conv2.parameters());
        v.extend(self.bn2.parameters());
        if let Some((conv, bn)) = &self.shortcut {
            v.extend(conv.parameters());
            v.extend(bn.parameters());
        }
        if let Some(scse) = &self.scse {
            v.extend(scse.parameters());
        }
        v
    }

    pub fn batch_norms(&self) -> Vec<&BatchNorm2d<S>> {
        let mut v = vec![&self.bn1, &self.bn2];
        if let Some((_, bn)) = &self.shortcut {
            v.push(bn);
        }
        v
    }
}
