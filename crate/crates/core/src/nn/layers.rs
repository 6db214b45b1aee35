use std::cell::RefCell;

use rand::Rng;

use super::{Init, Parameter};
use crate::error::Result;
use crate::ops::{self, BatchNormParams, GruParams, Mode, Padding, RunningStats};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn param<S: Scalar, R: Rng + ?Sized>(name: String, shape: &[usize], init: Init, rng: &mut R) -> Result<Parameter<S>> {
    let n = shape.iter().product();
    Parameter::new(name, shape, init.sample(n, rng))
}

#[derive(Debug)]
pub struct Conv2d<S: Scalar> {
    pub weight: Parameter<S>,
    pub bias: Parameter<S>,
    pub padding: Padding,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        rng: &mut R,
    ) -> Result<Self> {
        let (kh, kw) = kernel;
        let init = Init::GlorotUniform {
            fan_in: c_in * kh * kw,
            fan_out: c_out * kh * kw,
        };
        Ok(Self {
            weight: param(format!("{name}.weight"), &[c_out, c_in, kh, kw], init, rng)?,
            bias: param(format!("{name}.bias"), &[c_out], Init::Constant(0.0), rng)?,
            padding: Padding::Same,
        })
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::conv2d(x, self.weight.tensor(), Some(self.bias.tensor()), self.padding)
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![&self.weight, &self.bias]
    }
}

#[derive(Debug)]
pub struct BatchNorm2d<S: Scalar> {
    name: String,
    pub gamma: Parameter<S>,
    pub beta: Parameter<S>,
    pub stats: RefCell<Option<RunningStats<S>>>,
    pub params: BatchNormParams<S>,
}

impl<S: Scalar> BatchNorm2d<S> {
    /// Layer without running statistics; eval mode fails until a train step runs.
    pub fn new(name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            gamma: Parameter::new(format!("{name}.gamma"), &[channels], vec![S::one(); channels])?,
            beta: Parameter::new(format!("{name}.beta"), &[channels], vec![S::zero(); channels])?,
            stats: RefCell::new(None),
            params: BatchNormParams::default(),
        })
    }

    /// Starts from zero running mean and unit running variance.
    pub fn with_identity_stats(self) -> Self {
        let c = self.gamma.numel();
        *self.stats.borrow_mut() = Some(RunningStats::identity(c));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forward(&self, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        ops::batch_norm2d(
            x,
            self.gamma.tensor(),
            self.beta.tensor(),
            &self.stats,
            mode,
            self.params,
        )
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![&self.gamma, &self.beta]
    }
}

#[derive(Debug)]
pub struct Dense<S: Scalar> {
    pub weight: Parameter<S>,
    pub bias: Parameter<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Result<Self> {
        let init = Init::GlorotUniform {
            fan_in: d_in,
            fan_out: d_out,
        };
        Ok(Self {
            weight: param(format!("{name}.weight"), &[d_in, d_out], init, rng)?,
            bias: param(format!("{name}.bias"), &[d_out], Init::Constant(0.0), rng)?,
        })
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::dense(x, self.weight.tensor(), Some(self.bias.tensor()))
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![&self.weight, &self.bias]
    }
}

/// One GRU direction.
#[derive(Debug)]
pub struct Gru<S: Scalar> {
    pub w_z: Parameter<S>,
    pub w_r: Parameter<S>,
    pub w_h: Parameter<S>,
    pub u_z: Parameter<S>,
    pub u_r: Parameter<S>,
    pub u_h: Parameter<S>,
    pub b_z: Parameter<S>,
    pub b_r: Parameter<S>,
    pub b_h: Parameter<S>,
}

impl<S: Scalar> Gru<S> {
    /// Kernels use the fan of the stacked three-gate matrices.
    pub fn new<R: Rng + ?Sized>(name: &str, d_in: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let w = Init::GlorotUniform {
            fan_in: d_in,
            fan_out: 3 * hidden,
        };
        let u = Init::GlorotUniform {
            fan_in: hidden,
            fan_out: 3 * hidden,
        };
        let z = Init::Constant(0.0);
        Ok(Self {
            w_z: param(format!("{name}.w_z"), &[d_in, hidden], w, rng)?,
            w_r: param(format!("{name}.w_r"), &[d_in, hidden], w, rng)?,
            w_h: param(format!("{name}.w_h"), &[d_in, hidden], w, rng)?,
            u_z: param(format!("{name}.u_z"), &[hidden, hidden], u, rng)?,
            u_r: param(format!("{name}.u_r"), &[hidden, hidden], u, rng)?,
            u_h: param(format!("{name}.u_h"), &[hidden, hidden], u, rng)?,
            b_z: param(format!("{name}.b_z"), &[hidden], z, rng)?,
            b_r: param(format!("{name}.b_r"), &[hidden], z, rng)?,
            b_h: param(format!("{name}.b_h"), &[hidden], z, rng)?,
        })
    }

    pub fn weights(&self) -> GruParams<S> {
        GruParams {
            w_z: self.w_z.tensor().clone(),
            w_r: self.w_r.tensor().clone(),
            w_h: self.w_h.tensor().clone(),
            u_z: self.u_z.tensor().clone(),
            u_r: self.u_r.tensor().clone(),
            u_h: self.u_h.tensor().clone(),
            b_z: self.b_z.tensor().clone(),
            b_r: self.b_r.tensor().clone(),
            b_h: self.b_h.tensor().clone(),
        }
    }

    pub fn forward(&self, x: &Tensor<S>, reverse: bool) -> Result<Tensor<S>> {
        ops::gru(x, &self.weights(), reverse)
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        vec![
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }
}

/// How the two directions of a bidirectional GRU are combined per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Merge {
    #[default]
    Multiply,
    Concat,
}

#[derive(Debug)]
pub struct BiGru<S: Scalar> {
    pub forward_dir: Gru<S>,
    pub backward_dir: Gru<S>,
    pub merge: Merge,
}

impl<S: Scalar> BiGru<S> {
    pub fn new<R: Rng + ?Sized>(name: &str, d_in: usize, hidden: usize, merge: Merge, rng: &mut R) -> Result<Self> {
        Ok(Self {
            forward_dir: Gru::new(&format!("{name}.fwd"), d_in, hidden, rng)?,
            backward_dir: Gru::new(&format!("{name}.bwd"), d_in, hidden, rng)?,
            merge,
        })
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let f = self.forward_dir.forward(x, false)?;
        let b = self.backward_dir.forward(x, true)?;
        match self.merge {
            Merge::Multiply => ops::mul(&f, &b),
            Merge::Concat => ops::concat_last(&f, &b),
        }
    }

    pub fn output_width(&self) -> usize {
        let h = self.forward_dir.u_z.shape()[0];
        match self.merge {
            Merge::Multiply => h,
            Merge::Concat => 2 * h,
        }
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut v = self.forward_dir.parameters();
        v.extend(self.backward_dir.parameters());
        v
    }
}
