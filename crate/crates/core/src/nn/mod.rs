//! Parameterized layers built on the tensor primitives.

mod init;
mod layers;

pub use init::{glorot_uniform, Init};
pub use layers::{BatchNorm2d, BiGru, Conv2d, Dense, Gru, Merge};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A named trainable tensor.
#[derive(Clone, Debug)]
pub struct Parameter<S: Scalar> {
    name: String,
    tensor: Tensor<S>,
}

impl<S: Scalar> Parameter<S> {
    pub fn new(name: impl Into<String>, shape: &[usize], data: Vec<S>) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            tensor: Tensor::variable(shape, data)?,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &Tensor<S> {
        &self.tensor
    }

    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    pub fn numel(&self) -> usize {
        self.tensor.numel()
    }

    /// Overwrites all values with zero.
    pub fn zero_(&self) {
        self.tensor.data_mut().fill(S::zero());
    }
}

/// Total element count over a parameter list.
pub fn count_parameters<S: Scalar>(params: &[&Parameter<S>]) -> usize {
    params.iter().map(|p| p.numel()).sum()
}
