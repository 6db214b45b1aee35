//! Sound event localization and detection: a small reverse-mode autodiff
//! engine, squeeze-excitation residual blocks, a log-mel/GCC-PHAT front-end,
//! a convolutional-recurrent model, both evaluation metric suites and
//! synthetic-data tooling.
//!
//! Numerical code is generic over [`Scalar`] (`f64` or `f32`); the aliases
//! below fix the precision.

pub mod checkpoint;
pub mod data;
pub mod doa;
pub mod dsp;
pub mod error;
pub mod events;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ops;
pub mod optim;
pub mod scalar;
pub mod se;
pub mod tensor;

pub use error::{Error, Result};
pub use events::{Event, EventList};
pub use scalar::Scalar;
pub use tensor::{no_grad, Tensor};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type SeldModel64 = model::SeldModel<f64>;
pub type SeldModel32 = model::SeldModel<f32>;
