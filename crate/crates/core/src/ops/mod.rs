//! Differentiable layer primitives.

mod conv;
mod elementwise;
mod linear;
mod loss;
mod norm;
mod pool;
mod recurrent;
mod shape;

pub use conv::{conv2d, Padding};
pub use elementwise::{activation, add, maximum, mean, mul, relu, scale, sigmoid, sub, sum, tanh, Activation};
pub use linear::dense;
pub use loss::{binary_cross_entropy, masked_mse, BCE_CLAMP};
pub use norm::{batch_norm2d, BatchNormParams, Mode, RunningStats};
pub use pool::{global_avg_pool2d, max_pool2d};
pub use recurrent::{gru, GruParams};
pub use shape::{concat_last, dropout, permute, reshape};
