use rand::Rng;

use crate::scalar::Scalar;

/// Parameter initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform {
        fan_in: usize,
        fan_out: usize,
    },
    Constant(f64),
}

impl Init {
    pub fn sample<S: Scalar, R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Vec<S> {
        match self {
            Init::GlorotUniform { fan_in, fan_out } => glorot_uniform(n, fan_in, fan_out, rng),
            Init::Constant(c) => vec![S::of(c); n],
        }
    }
}

pub fn glorot_uniform<S: Scalar, R: Rng + ?Sized>(n: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<S> {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    (0..n).map(|_| S::of(rng.gen_range(-limit..=limit))).collect()
}
