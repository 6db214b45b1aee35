//! Adam with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::nn::Parameter;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: one first/second moment buffer per parameter, in the
/// order the parameters are passed to [`Adam::step`].
#[derive(Clone, Debug)]
pub struct Adam<S: Scalar> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<S>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<S>] {
        &self.v
    }

    pub fn step(&mut self, params: &[&Parameter<S>]) -> Result<()> {
        let missing: Vec<&str> = params
            .iter()
            .filter(|p| p.tensor().grad().is_none())
            .map(|p| p.name())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingGradient(missing.join(", ")));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![S::zero(); p.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params).any(|(m, p)| m.len() != p.numel()) {
            return Err(Error::Config("parameter list changed between Adam steps".into()));
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2) = (S::of(c.beta1), S::of(c.beta2));
        let one = S::one();
        let lr = S::of(c.learning_rate);
        let eps = S::of(c.epsilon);
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        for (i, p) in params.iter().enumerate() {
            let grad = p.tensor().grad().expect("checked above");
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut data = p.tensor().data_mut();
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Clears the gradient of every parameter.
pub fn zero_grad<S: Scalar>(params: &[&Parameter<S>]) {
    for p in params {
        p.tensor().zero_grad();
    }
}
