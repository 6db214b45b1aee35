//! Central finite-difference gradient checking for `f64` graphs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ops;
use crate::tensor::{no_grad, Tensor};

/// Which coordinates of each input are perturbed.
#[derive(Clone, Copy, Debug)]
pub enum Coords {
    All,
    /// Up to `n` distinct coordinates per input, drawn with `seed`.
    Sample {
        n: usize,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub step: f64,
    /// Lower bound on the relative-error denominator, as a fraction of
    /// `max(1, |loss|)`; round-off in the differences scales with the loss.
    pub floor: f64,
    pub coords: Coords,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-5,
            coords: Coords::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradMismatch {
    pub input: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub worst: Option<GradMismatch>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.rel_error)
    }
}

impl GradCheck {
    pub fn sampled(n: usize, seed: u64) -> Self {
        Self {
            coords: Coords::Sample { n, seed },
            ..Self::default()
        }
    }

    /// Compares the gradients of the scalar `loss()` with respect to each
    /// named input against central differences.
    ///
    /// `loss` must rebuild its graph from the given leaf tensors on every
    /// call; inputs are perturbed in place and restored afterwards.
    pub fn run<F>(&self, inputs: &[(&str, &Tensor<f64>)], loss: F) -> Result<GradReport>
    where
        F: Fn() -> Result<Tensor<f64>>,
    {
        for (_, t) in inputs {
            t.zero_grad();
        }
        let l = loss()?;
        l.backward()?;
        let floor = self.floor * l.item().abs().max(1.0);
        let mut report = GradReport::default();
        for (k, (name, t)) in inputs.iter().enumerate() {
            let analytic = t.grad().unwrap_or_else(|| vec![0.0; t.numel()]);
            let idx: Vec<usize> = match self.coords {
                Coords::All => (0..t.numel()).collect(),
                Coords::Sample { n, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    sample(&mut rng, t.numel(), n.min(t.numel())).into_vec()
                }
            };
            for i in idx {
                let numeric = self.central_difference(t, i, &loss)?;
                let a = analytic[i];
                let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                let rel_error = if rel_error.is_nan() { f64::INFINITY } else { rel_error };
                report.checked += 1;
                if report.worst.as_ref().is_none_or(|w| rel_error > w.rel_error) {
                    report.worst = Some(GradMismatch {
                        input: name.to_string(),
                        index: i,
                        analytic: a,
                        numeric,
                        rel_error,
                    });
                }
            }
        }
        Ok(report)
    }

    fn central_difference<F>(&self, t: &Tensor<f64>, i: usize, loss: &F) -> Result<f64>
    where
        F: Fn() -> Result<Tensor<f64>>,
    {
        let orig = t.data()[i];
        let eval = |v: f64| -> Result<f64> {
            t.data_mut()[i] = v;
            no_grad(|| loss().map(|l| l.item()))
        };
        let plus = eval(orig + self.step);
        let minus = eval(orig - self.step);
        t.data_mut()[i] = orig;
        Ok((plus? - minus?) / (2.0 * self.step))
    }
}

/// `sum(x * w)` for a fixed pseudo-random `w` in [-1, 1]; turns any
/// output into a scalar whose gradient exercises every element.
pub fn random_projection(x: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7072_6f6a);
    let w: Vec<f64> = (0..x.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = Tensor::from_vec(x.shape(), w)?;
    Ok(ops::sum(&ops::mul(x, &w)?))
}

/// A leaf tensor with values uniform in [-1, 1].
pub fn uniform_variable(shape: &[usize], rng: &mut impl Rng) -> Result<Tensor<f64>> {
    let n = shape.iter().product();
    Tensor::variable(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}
