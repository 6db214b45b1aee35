use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{BackwardOp, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Exponential moving averages of per-channel batch statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

impl<S: Scalar> RunningStats<S> {
    /// Zero mean, unit variance.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![S::zero(); channels],
            var: vec![S::one(); channels],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BatchNormParams<S> {
    /// Weight of the previous running value in each update.
    pub momentum: S,
    pub eps: S,
}

impl<S: Scalar> Default for BatchNormParams<S> {
    fn default() -> Self {
        Self {
            momentum: S::of(0.99),
            eps: S::of(1e-3),
        }
    }
}

struct BatchNormOp<S: Scalar> {
    input: Tensor<S>,
    gamma: Tensor<S>,
    beta: Tensor<S>,
    xhat: Vec<S>,
    inv_std: Vec<S>,
    dims: (usize, usize, usize),
    train: bool,
}

impl<S: Scalar> BackwardOp<S> for BatchNormOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input, &self.gamma, &self.beta]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let (b, c, plane) = self.dims;
        let n = S::of((b * plane) as f64);
        let gamma = self.gamma.data().clone();
        let mut dgamma = vec![S::zero(); c];
        let mut dbeta = vec![S::zero(); c];
        for bi in 0..b {
            for ch in 0..c {
                let off = (bi * c + ch) * plane;
                let span = off..off + plane;
                for (&g, &xh) in grad[span.clone()].iter().zip(&self.xhat[span]) {
                    dbeta[ch] += g;
                    dgamma[ch] += g * xh;
                }
            }
        }
        if self.input.requires_grad() {
            let mut dx = vec![S::zero(); grad.len()];
            for ch in 0..c {
                let k = gamma[ch] * self.inv_std[ch];
                if self.train {
                    // dx = γ/σ · (dy − mean(dy) − x̂ · mean(dy·x̂))
                    let mean_dy = dbeta[ch] / n;
                    let mean_dyx = dgamma[ch] / n;
                    for bi in 0..b {
                        let off = (bi * c + ch) * plane;
                        for i in off..off + plane {
                            dx[i] = k * (grad[i] - mean_dy - self.xhat[i] * mean_dyx);
                        }
                    }
                } else {
                    for bi in 0..b {
                        let off = (bi * c + ch) * plane;
                        for i in off..off + plane {
                            dx[i] = k * grad[i];
                        }
                    }
                }
            }
            self.input.accumulate_slice(&dx);
        }
        self.gamma.accumulate_slice(&dgamma);
        self.beta.accumulate_slice(&dbeta);
    }
}

/// Per-channel batch normalization of `[B, C, H, W]`.
///
/// Train mode normalizes with biased batch statistics and folds them into
/// `stats` (initialized to identity on first use). Eval mode requires
/// `stats` to be present.
pub fn batch_norm2d<S: Scalar>(
    input: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    stats: &RefCell<Option<RunningStats<S>>>,
    mode: Mode,
    params: BatchNormParams<S>,
) -> Result<Tensor<S>> {
    let xs = input.shape();
    if xs.len() != 4 {
        return Err(Error::Shape(format!(
            "batch_norm2d input must be [B,C,H,W], got {xs:?}"
        )));
    }
    let (b, c, plane) = (xs[0], xs[1], xs[2] * xs[3]);
    if gamma.shape() != [c] {
        return Err(Error::dim("gamma", c, gamma.numel()));
    }
    if beta.shape() != [c] {
        return Err(Error::dim("beta", c, beta.numel()));
    }
    let count = b * plane;
    if mode == Mode::Train && count < 2 {
        return Err(Error::Shape(format!(
            "batch_norm2d in train mode needs at least 2 values per channel, got {count}"
        )));
    }

    let x = input.data();
    let (mean, var) = match mode {
        Mode::Train => {
            let n = S::of(count as f64);
            let mut mean = vec![S::zero(); c];
            let mut var = vec![S::zero(); c];
            for ch in 0..c {
                let mut acc = S::zero();
                for bi in 0..b {
                    let off = (bi * c + ch) * plane;
                    acc += x[off..off + plane].iter().copied().sum::<S>();
                }
                let mu = acc / n;
                let mut sq = S::zero();
                for bi in 0..b {
                    let off = (bi * c + ch) * plane;
                    for &v in &x[off..off + plane] {
                        sq += (v - mu) * (v - mu);
                    }
                }
                mean[ch] = mu;
                var[ch] = sq / n;
            }
            let mut slot = stats.borrow_mut();
            let rs = slot.get_or_insert_with(|| RunningStats::identity(c));
            let m = params.momentum;
            for ch in 0..c {
                rs.mean[ch] = m * rs.mean[ch] + (S::one() - m) * mean[ch];
                rs.var[ch] = m * rs.var[ch] + (S::one() - m) * var[ch];
            }
            (mean, var)
        }
        Mode::Eval => {
            let slot = stats.borrow();
            let rs = slot.as_ref().ok_or(Error::UninitializedStats)?;
            if rs.mean.len() != c {
                return Err(Error::dim("running stats", c, rs.mean.len()));
            }
            (rs.mean.clone(), rs.var.clone())
        }
    };

    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + params.eps).sqrt()).collect();
    let (g, bt) = (gamma.data(), beta.data());
    let mut xhat = vec![S::zero(); x.len()];
    let mut out = vec![S::zero(); x.len()];
    for bi in 0..b {
        for ch in 0..c {
            let off = (bi * c + ch) * plane;
            for i in off..off + plane {
                let h = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                out[i] = g[ch] * h + bt[ch];
            }
        }
    }
    drop((g, bt, x));
    Ok(Tensor::from_op(
        xs.to_vec(),
        out,
        BatchNormOp {
            input: input.clone(),
            gamma: gamma.clone(),
            beta: beta.clone(),
            xhat,
            inv_std,
            dims: (b, c, plane),
            train: mode == Mode::Train,
        },
    ))
}
