use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{BackwardOp, Tensor};

struct MaxPoolOp<S: Scalar> {
    input: Tensor<S>,
    argmax: Vec<usize>,
}

impl<S: Scalar> BackwardOp<S> for MaxPoolOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        self.input.accumulate(|g| {
            for (&src, &d) in self.argmax.iter().zip(grad) {
                g[src] += d;
            }
        });
    }
}

/// Non-overlapping max pooling over the last two axes of `[B, C, H, W]`.
///
/// The gradient of each window goes to its first maximum in row-major order.
pub fn max_pool2d<S: Scalar>(input: &Tensor<S>, pool_h: usize, pool_w: usize) -> Result<Tensor<S>> {
    let xs = input.shape();
    if xs.len() != 4 {
        return Err(Error::Shape(format!("max_pool2d input must be [B,C,H,W], got {xs:?}")));
    }
    if pool_h == 0 || pool_w == 0 {
        return Err(Error::Shape("pool sizes must be positive".into()));
    }
    let (h, w) = (xs[2], xs[3]);
    if h % pool_h != 0 {
        return Err(Error::Shape(format!("pool height {pool_h} does not divide {h}")));
    }
    if w % pool_w != 0 {
        return Err(Error::Shape(format!("pool width {pool_w} does not divide {w}")));
    }
    let (oh, ow) = (h / pool_h, w / pool_w);
    let planes = xs[0] * xs[1];
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    {
        let x = input.data();
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * pool_h * w + ox * pool_w;
                    let mut best_val = x[best];
                    for dy in 0..pool_h {
                        let row = base + (oy * pool_h + dy) * w + ox * pool_w;
                        for i in row..row + pool_w {
                            if x[i] > best_val {
                                best_val = x[i];
                                best = i;
                            }
                        }
                    }
                    out.push(best_val);
                    argmax.push(best);
                }
            }
        }
    }
    Ok(Tensor::from_op(
        vec![xs[0], xs[1], oh, ow],
        out,
        MaxPoolOp {
            input: input.clone(),
            argmax,
        },
    ))
}

struct GlobalAvgPoolOp<S: Scalar> {
    input: Tensor<S>,
    plane: usize,
}

impl<S: Scalar> BackwardOp<S> for GlobalAvgPoolOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let inv = S::one() / S::of(self.plane as f64);
        self.input.accumulate(|g| {
            for (chunk, &d) in g.chunks_exact_mut(self.plane).zip(grad) {
                let v = d * inv;
                chunk.iter_mut().for_each(|a| *a += v);
            }
        });
    }
}

/// Mean over the spatial axes of `[B, C, H, W]`, giving `[B, C]`.
pub fn global_avg_pool2d<S: Scalar>(input: &Tensor<S>) -> Result<Tensor<S>> {
    let xs = input.shape();
    if xs.len() != 4 {
        return Err(Error::Shape(format!(
            "global_avg_pool2d input must be [B,C,H,W], got {xs:?}"
        )));
    }
    let plane = xs[2] * xs[3];
    if plane == 0 {
        return Err(Error::Shape("global_avg_pool2d over an empty plane".into()));
    }
    let n = S::of(plane as f64);
    let out = input
        .data()
        .chunks_exact(plane)
        .map(|c| c.iter().copied().sum::<S>() / n)
        .collect();
    Ok(Tensor::from_op(
        vec![xs[0], xs[1]],
        out,
        GlobalAvgPoolOp {
            input: input.clone(),
            plane,
        },
    ))
}
