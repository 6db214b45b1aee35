use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{numel, BackwardOp, Tensor};

struct ReshapeOp<S: Scalar> {
    input: Tensor<S>,
}

impl<S: Scalar> BackwardOp<S> for ReshapeOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        self.input.accumulate_slice(grad);
    }
}

pub fn reshape<S: Scalar>(input: &Tensor<S>, shape: &[usize]) -> Result<Tensor<S>> {
    if numel(shape) != input.numel() {
        return Err(Error::Shape(format!(
            "cannot reshape {:?} into {shape:?}",
            input.shape()
        )));
    }
    Ok(Tensor::from_op(
        shape.to_vec(),
        input.to_vec(),
        ReshapeOp { input: input.clone() },
    ))
}

/// Maps each output linear index to its source index in the input.
fn permutation_index(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let nd = shape.len();
    let mut in_strides = vec![1usize; nd];
    for d in (0..nd.saturating_sub(1)).rev() {
        in_strides[d] = in_strides[d + 1] * shape[d + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let total = numel(shape);
    let mut index = Vec::with_capacity(total);
    let mut counter = vec![0usize; nd];
    let mut off = 0usize;
    for _ in 0..total {
        index.push(off);
        for d in (0..nd).rev() {
            counter[d] += 1;
            off += src_strides[d];
            if counter[d] < out_shape[d] {
                break;
            }
            off -= src_strides[d] * out_shape[d];
            counter[d] = 0;
        }
    }
    index
}

struct PermuteOp<S: Scalar> {
    input: Tensor<S>,
    index: Vec<usize>,
}

impl<S: Scalar> BackwardOp<S> for PermuteOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        self.input.accumulate(|g| {
            for (&src, &d) in self.index.iter().zip(grad) {
                g[src] += d;
            }
        });
    }
}

/// Reorders axes: output axis `i` is input axis `perm[i]`.
pub fn permute<S: Scalar>(input: &Tensor<S>, perm: &[usize]) -> Result<Tensor<S>> {
    let shape = input.shape();
    let mut seen = vec![false; shape.len()];
    if perm.len() != shape.len()
        || perm
            .iter()
            .any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::Shape(format!(
            "{perm:?} is not a permutation of {} axes",
            shape.len()
        )));
    }
    let index = permutation_index(shape, perm);
    let out: Vec<S> = {
        let x = input.data();
        index.iter().map(|&i| x[i]).collect()
    };
    Ok(Tensor::from_op(
        perm.iter().map(|&p| shape[p]).collect(),
        out,
        PermuteOp {
            input: input.clone(),
            index,
        },
    ))
}

struct DropoutOp<S: Scalar> {
    input: Tensor<S>,
    mask: Vec<S>,
}

impl<S: Scalar> BackwardOp<S> for DropoutOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        self.input.accumulate(|g| {
            for ((a, &m), &d) in g.iter_mut().zip(&self.mask).zip(grad) {
                *a += m * d;
            }
        });
    }
}

/// Inverted dropout: zeroes each element with probability `rate` and
/// rescales survivors by `1 / (1 - rate)`.
pub fn dropout<S: Scalar, R: Rng + ?Sized>(input: &Tensor<S>, rate: f64, rng: &mut R) -> Result<Tensor<S>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(input.clone());
    }
    let keep = S::of(1.0 / (1.0 - rate));
    let mask: Vec<S> = (0..input.numel())
        .map(|_| if rng.gen::<f64>() < rate { S::zero() } else { keep })
        .collect();
    let out = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
    Ok(Tensor::from_op(
        input.shape().to_vec(),
        out,
        DropoutOp {
            input: input.clone(),
            mask,
        },
    ))
}

struct ConcatOp<S: Scalar> {
    a: Tensor<S>,
    b: Tensor<S>,
    wa: usize,
    wb: usize,
}

impl<S: Scalar> BackwardOp<S> for ConcatOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let w = self.wa + self.wb;
        self.a.accumulate(|g| {
            for (dst, row) in g.chunks_exact_mut(self.wa).zip(grad.chunks_exact(w)) {
                for (d, &v) in dst.iter_mut().zip(&row[..self.wa]) {
                    *d += v;
                }
            }
        });
        self.b.accumulate(|g| {
            for (dst, row) in g.chunks_exact_mut(self.wb).zip(grad.chunks_exact(w)) {
                for (d, &v) in dst.iter_mut().zip(&row[self.wa..]) {
                    *d += v;
                }
            }
        });
    }
}

/// Concatenates along the last axis; leading axes must agree.
pub fn concat_last<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.is_empty() || sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
        return Err(Error::Shape(format!("cannot concatenate {sa:?} and {sb:?}")));
    }
    let (wa, wb) = (sa[sa.len() - 1], sb[sb.len() - 1]);
    let mut out = Vec::with_capacity(a.numel() + b.numel());
    {
        let (da, db) = (a.data(), b.data());
        let rows = da.len().checked_div(wa).unwrap_or_else(|| db.len() / wb.max(1));
        for r in 0..rows {
            out.extend_from_slice(&da[r * wa..(r + 1) * wa]);
            out.extend_from_slice(&db[r * wb..(r + 1) * wb]);
        }
    }
    let mut shape = sa.to_vec();
    *shape.last_mut().unwrap() = wa + wb;
    Ok(Tensor::from_op(
        shape,
        out,
        ConcatOp {
            a: a.clone(),
            b: b.clone(),
            wa,
            wb,
        },
    ))
}
