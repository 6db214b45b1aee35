use crate::error::{Error, Result};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{BackwardOp, Tensor};

struct DenseOp<S: Scalar> {
    input: Tensor<S>,
    weight: Tensor<S>,
    bias: Option<Tensor<S>>,
    rows: usize,
    d_in: usize,
    d_out: usize,
}

impl<S: Scalar> BackwardOp<S> for DenseOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        let mut v = vec![&self.input, &self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let (m, di, dout) = (self.rows, self.d_in, self.d_out);
        let gmat = MatRef::new(grad, m, dout);
        if self.input.requires_grad() {
            let mut dx = vec![S::zero(); m * di];
            {
                let w = self.weight.data();
                gemm(S::one(), gmat, MatRef::new(&w, di, dout).t(), S::zero(), &mut dx);
            }
            self.input.accumulate_slice(&dx);
        }
        if self.weight.requires_grad() {
            let x = self.input.data();
            let xmat = MatRef::new(&x, m, di);
            self.weight
                .accumulate(|gw| gemm(S::one(), xmat.t(), gmat, S::one(), gw));
        }
        if let Some(b) = &self.bias {
            b.accumulate(|gb| {
                for row in grad.chunks_exact(dout) {
                    for (a, &d) in gb.iter_mut().zip(row) {
                        *a += d;
                    }
                }
            });
        }
    }
}

/// Affine map over the last axis: `[..., D_in] x [D_in, D_out] + [D_out]`.
pub fn dense<S: Scalar>(input: &Tensor<S>, weight: &Tensor<S>, bias: Option<&Tensor<S>>) -> Result<Tensor<S>> {
    let xs = input.shape();
    let ws = weight.shape();
    if xs.is_empty() {
        return Err(Error::Shape("dense input must have at least one axis".into()));
    }
    if ws.len() != 2 {
        return Err(Error::Shape(format!("dense weight must be [D_in, D_out], got {ws:?}")));
    }
    let d_in = *xs.last().unwrap();
    if ws[0] != d_in {
        return Err(Error::dim("dense input features", ws[0], d_in));
    }
    let d_out = ws[1];
    if let Some(b) = bias {
        if b.shape() != [d_out] {
            return Err(Error::dim("dense bias", d_out, b.numel()));
        }
    }
    let rows = input.numel() / d_in.max(1);
    let mut out = vec![S::zero(); rows * d_out];
    if let Some(b) = bias {
        let bd = b.data();
        for row in out.chunks_exact_mut(d_out) {
            row.copy_from_slice(&bd);
        }
    }
    {
        let x = input.data();
        let w = weight.data();
        gemm(
            S::one(),
            MatRef::new(&x, rows, d_in),
            MatRef::new(&w, d_in, d_out),
            S::one(),
            &mut out,
        );
    }
    let mut shape = xs.to_vec();
    *shape.last_mut().unwrap() = d_out;
    Ok(Tensor::from_op(
        shape,
        out,
        DenseOp {
            input: input.clone(),
            weight: weight.clone(),
            bias: bias.cloned(),
            rows,
            d_in,
            d_out,
        },
    ))
}
