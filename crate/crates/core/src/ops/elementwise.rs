use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{numel, BackwardOp, Tensor};

/// Visits every output position of a broadcast together with the matching
/// offsets into both operands.
fn for_each_pair(shape: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let nd = shape.len();
    if nd == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = shape[nd - 1];
    let (ia, ib) = (sa[nd - 1], sb[nd - 1]);
    let outer = numel(&shape[..nd - 1]);
    let mut idx = vec![0usize; nd - 1];
    let (mut oa, mut ob) = (0usize, 0usize);
    for o in 0..outer {
        let base = o * inner;
        for k in 0..inner {
            f(base + k, oa + k * ia, ob + k * ib);
        }
        for d in (0..nd - 1).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < shape[d] {
                break;
            }
            oa -= sa[d] * shape[d];
            ob -= sb[d] * shape[d];
            idx[d] = 0;
        }
    }
}

fn contiguous_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = acc;
        acc *= shape[d];
    }
    strides
}

#[derive(Clone)]
struct Broadcast {
    shape: Vec<usize>,
    sa: Vec<usize>,
    sb: Vec<usize>,
}

impl Broadcast {
    fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!("rank mismatch: {a:?} vs {b:?}")));
        }
        let ca = contiguous_strides(a);
        let cb = contiguous_strides(b);
        let mut shape = Vec::with_capacity(a.len());
        let mut sa = Vec::with_capacity(a.len());
        let mut sb = Vec::with_capacity(a.len());
        for d in 0..a.len() {
            let (x, y) = (a[d], b[d]);
            let n = if x == y || y == 1 {
                x
            } else if x == 1 {
                y
            } else {
                return Err(Error::dim(format!("axis {d}"), x, y));
            };
            shape.push(n);
            sa.push(if x == 1 && n != 1 { 0 } else { ca[d] });
            sb.push(if y == 1 && n != 1 { 0 } else { cb[d] });
        }
        Ok(Self { shape, sa, sb })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Max,
}

struct BinaryOp<S: Scalar> {
    a: Tensor<S>,
    b: Tensor<S>,
    kind: BinaryKind,
    bc: Broadcast,
}

impl<S: Scalar> BackwardOp<S> for BinaryOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.a, &self.b]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let Broadcast { shape, sa, sb } = &self.bc;
        let a_data = self.a.data();
        let b_data = self.b.data();
        let mut ga = vec![S::zero(); self.a.numel()];
        let mut gb = vec![S::zero(); self.b.numel()];
        for_each_pair(shape, sa, sb, |o, ia, ib| {
            let g = grad[o];
            match self.kind {
                BinaryKind::Add => {
                    ga[ia] += g;
                    gb[ib] += g;
                }
                BinaryKind::Sub => {
                    ga[ia] += g;
                    gb[ib] -= g;
                }
                BinaryKind::Mul => {
                    ga[ia] += g * b_data[ib];
                    gb[ib] += g * a_data[ia];
                }
                BinaryKind::Max => {
                    if a_data[ia] >= b_data[ib] {
                        ga[ia] += g;
                    } else {
                        gb[ib] += g;
                    }
                }
            }
        });
        drop(a_data);
        drop(b_data);
        self.a.accumulate_slice(&ga);
        self.b.accumulate_slice(&gb);
    }
}

fn binary<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, kind: BinaryKind) -> Result<Tensor<S>> {
    let bc = Broadcast::new(a.shape(), b.shape())?;
    let mut out = vec![S::zero(); numel(&bc.shape)];
    {
        let (ad, bd) = (a.data(), b.data());
        for_each_pair(&bc.shape, &bc.sa, &bc.sb, |o, ia, ib| {
            let (x, y) = (ad[ia], bd[ib]);
            out[o] = match kind {
                BinaryKind::Add => x + y,
                BinaryKind::Sub => x - y,
                BinaryKind::Mul => x * y,
                BinaryKind::Max => {
                    if x >= y {
                        x
                    } else {
                        y
                    }
                }
            };
        });
    }
    let shape = bc.shape.clone();
    Ok(Tensor::from_op(
        shape,
        out,
        BinaryOp {
            a: a.clone(),
            b: b.clone(),
            kind,
            bc,
        },
    ))
}

/// Elementwise sum with size-1 broadcasting on equal-rank shapes.
pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    binary(a, b, BinaryKind::Add)
}

pub fn sub<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    binary(a, b, BinaryKind::Sub)
}

/// Elementwise product with size-1 broadcasting on equal-rank shapes.
pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    binary(a, b, BinaryKind::Mul)
}

/// Elementwise maximum; ties send the gradient to `a`.
pub fn maximum<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    binary(a, b, BinaryKind::Max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

struct ActivationOp<S: Scalar> {
    input: Tensor<S>,
    kind: Activation,
}

impl<S: Scalar> BackwardOp<S> for ActivationOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, out: &[S], grad: &[S]) {
        let one = S::one();
        self.input.accumulate(|g| match self.kind {
            Activation::Relu => {
                for ((a, &y), &d) in g.iter_mut().zip(out).zip(grad) {
                    if y > S::zero() {
                        *a += d;
                    }
                }
            }
            Activation::Sigmoid => {
                for ((a, &y), &d) in g.iter_mut().zip(out).zip(grad) {
                    *a += d * y * (one - y);
                }
            }
            Activation::Tanh => {
                for ((a, &y), &d) in g.iter_mut().zip(out).zip(grad) {
                    *a += d * (one - y * y);
                }
            }
        });
    }
}

pub(crate) fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    let one = S::one();
    if x >= S::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

pub fn activation<S: Scalar>(x: &Tensor<S>, kind: Activation) -> Tensor<S> {
    let out: Vec<S> = {
        let d = x.data();
        match kind {
            Activation::Relu => d.iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect(),
            Activation::Sigmoid => d.iter().map(|&v| sigmoid_scalar(v)).collect(),
            Activation::Tanh => d.iter().map(|&v| v.tanh()).collect(),
        }
    };
    Tensor::from_op(x.shape().to_vec(), out, ActivationOp { input: x.clone(), kind })
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    activation(x, Activation::Relu)
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    activation(x, Activation::Sigmoid)
}

pub fn tanh<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    activation(x, Activation::Tanh)
}

struct ScaleOp<S: Scalar> {
    input: Tensor<S>,
    factor: S,
}

impl<S: Scalar> BackwardOp<S> for ScaleOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        self.input.accumulate(|g| {
            for (a, &d) in g.iter_mut().zip(grad) {
                *a += d * self.factor;
            }
        });
    }
}

/// Multiplies every element by a constant.
pub fn scale<S: Scalar>(x: &Tensor<S>, factor: S) -> Tensor<S> {
    let out = x.data().iter().map(|&v| v * factor).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        ScaleOp {
            input: x.clone(),
            factor,
        },
    )
}

struct SumOp<S: Scalar> {
    input: Tensor<S>,
    factor: S,
}

impl<S: Scalar> BackwardOp<S> for SumOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.input]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let d = grad[0] * self.factor;
        self.input.accumulate(|g| g.iter_mut().for_each(|a| *a += d));
    }
}

/// Sum of all elements as a scalar tensor.
pub fn sum<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let total = x.data().iter().copied().sum();
    Tensor::from_op(
        Vec::new(),
        vec![total],
        SumOp {
            input: x.clone(),
            factor: S::one(),
        },
    )
}

pub fn mean<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let n = S::of(x.numel().max(1) as f64);
    let total: S = x.data().iter().copied().sum();
    Tensor::from_op(
        Vec::new(),
        vec![total / n],
        SumOp {
            input: x.clone(),
            factor: S::one() / n,
        },
    )
}
