use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{BackwardOp, Tensor};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub const BCE_CLAMP: f64 = 1e-7;

struct BceOp<S: Scalar> {
    pred: Tensor<S>,
    target: Vec<S>,
}

impl<S: Scalar> BackwardOp<S> for BceOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.pred]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let n = S::of(self.target.len() as f64);
        let lo = S::of(BCE_CLAMP);
        let hi = S::one() - lo;
        let scale = grad[0] / n;
        let p = self.pred.data().clone();
        self.pred.accumulate(|g| {
            for ((a, &p), &t) in g.iter_mut().zip(&p).zip(&self.target) {
                if p > lo && p < hi {
                    *a += scale * ((S::one() - t) / (S::one() - p) - t / p);
                }
            }
        });
    }
}

fn check_same(pred: &Tensor<impl Scalar>, target: &[usize], what: &str) -> Result<()> {
    if pred.shape() != target {
        return Err(Error::Shape(format!(
            "{what}: prediction {:?} vs target {target:?}",
            pred.shape()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over all elements.
pub fn binary_cross_entropy<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> Result<Tensor<S>> {
    check_same(pred, target.shape(), "binary_cross_entropy")?;
    let lo = S::of(BCE_CLAMP);
    let hi = S::one() - lo;
    let t = target.to_vec();
    let total: S = pred
        .data()
        .iter()
        .zip(&t)
        .map(|(&p, &t)| {
            let p = p.max(lo).min(hi);
            -(t * p.ln() + (S::one() - t) * (S::one() - p).ln())
        })
        .sum();
    let n = S::of(t.len().max(1) as f64);
    Ok(Tensor::from_op(
        Vec::new(),
        vec![total / n],
        BceOp {
            pred: pred.clone(),
            target: t,
        },
    ))
}

struct MaskedMseOp<S: Scalar> {
    pred: Tensor<S>,
    target: Vec<S>,
    mask: Vec<S>,
    count: S,
}

impl<S: Scalar> BackwardOp<S> for MaskedMseOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        vec![&self.pred]
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        if self.count == S::zero() {
            return;
        }
        let scale = S::of(2.0) * grad[0] / self.count;
        let p = self.pred.data().clone();
        self.pred.accumulate(|g| {
            for (((a, &p), &t), &m) in g.iter_mut().zip(&p).zip(&self.target).zip(&self.mask) {
                *a += scale * m * (p - t);
            }
        });
    }
}

/// Squared error averaged over positions where `mask` is 1; zero when the mask is empty.
pub fn masked_mse<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>, mask: &Tensor<S>) -> Result<Tensor<S>> {
    check_same(pred, target.shape(), "masked_mse")?;
    check_same(pred, mask.shape(), "masked_mse mask")?;
    let (t, m) = (target.to_vec(), mask.to_vec());
    if m.iter().any(|&v| v != S::zero() && v != S::one()) {
        return Err(Error::Shape("masked_mse mask must be 0/1 valued".into()));
    }
    let count: S = m.iter().copied().sum();
    let loss = if count == S::zero() {
        S::zero()
    } else {
        let sq: S = pred
            .data()
            .iter()
            .zip(&t)
            .zip(&m)
            .map(|((&p, &t), &m)| m * (p - t) * (p - t))
            .sum();
        sq / count
    };
    Ok(Tensor::from_op(
        Vec::new(),
        vec![loss],
        MaskedMseOp {
            pred: pred.clone(),
            target: t,
            mask: m,
            count,
        },
    ))
}
