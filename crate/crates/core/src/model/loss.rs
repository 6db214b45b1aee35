use super::network::ModelOutput;
use crate::data::{EventLabelGrid, Segment};
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stacked label tensors for a batch.
#[derive(Clone, Debug)]
pub struct LabelBatch<S: Scalar> {
    /// `[B, L, K]`.
    pub activity: Tensor<S>,
    /// `[B, L, 3K]`.
    pub doa: Tensor<S>,
    /// `[B, L, 3K]`, activity repeated per axis.
    pub mask: Tensor<S>,
}

impl<S: Scalar> LabelBatch<S> {
    pub fn from_grids(grids: &[&EventLabelGrid]) -> Result<Self> {
        let first = grids.first().ok_or_else(|| Error::Shape("empty label batch".into()))?;
        let (l, k) = (first.frames, first.n_classes);
        if let Some(g) = grids.iter().find(|g| (g.frames, g.n_classes) != (l, k)) {
            return Err(Error::dim("label frames", l, g.frames));
        }
        let b = grids.len();
        let cat = |f: &dyn Fn(&EventLabelGrid) -> Vec<f64>| -> Vec<f64> { grids.iter().flat_map(|g| f(g)).collect() };
        Ok(Self {
            activity: Tensor::from_f64(&[b, l, k], &cat(&|g| g.activity.clone()))?,
            doa: Tensor::from_f64(&[b, l, 3 * k], &cat(&|g| g.doa.clone()))?,
            mask: Tensor::from_f64(&[b, l, 3 * k], &cat(&|g| g.doa_mask()))?,
        })
    }

    pub fn from_segments(segments: &[&Segment]) -> Result<Self> {
        let grids = segments
            .iter()
            .map(|s| {
                s.labels
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("segment of `{}` has no labels", s.source())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_grids(&grids)
    }
}

/// Stacks segment features into `[B, C, T, F]`.
pub fn batch_input<S: Scalar>(segments: &[&Segment]) -> Result<Tensor<S>> {
    let first = segments.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    let [c, t, f] = first.features.shape();
    let mut data = Vec::with_capacity(segments.len() * c * t * f);
    for s in segments {
        if s.features.shape() != [c, t, f] {
            return Err(Error::Shape(format!(
                "mixed feature shapes in batch: {:?}",
                s.features.shape()
            )));
        }
        data.extend(s.features.data.iter().map(|&v| S::of(v)));
    }
    Tensor::from_vec(&[segments.len(), c, t, f], data)
}

#[derive(Clone, Debug)]
pub struct SeldLoss<S: Scalar> {
    pub total: Tensor<S>,
    pub sed: Tensor<S>,
    pub doa: Tensor<S>,
}

/// `w_sed * BCE(sed, activity) + w_doa * maskedMSE(doa, targets)`.
pub fn seld_loss<S: Scalar>(
    out: &ModelOutput<S>,
    labels: &LabelBatch<S>,
    w_sed: f64,
    w_doa: f64,
) -> Result<SeldLoss<S>> {
    if out.sed.shape() != labels.activity.shape() {
        return Err(Error::Shape(format!(
            "sed output {:?} vs labels {:?}",
            out.sed.shape(),
            labels.activity.shape()
        )));
    }
    let sed = ops::binary_cross_entropy(&out.sed, &labels.activity)?;
    let doa = ops::masked_mse(&out.doa, &labels.doa, &labels.mask)?;
    let total = ops::add(&ops::scale(&sed, S::of(w_sed)), &ops::scale(&doa, S::of(w_doa)))?;
    Ok(SeldLoss { total, sed, doa })
}
