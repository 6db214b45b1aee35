//! Joint detection and localization scores.
//!
//! Two suites are provided. The location-aware suite (`er20`, `f20`,
//! `le_cd`, `lr_cd`) scores each (one-second segment, class) unit once:
//! when both sides are active, their same-frame DOAs are matched and the
//! mean matched distance decides between a true positive (within the
//! threshold) and a false positive plus a false negative. The legacy suite
//! (`er`, `f`, `le`, `lr`) scores class activity per segment and localizes
//! class-agnostically per frame.

mod assignment;
mod report;
mod scores;

pub use assignment::hungarian;
pub use report::{ClassCounts, MetricReport, SegmentCounts, TableRow};
pub use scores::{evaluate, metrics_2019, metrics_2020, Scores2019, Scores2020};

use crate::doa::{dot, norm, Vec3};
use crate::error::{Error, Result};
use crate::events::EventList;

/// Label frames per scoring segment (1 s at 10 Hz).
pub const SEGMENT_FRAMES: usize = 10;
/// Location gate for a true positive, inclusive.
pub const DOA_THRESHOLD_DEG: f64 = 20.0;
/// Localization error reported when nothing could be matched.
pub const LE_SENTINEL_DEG: f64 = 180.0;

/// Angle between two directions in degrees.
pub fn angular_distance(u: Vec3, v: Vec3) -> Result<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Config("angular distance of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoaMatching {
    /// `(ref index, pred index, distance in degrees)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

impl DoaMatching {
    pub fn total(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Pairing of references and predictions with minimum total angular distance.
pub fn match_doas(refs: &[Vec3], preds: &[Vec3]) -> Result<DoaMatching> {
    let cost = refs
        .iter()
        .map(|&r| {
            preds
                .iter()
                .map(|&p| angular_distance(r, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let assignment = hungarian(&cost);
    let mut pairs = Vec::new();
    let mut used = vec![false; preds.len()];
    let mut unmatched_refs = Vec::new();
    for (r, a) in assignment.into_iter().enumerate() {
        match a {
            Some(p) => {
                used[p] = true;
                pairs.push((r, p, cost[r][p]));
            }
            None => unmatched_refs.push(r),
        }
    }
    let unmatched_preds = (0..preds.len()).filter(|&p| !used[p]).collect();
    Ok(DoaMatching {
        pairs,
        unmatched_refs,
        unmatched_preds,
    })
}

/// Per label frame, the active `(class, direction)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameEvents {
    frames: Vec<Vec<(usize, Vec3)>>,
}

impl FrameEvents {
    pub fn new(n_frames: usize) -> Self {
        Self {
            frames: vec![Vec::new(); n_frames],
        }
    }

    /// Events past `n_frames` are rejected rather than dropped.
    pub fn from_events(list: &EventList, n_frames: usize) -> Result<Self> {
        let mut fe = Self::new(n_frames);
        for e in list.iter() {
            fe.push(e.frame, e.class, e.direction())?;
        }
        Ok(fe)
    }

    pub fn push(&mut self, frame: usize, class: usize, direction: Vec3) -> Result<()> {
        let n = self.frames.len();
        let slot = self
            .frames
            .get_mut(frame)
            .ok_or_else(|| Error::Shape(format!("event at frame {frame} outside {n} frames")))?;
        slot.push((class, direction));
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, i: usize) -> &[(usize, Vec3)] {
        &self.frames[i]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[(usize, Vec3)]> {
        self.frames.iter().map(Vec::as_slice)
    }

    /// Applies `f` to every direction.
    pub fn map_directions(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|fr| fr.iter().map(|&(c, v)| (c, f(v))).collect())
                .collect(),
        }
    }

    pub(crate) fn directions_of(&self, frame: usize, class: usize) -> Vec<Vec3> {
        self.frames[frame]
            .iter()
            .filter(|e| e.0 == class)
            .map(|e| e.1)
            .collect()
    }
}
