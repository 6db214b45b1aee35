use super::report::{ClassCounts, MetricReport, SegmentCounts};
use super::{match_doas, FrameEvents, DOA_THRESHOLD_DEG, LE_SENTINEL_DEG, SEGMENT_FRAMES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Scores2020 {
    pub er20: f64,
    pub f20: f64,
    pub le_cd: f64,
    pub lr_cd: f64,
    pub classes: Vec<ClassCounts>,
    pub segments: Vec<SegmentCounts>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scores2019 {
    pub er: f64,
    pub f: f64,
    pub le: f64,
    pub lr: f64,
    pub classes: Vec<ClassCounts>,
    pub segments: Vec<SegmentCounts>,
}

fn check_frames(reference: &FrameEvents, prediction: &FrameEvents) -> Result<()> {
    if reference.n_frames() != prediction.n_frames() {
        return Err(Error::dim("frames", reference.n_frames(), prediction.n_frames()));
    }
    Ok(())
}

fn check_classes(fe: &FrameEvents, n_classes: usize) -> Result<()> {
    match fe.frames().flatten().find(|e| e.0 >= n_classes) {
        Some(e) => Err(Error::Config(format!("class id {} out of range 0..{n_classes}", e.0))),
        None => Ok(()),
    }
}

fn segment_ranges(n_frames: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n_frames.div_ceil(SEGMENT_FRAMES)).map(move |s| s * SEGMENT_FRAMES..((s + 1) * SEGMENT_FRAMES).min(n_frames))
}

pub(crate) fn within_gate(distance_deg: f64) -> bool {
    distance_deg <= DOA_THRESHOLD_DEG
}

fn f_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

fn error_rate(segments: &[SegmentCounts]) -> f64 {
    let errors: usize = segments.iter().map(|s| s.s + s.d + s.i).sum();
    let n: usize = segments.iter().map(|s| s.n).sum();
    errors as f64 / n.max(1) as f64
}

fn mean_or_sentinel(sum: f64, count: usize, anything: bool) -> f64 {
    if count > 0 {
        sum / count as f64
    } else if anything {
        LE_SENTINEL_DEG
    } else {
        0.0
    }
}

/// Location-aware detection and class-dependent localization.
pub fn metrics_2020(reference: &FrameEvents, prediction: &FrameEvents, n_classes: usize) -> Result<Scores2020> {
    check_frames(reference, prediction)?;
    check_classes(reference, n_classes)?;
    check_classes(prediction, n_classes)?;
    let mut classes = vec![ClassCounts::default(); n_classes];
    let mut segments = Vec::new();
    let (mut le_sum, mut matched, mut ref_units) = (0.0, 0usize, 0usize);
    let mut anything = false;
    for range in segment_ranges(reference.n_frames()) {
        let mut seg = SegmentCounts::default();
        for (class, counts) in classes.iter_mut().enumerate() {
            let mut distances = Vec::new();
            let (mut ref_active, mut pred_active) = (false, false);
            for t in range.clone() {
                let r = reference.directions_of(t, class);
                let p = prediction.directions_of(t, class);
                ref_active |= !r.is_empty();
                pred_active |= !p.is_empty();
                if !r.is_empty() && !p.is_empty() {
                    distances.extend(match_doas(&r, &p)?.pairs.iter().map(|m| m.2));
                }
            }
            anything |= ref_active || pred_active;
            if ref_active {
                ref_units += 1;
                seg.n += 1;
            }
            match (ref_active, pred_active) {
                (true, true) if !distances.is_empty() => {
                    let d = distances.iter().sum::<f64>() / distances.len() as f64;
                    le_sum += d;
                    matched += 1;
                    if within_gate(d) {
                        counts.tp += 1;
                    } else {
                        counts.fp += 1;
                        counts.fn_ += 1;
                        seg.fp += 1;
                        seg.fn_ += 1;
                    }
                }
                (true, true) => {
                    counts.fp += 1;
                    counts.fn_ += 1;
                    seg.fp += 1;
                    seg.fn_ += 1;
                }
                (true, false) => {
                    counts.fn_ += 1;
                    seg.fn_ += 1;
                }
                (false, true) => {
                    counts.fp += 1;
                    seg.fp += 1;
                }
                (false, false) => {}
            }
        }
        segments.push(seg.finish());
    }
    let (tp, fp, fn_) = ClassCounts::pooled(&classes);
    Ok(Scores2020 {
        er20: error_rate(&segments),
        f20: f_score(tp, fp, fn_),
        le_cd: mean_or_sentinel(le_sum, matched, anything),
        lr_cd: if ref_units == 0 {
            1.0
        } else {
            matched as f64 / ref_units as f64
        },
        classes,
        segments,
    })
}

/// Segment-level class activity detection plus frame-level, class-agnostic
/// localization.
pub fn metrics_2019(reference: &FrameEvents, prediction: &FrameEvents, n_classes: usize) -> Result<Scores2019> {
    check_frames(reference, prediction)?;
    check_classes(reference, n_classes)?;
    check_classes(prediction, n_classes)?;
    let mut classes = vec![ClassCounts::default(); n_classes];
    let mut segments = Vec::new();
    for range in segment_ranges(reference.n_frames()) {
        let mut seg = SegmentCounts::default();
        for (class, counts) in classes.iter_mut().enumerate() {
            let active = |fe: &FrameEvents| range.clone().any(|t| fe.frame(t).iter().any(|e| e.0 == class));
            match (active(reference), active(prediction)) {
                (true, true) => {
                    counts.tp += 1;
                    seg.n += 1;
                }
                (true, false) => {
                    counts.fn_ += 1;
                    seg.fn_ += 1;
                    seg.n += 1;
                }
                (false, true) => {
                    counts.fp += 1;
                    seg.fp += 1;
                }
                (false, false) => {}
            }
        }
        segments.push(seg.finish());
    }

    let (mut le_sum, mut pairs, mut count_ok) = (0.0, 0usize, 0usize);
    let mut anything = false;
    for t in 0..reference.n_frames() {
        let r: Vec<_> = reference.frame(t).iter().map(|e| e.1).collect();
        let p: Vec<_> = prediction.frame(t).iter().map(|e| e.1).collect();
        anything |= !r.is_empty() || !p.is_empty();
        if r.len() == p.len() {
            count_ok += 1;
        }
        let m = match_doas(&r, &p)?;
        le_sum += m.total();
        pairs += m.pairs.len();
    }
    let (tp, fp, fn_) = ClassCounts::pooled(&classes);
    let n_frames = reference.n_frames();
    Ok(Scores2019 {
        er: error_rate(&segments),
        f: f_score(tp, fp, fn_),
        le: mean_or_sentinel(le_sum, pairs, anything),
        lr: if n_frames == 0 {
            1.0
        } else {
            count_ok as f64 / n_frames as f64
        },
        classes,
        segments,
    })
}

/// Both suites over the same frames.
pub fn evaluate(reference: &FrameEvents, prediction: &FrameEvents, n_classes: usize) -> Result<MetricReport> {
    let a = metrics_2020(reference, prediction, n_classes)?;
    let b = metrics_2019(reference, prediction, n_classes)?;
    Ok(MetricReport {
        er20: a.er20,
        f20: a.f20,
        le_cd: a.le_cd,
        lr_cd: a.lr_cd,
        er: b.er,
        f: b.f,
        le: b.le,
        lr: b.lr,
        classes_2020: a.classes,
        segments_2020: a.segments,
        classes_2019: b.classes,
        segments_2019: b.segments,
    })
}
