use super::network::ModelOutput;
use crate::doa::to_spherical;
use crate::events::{Event, EventList};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decoded {
    pub events: EventList,
    /// `(frame, class)` of active cells whose DOA vector was zero; they
    /// are reported at azimuth 0, elevation 0.
    pub degenerate: Vec<(usize, usize)>,
}

/// Thresholds one item's `[L, K]` activity and reads directions from its
/// `[L, 3K]` axis-blocked DOA rows.
pub fn decode_frames(sed: &[f64], doa: &[f64], n_classes: usize, threshold: f64) -> Decoded {
    let k = n_classes;
    let mut events = Vec::new();
    let mut degenerate = Vec::new();
    for (t, (act, dir)) in sed.chunks(k).zip(doa.chunks(3 * k)).enumerate() {
        for (c, &p) in act.iter().enumerate() {
            if p < threshold {
                continue;
            }
            let v = [dir[c], dir[k + c], dir[2 * k + c]];
            let (azimuth, elevation) = to_spherical(v).unwrap_or_else(|| {
                degenerate.push((t, c));
                (0.0, 0.0)
            });
            events.push(Event {
                frame: t,
                class: c,
                azimuth,
                elevation,
            });
        }
    }
    Decoded {
        events: EventList::new(events),
        degenerate,
    }
}

/// One decoded event list per batch item.
pub fn decode<S: Scalar>(out: &ModelOutput<S>, threshold: f64) -> Vec<Decoded> {
    let s = out.sed.shape();
    let (b, l, k) = (s[0], s[1], s[2]);
    let sed: Vec<f64> = out.sed.data().iter().map(|v| v.as_f64()).collect();
    let doa: Vec<f64> = out.doa.data().iter().map(|v| v.as_f64()).collect();
    (0..b)
        .map(|i| {
            decode_frames(
                &sed[i * l * k..(i + 1) * l * k],
                &doa[i * l * 3 * k..(i + 1) * l * 3 * k],
                k,
                threshold,
            )
        })
        .collect()
}
