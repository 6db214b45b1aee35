use crate::doa::to_cartesian;
use crate::error::{Error, Result};
use crate::events::{Event, EventList};

pub const LABEL_RATE_HZ: f64 = 10.0;

/// Multi-hot class activity with per-class Cartesian DOA targets.
///
/// DOA columns are blocked by axis: column `axis * K + class` for
/// `axis` in x, y, z. Inactive triples are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLabelGrid {
    pub frames: usize,
    pub n_classes: usize,
    /// `frames x K`, entries 0 or 1.
    pub activity: Vec<f64>,
    /// `frames x 3K`.
    pub doa: Vec<f64>,
}

impl EventLabelGrid {
    pub fn new(frames: usize, n_classes: usize) -> Self {
        Self {
            frames,
            n_classes,
            activity: vec![0.0; frames * n_classes],
            doa: vec![0.0; frames * 3 * n_classes],
        }
    }

    pub fn is_active(&self, frame: usize, class: usize) -> bool {
        self.activity[frame * self.n_classes + class] != 0.0
    }

    pub fn direction(&self, frame: usize, class: usize) -> [f64; 3] {
        let k = self.n_classes;
        let row = &self.doa[frame * 3 * k..(frame + 1) * 3 * k];
        [row[class], row[k + class], row[2 * k + class]]
    }

    pub fn set(&mut self, frame: usize, class: usize, v: [f64; 3]) {
        let k = self.n_classes;
        self.activity[frame * k + class] = 1.0;
        for (axis, x) in v.into_iter().enumerate() {
            self.doa[frame * 3 * k + axis * k + class] = x;
        }
    }

    /// Loss mask: activity repeated over the three axes.
    pub fn doa_mask(&self) -> Vec<f64> {
        let k = self.n_classes;
        let mut mask = Vec::with_capacity(self.doa.len());
        for row in self.activity.chunks(k) {
            for _ in 0..3 {
                mask.extend_from_slice(row);
            }
        }
        mask
    }

    /// Frames `[start, start + len)`, zero beyond the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let k = self.n_classes;
        let mut out = Self::new(len, k);
        let avail = self.frames.saturating_sub(start).min(len);
        out.activity[..avail * k].copy_from_slice(&self.activity[start * k..(start + avail) * k]);
        out.doa[..avail * 3 * k].copy_from_slice(&self.doa[start * 3 * k..(start + avail) * 3 * k]);
        out
    }

    pub fn max_polyphony(&self) -> usize {
        self.activity
            .chunks(self.n_classes)
            .map(|r| r.iter().filter(|&&a| a != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Active cells as events, in frame then class order.
    pub fn to_events(&self) -> EventList {
        let mut events = Vec::new();
        for t in 0..self.frames {
            for c in 0..self.n_classes {
                if self.is_active(t, c) {
                    let (azimuth, elevation) = crate::doa::to_spherical(self.direction(t, c)).unwrap_or((0.0, 0.0));
                    events.push(Event {
                        frame: t,
                        class: c,
                        azimuth,
                        elevation,
                    });
                }
            }
        }
        EventList::new(events)
    }
}

/// Label grid for `frames` label frames from frame-rate events.
pub fn encode_labels(events: &EventList, frames: usize, n_classes: usize) -> Result<EventLabelGrid> {
    let mut grid = EventLabelGrid::new(frames, n_classes);
    for e in events.iter() {
        if e.class >= n_classes {
            return Err(Error::Config(format!(
                "class id {} out of range 0..{n_classes}",
                e.class
            )));
        }
        if e.frame >= frames {
            return Err(Error::Config(format!(
                "event frame {} beyond {frames} label frames",
                e.frame
            )));
        }
        if grid.is_active(e.frame, e.class) {
            return Err(Error::Config(format!(
                "class {} appears twice at frame {}",
                e.class, e.frame
            )));
        }
        grid.set(e.frame, e.class, to_cartesian(e.azimuth, e.elevation));
    }
    Ok(grid)
}
