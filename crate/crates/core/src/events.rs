//! Decoded event records and their CSV forms.
//!
//! Prediction files hold `frame,class,azimuth,elevation`; metadata files add
//! a track column: `frame,class,track,azimuth,elevation`. Angles are written
//! with 4 decimals. Loaders accept either layout.

use std::fmt::Write as _;
use std::path::Path;

use crate::doa::{to_cartesian, Vec3};
use crate::error::{Error, Result};

/// One active class at one label frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub frame: usize,
    pub class: usize,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Event {
    pub fn direction(&self) -> Vec3 {
        to_cartesian(self.azimuth, self.elevation)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventList {
    pub events: Vec<Event>,
}

impl EventList {
    pub fn new(mut events: Vec<Event>) -> Self {
        sort(&mut events);
        Self { events }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    /// One past the last frame that holds an event.
    pub fn frame_span(&self) -> usize {
        self.events.iter().map(|e| e.frame + 1).max().unwrap_or(0)
    }

    /// Events shifted by `offset` frames and appended.
    pub fn extend_shifted(&mut self, other: &EventList, offset: usize) {
        self.events.extend(other.events.iter().map(|e| Event {
            frame: e.frame + offset,
            ..*e
        }));
        sort(&mut self.events);
    }

    pub fn to_prediction_csv(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let _ = writeln!(s, "{},{},{:.4},{:.4}", e.frame, e.class, e.azimuth, e.elevation);
        }
        s
    }

    pub fn to_metadata_csv(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let _ = writeln!(s, "{},{},0,{:.4},{:.4}", e.frame, e.class, e.azimuth, e.elevation);
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |detail: String| Error::format("event csv", format!("line {}: {detail}", lineno + 1));
            let (frame, class, az, el) = match fields.as_slice() {
                [f, c, a, e] | [f, c, _, a, e] => (*f, *c, *a, *e),
                _ => return Err(bad(format!("expected 4 or 5 fields, got {}", fields.len()))),
            };
            let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
            let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            events.push(Event {
                frame: int(frame)?,
                class: int(class)?,
                azimuth: real(az)?,
                elevation: real(el)?,
            });
        }
        Ok(Self::new(events))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn save_prediction(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_prediction_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn save_metadata(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_metadata_csv()).map_err(|e| Error::io(path, e))
    }
}

fn sort(events: &mut [Event]) {
    events.sort_by_key(|a| (a.frame, a.class));
}
