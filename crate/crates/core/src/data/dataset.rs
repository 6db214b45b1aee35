use std::path::{Path, PathBuf};

use super::labels::{encode_labels, EventLabelGrid};
use crate::dsp::{read_feature_file, read_manifest, FeatureBlock};
use crate::error::{Error, Result};
use crate::events::EventList;

/// One network example: a feature block and, when known, its labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub features: FeatureBlock,
    pub labels: Option<EventLabelGrid>,
}

impl Segment {
    pub fn source(&self) -> &str {
        &self.features.source_file
    }
}

/// Directory names under a dataset root.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn audio_dir(&self) -> PathBuf {
        self.root.join("mic_dev")
    }

    pub fn metadata_dir(&self) -> PathBuf {
        self.root.join("metadata_dev")
    }

    pub fn file_stem(fold: u32, index: usize) -> String {
        format!("fold{fold}_room1_mix{index:03}")
    }
}

/// Fold id from a `fold<N>_...` file stem.
pub fn fold_of(stem: &str) -> Option<u32> {
    let rest = stem.strip_prefix("fold")?;
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Pairs consecutive feature blocks with consecutive label windows.
pub fn segments_from(blocks: Vec<FeatureBlock>, labels: Option<&EventLabelGrid>, label_frames: usize) -> Vec<Segment> {
    blocks
        .into_iter()
        .enumerate()
        .map(|(s, features)| Segment {
            features,
            labels: labels.map(|g| g.window(s * label_frames, label_frames)),
        })
        .collect()
}

/// Loads every manifest entry from `folds`, in manifest order.
///
/// Metadata is read from `<metadata_dir>/<stem>.csv`; a missing file yields
/// unlabeled segments unless `require_labels` is set.
pub fn load_split(
    features_dir: &Path,
    metadata_dir: &Path,
    folds: &[u32],
    expected_hash: u64,
    label_frames: usize,
    n_classes: usize,
    require_labels: bool,
) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for entry in read_manifest(features_dir)? {
        if !fold_of(&entry.file).is_some_and(|f| folds.contains(&f)) {
            continue;
        }
        let file = read_feature_file(&features_dir.join(format!("{}.feat", entry.file)), Some(expected_hash))?;
        if file.blocks.len() != entry.segments {
            return Err(Error::format(
                "manifest",
                format!(
                    "{} lists {} segments, file holds {}",
                    entry.file,
                    entry.segments,
                    file.blocks.len()
                ),
            ));
        }
        let meta_path = metadata_dir.join(format!("{}.csv", entry.file));
        let grid = if meta_path.exists() {
            let events = EventList::load(&meta_path)?;
            Some(encode_labels(&events, entry.segments * label_frames, n_classes)?)
        } else if require_labels {
            return Err(Error::io(&meta_path, std::io::ErrorKind::NotFound.into()));
        } else {
            None
        };
        out.extend(segments_from(file.blocks, grid.as_ref(), label_frames));
    }
    Ok(out)
}
