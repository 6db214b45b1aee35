//! Dataset plumbing: label grids, fold plans, audio files, synthetic scenes
//! and segment loading.

mod dataset;
mod folds;
mod labels;
mod synth;
mod wav;

pub use dataset::{fold_of, load_split, segments_from, DatasetLayout, Segment};
pub use folds::{FoldPlan, Stage};
pub use labels::{encode_labels, EventLabelGrid, LABEL_RATE_HZ};
pub use synth::{
    class_template, mic_delays, synth_scene, RandomEvents, Scene, SceneEvent, SceneSpec, MAX_POLYPHONY, MIC_DIRECTIONS,
    MIC_RADIUS_M, N_CLASSES, SAMPLE_RATE, SPEED_OF_SOUND,
};
pub use wav::{read_wav, write_wav, Audio};
