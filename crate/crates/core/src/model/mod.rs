//! The convolutional-recurrent SELD network, its loss, decoding and training loop.

mod config;
mod decode;
mod loss;
mod network;
mod train;

pub use config::{ModelConfig, Variant};
pub use decode::{decode, decode_frames, Decoded, DEFAULT_THRESHOLD};
pub use loss::{batch_input, seld_loss, LabelBatch, SeldLoss};
pub use network::{ConvBlock, ModelOutput, SeldModel};
pub use train::{
    evaluate_segments, frame_events, log_csv, predict, train, EpochRecord, TrainOutcome, TrainRunConfig, Trainer,
    LOG_HEADER,
};
