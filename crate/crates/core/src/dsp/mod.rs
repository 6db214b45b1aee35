//! Audio front-end: per-channel log-mel spectrograms and pairwise GCC-PHAT
//! lag maps stacked into one feature block per segment.
//!
//! For four microphones the block has 10 channels: 4 log-mel maps followed
//! by 6 GCC maps for pairs (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).

mod features;
mod gcc;
mod mel;
mod stft;

pub use features::{
    extract_features, read_feature_file, read_manifest, write_feature_file, write_manifest, FeatureBlock, FeatureFile,
    ManifestEntry, FEATURE_MAGIC, MANIFEST_NAME,
};
pub use gcc::{gcc_phat, gcc_phat_frames};
pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelFilterbank};
pub use stft::{hann_periodic, Spectrogram, Stft};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    /// Analysis window in samples.
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Frames per feature block.
    pub segment_frames: usize,
    pub n_channels: usize,
    /// Lags kept per GCC frame, centered on zero.
    pub gcc_lags: usize,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24_000,
            window: 960,
            hop: 480,
            fft_size: 1024,
            n_mels: 64,
            f_min: 0.0,
            f_max: 12_000.0,
            segment_frames: 300,
            n_channels: 4,
            gcc_lags: 64,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window == 0 || self.hop == 0 || self.segment_frames == 0 || self.n_channels < 2 {
            return bad("window, hop, segment_frames must be positive and n_channels >= 2".into());
        }
        if 2 * self.hop != self.window {
            return bad(format!("hop {} must be half the window {}", self.hop, self.window));
        }
        if self.fft_size < self.window {
            return bad(format!(
                "fft size {} shorter than window {}",
                self.fft_size, self.window
            ));
        }
        if self.gcc_lags != self.n_mels || self.gcc_lags > self.fft_size {
            return bad(format!(
                "gcc lags {} must equal mel bands {} and fit the fft",
                self.gcc_lags, self.n_mels
            ));
        }
        if !(0.0..self.f_max).contains(&self.f_min) || self.f_max > self.sample_rate as f64 / 2.0 {
            return bad(format!("mel range {}..{} Hz invalid", self.f_min, self.f_max));
        }
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.n_channels * (self.n_channels - 1) / 2
    }

    /// Channels of a feature block: one log-mel map per mic plus one GCC map per pair.
    pub fn block_channels(&self) -> usize {
        self.n_channels + self.n_pairs()
    }

    pub fn segment_samples(&self) -> usize {
        self.segment_frames * self.hop
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_channels;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    /// Stable 64-bit digest of the configuration.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("feature config serializes");
        let digest = Sha256::digest(json.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}
