//! Feature blocks, per-file feature archives and the directory manifest.
//!
//! Feature file layout (little-endian):
//!
//! ```text
//! magic "SELDFEAT" | version u32 | config hash u64 | channels u32 | frames u32 | bins u32 | segments u32
//! segments x channels x frames x bins f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{gcc_phat_frames, log_mel, FeatureConfig, MelFilterbank, Stft};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"SELDFEAT";
const FEATURE_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "features.manifest";

/// One segment's `[channels, frames, bins]` network input.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    pub data: Vec<f64>,
    pub channels: usize,
    pub frames: usize,
    pub bins: usize,
    pub segment_index: usize,
    pub source_file: String,
}

impl FeatureBlock {
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.frames, self.bins]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.frames * self.bins;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Splits multichannel audio into zero-padded segments and computes one
/// block per segment.
pub fn extract_features(audio: &[Vec<f64>], cfg: &FeatureConfig, source_file: &str) -> Result<Vec<FeatureBlock>> {
    cfg.validate()?;
    if audio.len() != cfg.n_channels {
        return Err(Error::dim("audio channels", cfg.n_channels, audio.len()));
    }
    let n = audio[0].len();
    if let Some(bad) = audio.iter().find(|c| c.len() != n) {
        return Err(Error::dim("channel length", n, bad.len()));
    }
    let seg_len = cfg.segment_samples();
    let n_segments = n.div_ceil(seg_len).max(1);
    let stft = Stft::new(cfg);
    let fb = MelFilterbank::new(cfg);
    let plane = cfg.segment_frames * cfg.n_mels;
    let mut blocks = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let start = s * seg_len;
        let specs = audio
            .iter()
            .map(|ch| {
                let mut seg = vec![0.0; seg_len];
                let end = (start + seg_len).min(n);
                if start < end {
                    seg[..end - start].copy_from_slice(&ch[start..end]);
                }
                stft.compute(&seg)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(cfg.block_channels() * plane);
        for spec in &specs {
            data.extend(log_mel(&spec.power(), &fb, cfg.log_floor));
        }
        for (i, j) in cfg.pairs() {
            data.extend(gcc_phat_frames(&specs[i], &specs[j], cfg.fft_size, cfg.gcc_lags)?);
        }
        blocks.push(FeatureBlock {
            data,
            channels: cfg.block_channels(),
            frames: cfg.segment_frames,
            bins: cfg.n_mels,
            segment_index: s,
            source_file: source_file.to_string(),
        });
    }
    Ok(blocks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub config_hash: u64,
    pub blocks: Vec<FeatureBlock>,
}

pub fn write_feature_file(path: &Path, config_hash: u64, blocks: &[FeatureBlock]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let [c, t, f] = blocks.first().map_or([0, 0, 0], FeatureBlock::shape);
    if let Some(b) = blocks.iter().find(|b| b.shape() != [c, t, f]) {
        return Err(Error::Shape(format!(
            "mixed block shapes {:?} vs {:?}",
            b.shape(),
            [c, t, f]
        )));
    }
    let mut header = Vec::with_capacity(40);
    header.extend_from_slice(FEATURE_MAGIC);
    header.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    header.extend_from_slice(&config_hash.to_le_bytes());
    for d in [c, t, f, blocks.len()] {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    w.write_all(&header).map_err(io)?;
    for b in blocks {
        for v in &b.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a feature archive, failing fast when `expected_hash` differs.
pub fn read_feature_file(path: &Path, expected_hash: Option<u64>) -> Result<FeatureFile> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut header = [0u8; 36];
    r.read_exact(&mut header)
        .map_err(|_| Error::format("feature file", format!("{}: truncated header", path.display())))?;
    if &header[..8] != FEATURE_MAGIC {
        return Err(Error::format("feature file", format!("{}: bad magic", path.display())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
    if u32_at(8) != FEATURE_VERSION {
        return Err(Error::format(
            "feature file",
            format!("unsupported version {}", u32_at(8)),
        ));
    }
    let config_hash = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    if let Some(expected) = expected_hash {
        if expected != config_hash {
            return Err(Error::ConfigHash {
                expected,
                found: config_hash,
            });
        }
    }
    let (c, t, f, n) = (
        u32_at(20) as usize,
        u32_at(24) as usize,
        u32_at(28) as usize,
        u32_at(32) as usize,
    );
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut raw = vec![0u8; c * t * f * 8];
    let mut blocks = Vec::with_capacity(n);
    for s in 0..n {
        r.read_exact(&mut raw)
            .map_err(|_| Error::format("feature file", format!("{}: truncated at segment {s}", path.display())))?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        blocks.push(FeatureBlock {
            data,
            channels: c,
            frames: t,
            bins: f,
            segment_index: s,
            source_file: source.clone(),
        });
    }
    Ok(FeatureFile { config_hash, blocks })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub segments: usize,
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let path = dir.join(MANIFEST_NAME);
    let mut s = String::from("file,segments\n");
    for e in entries {
        s.push_str(&format!("{},{}\n", e.file, e.segments));
    }
    std::fs::write(&path, s).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (file, n) = l
                .rsplit_once(',')
                .ok_or_else(|| Error::format("manifest", format!("bad row `{l}`")))?;
            let segments = n
                .trim()
                .parse()
                .map_err(|_| Error::format("manifest", format!("bad segment count `{n}`")))?;
            Ok(ManifestEntry {
                file: file.to_string(),
                segments,
            })
        })
        .collect()
}
