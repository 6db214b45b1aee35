use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

/// Deinterleaved audio normalized to `[-1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads 16/24/32-bit integer or 32-bit float PCM.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::format(
                "wav",
                format!("{}: unsupported sample format {fmt:?}/{bits}", path.display()),
            ))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in frame.iter().enumerate() {
            channels[c].push(v);
        }
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

/// Writes 16-bit PCM; samples are clipped to the representable range.
pub fn write_wav(path: &Path, audio: &Audio) -> Result<()> {
    let spec = WavSpec {
        channels: audio.channels.len() as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for i in 0..audio.len() {
        for ch in &audio.channels {
            let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v)?;
        }
    }
    w.finalize()?;
    Ok(())
}
