use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::FeatureConfig;
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided complex spectrogram, `frames x bins` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Centered short-time Fourier transform with reflection padding.
pub struct Stft {
    window: Vec<f64>,
    hop: usize,
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
}

/// Index into a signal of length `n` under whole-sample symmetric reflection.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

impl Stft {
    pub fn new(cfg: &FeatureConfig) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        Self {
            window: hann_periodic(cfg.window),
            hop: cfg.hop,
            fft_size: cfg.fft_size,
            fft,
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `ceil(N / hop)` frames; frame `t` is centered on sample `t * hop`.
    pub fn frames_for(&self, n: usize) -> usize {
        n.div_ceil(self.hop)
    }

    pub fn compute(&self, signal: &[f64]) -> Result<Spectrogram> {
        if signal.is_empty() {
            return Err(Error::Shape("stft of an empty signal".into()));
        }
        let n = signal.len();
        let frames = self.frames_for(n);
        let bins = self.bins();
        let half = (self.window.len() / 2) as isize;
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        for t in 0..frames {
            let start = (t * self.hop) as isize - half;
            buf.fill(Complex64::new(0.0, 0.0));
            for (k, &w) in self.window.iter().enumerate() {
                buf[k].re = signal[reflect(start + k as isize, n)] * w;
            }
            self.fft.process(&mut buf);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(Spectrogram { frames, bins, data })
    }
}
