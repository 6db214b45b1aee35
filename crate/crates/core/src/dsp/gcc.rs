use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FeatureConfig, Spectrogram, Stft};
use crate::error::{Error, Result};

/// Cross-spectra with magnitude below this are treated as silent.
const PHAT_GUARD: f64 = 1e-12;

/// GCC-PHAT lag maps from two precomputed spectrograms, `frames x lags`.
///
/// Output position `p` holds lag `p - lags/2`; a positive lag means the
/// second channel is delayed relative to the first.
pub fn gcc_phat_frames(xi: &Spectrogram, xj: &Spectrogram, fft_size: usize, lags: usize) -> Result<Vec<f64>> {
    if xi.frames != xj.frames || xi.bins != xj.bins {
        return Err(Error::dim("gcc frames", xi.frames, xj.frames));
    }
    let inverse: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(fft_size);
    let half = lags as isize / 2;
    let mut out = Vec::with_capacity(xi.frames * lags);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for t in 0..xi.frames {
        let (a, b) = (xi.frame(t), xj.frame(t));
        for k in 0..xi.bins {
            let r = a[k] * b[k].conj();
            let m = r.norm();
            buf[k] = if m < PHAT_GUARD {
                Complex64::new(0.0, 0.0)
            } else {
                r / m
            };
        }
        for k in xi.bins..fft_size {
            buf[k] = buf[fft_size - k].conj();
        }
        inverse.process(&mut buf);
        let scale = 1.0 / fft_size as f64;
        for p in 0..lags as isize {
            let lag = p - half;
            let idx = (-lag).rem_euclid(fft_size as isize) as usize;
            out.push(buf[idx].re * scale);
        }
    }
    Ok(out)
}

/// GCC-PHAT of two equal-length signals.
pub fn gcc_phat(sig_i: &[f64], sig_j: &[f64], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    if sig_i.len() != sig_j.len() {
        return Err(Error::dim("signal length", sig_i.len(), sig_j.len()));
    }
    let stft = Stft::new(cfg);
    gcc_phat_frames(&stft.compute(sig_i)?, &stft.compute(sig_j)?, cfg.fft_size, cfg.gcc_lags)
}
