use super::FeatureConfig;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub bins: usize,
    /// `n_mels x bins` row-major.
    pub weights: Vec<f64>,
    /// Band edges in Hz, `n_mels + 2` points; band `k` peaks at `edges[k + 1]`.
    pub edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FeatureConfig) -> Self {
        let bins = cfg.fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let points = cfg.n_mels + 2;
        let edges: Vec<f64> = (0..points)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (points - 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
        let mut weights = vec![0.0; cfg.n_mels * bins];
        for k in 0..cfg.n_mels {
            let (l, c, r) = (edges[k], edges[k + 1], edges[k + 2]);
            for b in 0..bins {
                let f = b as f64 * bin_hz;
                let w = ((f - l) / (c - l)).min((r - f) / (r - c));
                weights[k * bins + b] = w.max(0.0);
            }
        }
        Self {
            n_mels: cfg.n_mels,
            bins,
            weights,
            edges,
        }
    }

    pub fn band(&self, k: usize) -> &[f64] {
        &self.weights[k * self.bins..(k + 1) * self.bins]
    }

    pub fn center(&self, k: usize) -> f64 {
        self.edges[k + 1]
    }
}

/// Log mel energies of a `frames x bins` power spectrogram.
pub fn log_mel(power: &[f64], fb: &MelFilterbank, floor: f64) -> Vec<f64> {
    let frames = power.len() / fb.bins;
    let mut out = Vec::with_capacity(frames * fb.n_mels);
    for t in 0..frames {
        let p = &power[t * fb.bins..(t + 1) * fb.bins];
        for k in 0..fb.n_mels {
            let e: f64 = fb.band(k).iter().zip(p).map(|(w, x)| w * x).sum();
            out.push((e + floor).ln());
        }
    }
    out
}
