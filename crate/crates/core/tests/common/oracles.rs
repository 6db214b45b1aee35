//! Independent reference computations, written without the library's
//! implementations.

/// Lag `d` in `-max_lag..=max_lag` maximizing `Σ a[t] · b[t + d]`;
/// positive `d` means `b` lags behind `a`.
pub fn xcorr_lag(a: &[f64], b: &[f64], max_lag: i64) -> i64 {
    let n = a.len() as i64;
    let score = |d: i64| -> f64 {
        (0..n)
            .filter(|t| (0..n).contains(&(t + d)))
            .map(|t| a[t as usize] * b[(t + d) as usize])
            .sum()
    };
    (-max_lag..=max_lag)
        .max_by(|&x, &y| score(x).total_cmp(&score(y)))
        .expect("non-empty lag range")
}

/// Minimum total cost over every maximal partial assignment, by
/// enumerating injections of the smaller side into the larger.
pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, transposed: bool, best: &mut f64, acc: f64) {
        let (rows, cols) = if transposed {
            (cost[0].len(), cost.len())
        } else {
            (cost.len(), cost[0].len())
        };
        if row == rows {
            *best = best.min(acc);
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transposed { cost[c][row] } else { cost[row][c] };
                go(cost, row + 1, used, transposed, best, acc + v);
                used[c] = false;
            }
        }
    }
    let transposed = rows > cols;
    let mut best = f64::INFINITY;
    let free = if transposed { rows } else { cols };
    go(cost, 0, &mut vec![false; free], transposed, &mut best, 0.0);
    best
}

pub fn unit(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

pub fn angle_deg(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Edge frequencies of `n_bands` triangular HTK-mel bands over
/// `[f_min, f_max]`, from `m = 2595 log10(1 + f / 700)`.
pub fn mel_edges(n_bands: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let to_mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let to_hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (to_mel(f_min), to_mel(f_max));
    (0..n_bands + 2)
        .map(|i| to_hz(lo + (hi - lo) * i as f64 / (n_bands + 1) as f64))
        .collect()
}

/// Band with the largest triangular response at `f`, and the gap to the
/// runner-up.
pub fn mel_band_for(f: f64, edges: &[f64]) -> (usize, f64) {
    let mut w: Vec<(usize, f64)> = (0..edges.len() - 2)
        .map(|k| {
            let (lo, c, hi) = (edges[k], edges[k + 1], edges[k + 2]);
            let v = ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0);
            (k, v)
        })
        .collect();
    w.sort_by(|a, b| b.1.total_cmp(&a.1));
    (w[0].0, w[0].1 - w[1].1)
}

/// Parameters added by cSE (`C → C/ρ → C` with biases) plus sSE (`1×1`
/// conv `C → 1` with bias).
pub fn se_overhead(c: usize, ratio: usize) -> usize {
    let hidden = c / ratio;
    (c * hidden + hidden) + (hidden * c + c) + (c + 1)
}
