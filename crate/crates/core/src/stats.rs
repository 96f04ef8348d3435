//! Small descriptive-statistics helpers shared across modules.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Linear-interpolation quantile on a sorted slice (type 7, the R default).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn iqr(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

/// Summary row used by the score tables: mean, SD, IQR, min, max, N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Describe {
    pub mean: f64,
    pub sd: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Describe {
    pub fn of(xs: &[f64]) -> Self {
        Describe {
            mean: mean(xs),
            sd: std_dev(xs),
            iqr: iqr(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: xs.len(),
        }
    }
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.349) n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let sd = std_dev(xs);
    let spread = iqr(xs) / 1.349;
    let scale = if spread > 0.0 { sd.min(spread) } else { sd };
    0.9 * scale * (xs.len() as f64).powf(-0.2)
}

/// Gaussian kernel density on an equispaced grid covering the sample
/// padded by three bandwidths. Returns `(grid, density)`.
pub fn kde_grid(xs: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut h = silverman_bandwidth(xs);
    if !(h.is_finite() && h > 0.0) {
        h = 1e-3;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let dens = grid
        .iter()
        .map(|&g| {
            norm * xs
                .iter()
                .map(|&x| {
                    let u = (g - x) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    (grid, dens)
}
