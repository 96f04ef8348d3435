//! Slow, obviously-correct reference implementations. Nothing here shares
//! code with `effx-core`; tests compare the two.

pub mod dgp;
pub mod lp;
pub mod rank;
pub mod sd;
pub mod shapley;

/// Central finite-difference gradient.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Pair-counting AUROC: P(score_pos > score_neg) + ½ P(tie).
pub fn auroc_pairs(scores: &[f64], y: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        if y[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if y[j] != 0 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Average precision by thresholding at every distinct score.
pub fn average_precision(scores: &[f64], y: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let total_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(y).filter(|(s, l)| **s >= t && **l == 1).count() as f64;
        let pp = scores.iter().filter(|s| **s >= t).count() as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * tp / pp;
        prev_recall = recall;
    }
    ap
}
