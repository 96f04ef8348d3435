//! Brute-force FDH and order-α output scores.

fn insertion_sort(v: &mut [f64]) {
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// `max_j min_r y_jr / y0_r` over units with `x_j ≤ x0` componentwise.
pub fn fdh_theta(xs: &[Vec<f64>], ys: &[Vec<f64>], x0: &[f64], y0: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for j in 0..xs.len() {
        let mut dominates = true;
        for i in 0..x0.len() {
            if xs[j][i] > x0[i] {
                dominates = false;
            }
        }
        if dominates {
            let mut r_min = f64::INFINITY;
            for r in 0..y0.len() {
                r_min = r_min.min(ys[j][r] / y0[r]);
            }
            best = best.max(r_min);
        }
    }
    best
}

/// Order-α score: the k-th smallest dominating ratio with k the smallest
/// integer such that `100·k ≥ α·n`.
pub fn order_alpha_theta(xs: &[Vec<f64>], ys: &[Vec<f64>], x0: &[f64], y0: &[f64], alpha: f64) -> f64 {
    let mut ratios = Vec::new();
    for j in 0..xs.len() {
        if (0..x0.len()).all(|i| xs[j][i] <= x0[i]) {
            ratios.push((0..y0.len()).map(|r| ys[j][r] / y0[r]).fold(f64::INFINITY, f64::min));
        }
    }
    insertion_sort(&mut ratios);
    let n = ratios.len();
    let mut k = 1;
    while ((100 * k) as f64) < alpha * n as f64 {
        k += 1;
    }
    ratios[k - 1]
}
