//! Dominance curves computed by direct summation on the pooled grid.

/// `#{x ≤ z} / n`.
pub fn cdf(sample: &[f64], z: f64) -> f64 {
    sample.iter().filter(|&&x| x <= z).count() as f64 / sample.len() as f64
}

/// `∫_{-∞}^z F(t) dt`, integrating the step function interval by interval.
pub fn integrated_cdf(sample: &[f64], z: f64) -> f64 {
    let mut pts: Vec<f64> = sample.iter().copied().filter(|&x| x < z).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for (k, &p) in pts.iter().enumerate() {
        let next = if k + 1 < pts.len() { pts[k + 1] } else { z };
        area += cdf(sample, p) * (next - p);
    }
    area
}

fn curve(sample: &[f64], z: f64, order: u8) -> f64 {
    match order {
        1 => cdf(sample, z),
        2 => integrated_cdf(sample, z),
        _ => panic!("order must be 1 or 2"),
    }
}

/// `√(nm/(n+m)) · max(0, sup_z [D_a(z) − D_b(z)])` over every pooled point.
pub fn statistic(a: &[f64], b: &[f64], order: u8) -> f64 {
    let mut grid: Vec<f64> = a.iter().chain(b).copied().collect();
    grid.sort_by(|p, q| p.partial_cmp(q).unwrap());
    grid.dedup();
    let sup = grid.iter().map(|&z| curve(a, z, order) - curve(b, z, order)).fold(0.0, f64::max);
    let (n, m) = (a.len() as f64, b.len() as f64);
    (n * m / (n + m)).sqrt() * sup
}
