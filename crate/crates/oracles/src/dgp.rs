//! Data-generating processes with known truth, shared by the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type Matrix = Vec<Vec<f64>>;

/// Inputs and outputs uniform on `[1, 10]`.
pub fn random_panel(r: &mut impl Rng, n: usize, m: usize, s: usize) -> (Matrix, Matrix) {
    let xs = (0..n).map(|_| (0..m).map(|_| r.random_range(1.0..10.0)).collect()).collect();
    let ys = (0..n).map(|_| (0..s).map(|_| r.random_range(1.0..10.0)).collect()).collect();
    (xs, ys)
}

/// `y = x^0.6 · te` with `x ~ U(1, 10)`, `te ~ U(0.5, 1)`; returns the true te.
pub fn cobb_douglas(r: &mut impl Rng, n: usize) -> (Matrix, Matrix, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut te = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = r.random_range(1.0..10.0);
        let t: f64 = r.random_range(0.5..1.0);
        xs.push(vec![x]);
        ys.push(vec![x.powf(0.6) * t]);
        te.push(t);
    }
    (xs, ys, te)
}

/// Single input/output with frontier `f` and efficiency `U(0.5, 1)`.
pub fn frontier_panel(r: &mut impl Rng, n: usize, f: impl Fn(f64) -> f64) -> (Matrix, Matrix) {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = r.random_range(1.0..10.0);
        let u: f64 = r.random_range(0.5..1.0);
        xs.push(vec![x]);
        ys.push(vec![f(x) * u]);
    }
    (xs, ys)
}

pub fn uniform_sample(r: &mut impl Rng, n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|_| shift + r.random::<f64>()).collect()
}

/// 24 cohorts of 4 units sharing an input bundle on the iso-cost curve
/// `x1·x2 = 10`, plus three planted units that use more of every input than
/// anyone else and produce ten times as much. Returns the planted indices.
pub fn planted_outliers(r: &mut impl Rng) -> (Matrix, Matrix, Vec<usize>) {
    let cohorts = 24;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..cohorts {
        let x1 = 1.0 + 9.0 * c as f64 / (cohorts - 1) as f64;
        let x2 = 10.0 / x1;
        for _ in 0..4 {
            xs.push(vec![x1, x2]);
            ys.push(vec![(x1 * x2).powf(0.3) * r.random_range(0.5..1.0)]);
        }
    }
    let base = xs.len();
    for (a, b) in [(11.0, 13.0), (12.0, 12.0), (13.0, 11.0)] {
        xs.push(vec![a, b]);
        ys.push(vec![10.0 * (a * b).powf(0.3) * r.random_range(0.5..1.0)]);
    }
    (xs, ys, vec![base, base + 1, base + 2])
}

pub const COUNTRIES: [&str; 4] = ["AR", "BR", "CL", "MX"];

/// Synthetic two-group school panel as CSV text.
///
/// Columns: `id, group, x1..x4, math, reading, science, wellbeing, c1..c{p},
/// country`. Covariate `c1` drives efficiency, `c2` is pure noise with some
/// missing cells, the rest are weak noise.
pub fn school_panel_csv(seed: u64, n: usize, p: usize) -> String {
    assert!(p >= 2);
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = String::from("id,group,x1,x2,x3,x4,math,reading,science,wellbeing");
    for k in 1..=p {
        out.push_str(&format!(",c{k}"));
    }
    out.push_str(",country\n");
    for i in 0..n {
        let group = if i % 3 == 0 { "private" } else { "public" };
        let xs: Vec<f64> = (0..4).map(|_| r.random_range(1.0..10.0)).collect();
        let c: Vec<f64> = (0..p).map(|_| noise.sample(&mut r)).collect();
        let level = xs.iter().map(|x| x.powf(0.15)).product::<f64>();
        let eff = (0.75 + 0.12 * c[0].tanh() + 0.05 * r.random_range(-1.0..1.0)).clamp(0.3, 1.0);
        let bump = if group == "private" { 1.05 } else { 1.0 };
        let ys: Vec<f64> =
            (0..4).map(|k| 100.0 * level * eff * bump * (1.0 + 0.03 * k as f64) * r.random_range(0.97..1.0)).collect();
        out.push_str(&format!("S{i:04},{group}"));
        for v in xs.iter().chain(&ys) {
            out.push_str(&format!(",{v:.6}"));
        }
        for (k, v) in c.iter().enumerate() {
            if k == 1 && i % 17 == 5 {
                out.push_str(",NA");
            } else {
                out.push_str(&format!(",{v:.6}"));
            }
        }
        out.push_str(&format!(",{}\n", COUNTRIES[i % COUNTRIES.len()]));
    }
    out
}
