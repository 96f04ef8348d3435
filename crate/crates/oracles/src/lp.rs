//! Vertex enumeration for `opt c·x s.t. A x = b, x ≥ 0`, and the DEA
//! envelopment program written out in that form.

/// Solves a square system by Gaussian elimination; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..k {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..k).map(|i| b[i] / a[i][i]).collect())
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Best objective over all basic feasible solutions, or `None` when no
/// basis is feasible. Only meaningful for bounded programs. Rows of `a` must
/// be linearly independent.
pub fn vertex_optimum(c: &[f64], a: &[Vec<f64>], b: &[f64], maximize: bool) -> Option<(f64, Vec<f64>)> {
    let rows = a.len();
    let cols = c.len();
    if rows == 0 {
        return Some((0.0, vec![0.0; cols]));
    }
    assert!(rows <= cols, "need at least as many columns as rows");
    let mut idx: Vec<usize> = (0..rows).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let sub: Vec<Vec<f64>> = (0..rows).map(|r| idx.iter().map(|&j| a[r][j]).collect()).collect();
        if let Some(xb) = solve_square(sub, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-9) {
                let mut x = vec![0.0; cols];
                for (p, &j) in idx.iter().enumerate() {
                    x[j] = xb[p].max(0.0);
                }
                let resid = (0..rows)
                    .map(|r| ((0..cols).map(|j| a[r][j] * x[j]).sum::<f64>() - b[r]).abs())
                    .fold(0.0, f64::max);
                if resid < 1e-7 {
                    let v: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
                    let better = match &best {
                        None => true,
                        Some((bv, _)) => (maximize && v > *bv) || (!maximize && v < *bv),
                    };
                    if better {
                        best = Some((v, x));
                    }
                }
            }
        }
        if !next_combination(&mut idx, cols) {
            break;
        }
    }
    best
}

/// Output-oriented Farrell score `max θ` by vertex enumeration.
///
/// Columns: `z_1..z_n, θ, input slacks, output surpluses`.
pub fn dea_theta(xs: &[Vec<f64>], ys: &[Vec<f64>], x0: &[f64], y0: &[f64], vrs: bool) -> f64 {
    let n = xs.len();
    let m = x0.len();
    let s = y0.len();
    let cols = n + 1 + m + s;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; cols];
        for j in 0..n {
            row[j] = xs[j][i];
        }
        row[n + 1 + i] = 1.0;
        a.push(row);
        b.push(x0[i]);
    }
    for r in 0..s {
        let mut row = vec![0.0; cols];
        for j in 0..n {
            row[j] = ys[j][r];
        }
        row[n] = -y0[r];
        row[n + 1 + m + r] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    if vrs {
        let mut row = vec![0.0; cols];
        row[..n].iter_mut().for_each(|v| *v = 1.0);
        a.push(row);
        b.push(1.0);
    }
    let mut c = vec![0.0; cols];
    c[n] = 1.0;
    vertex_optimum(&c, &a, &b, true).expect("DEA program with the unit in its reference set is feasible").0
}
