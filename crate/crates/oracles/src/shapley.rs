//! Exhaustive-subset Shapley values and Shapley interaction indices for tree
//! ensembles, using cover-weighted conditional expectations.

/// Minimal binary tree mirror so the oracle does not depend on the model code.
#[derive(Debug, Clone)]
pub enum Tree {
    Leaf { value: f64, cover: f64 },
    Split { feature: usize, threshold: f64, default_left: bool, cover: f64, left: Box<Tree>, right: Box<Tree> },
}

impl Tree {
    fn cover(&self) -> f64 {
        match self {
            Tree::Leaf { cover, .. } | Tree::Split { cover, .. } => *cover,
        }
    }

    fn left_branch(x: f64, threshold: f64, default_left: bool) -> bool {
        if x.is_nan() {
            default_left
        } else {
            x < threshold
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Tree::Leaf { value, .. } => *value,
            Tree::Split { feature, threshold, default_left, left, right, .. } => {
                if Self::left_branch(x[*feature], *threshold, *default_left) {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }

    /// `E[f(X) | X_S = x_S]` under the cover distribution. `known` is a bitmask.
    pub fn conditional(&self, x: &[f64], known: u64) -> f64 {
        match self {
            Tree::Leaf { value, .. } => *value,
            Tree::Split { feature, threshold, default_left, cover, left, right } => {
                if known >> feature & 1 == 1 {
                    if Self::left_branch(x[*feature], *threshold, *default_left) {
                        left.conditional(x, known)
                    } else {
                        right.conditional(x, known)
                    }
                } else {
                    (left.cover() * left.conditional(x, known) + right.cover() * right.conditional(x, known)) / cover
                }
            }
        }
    }
}

/// `base + scale · Σ trees`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trees: Vec<Tree>,
    pub base: f64,
    pub scale: f64,
    pub features: usize,
}

impl Ensemble {
    pub fn value(&self, x: &[f64], known: u64) -> f64 {
        self.base + self.scale * self.trees.iter().map(|t| t.conditional(x, known)).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.base + self.scale * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Exact Shapley values by summing over all `2^(M−1)` coalitions per feature.
pub fn shapley_values(model: &Ensemble, x: &[f64]) -> (Vec<f64>, f64) {
    let m = model.features;
    assert!(m <= 20, "exhaustive enumeration limited to 20 features");
    let values: Vec<f64> = (0..1u64 << m).map(|s| model.value(x, s)).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        for s in 0..1u64 << m {
            if s >> i & 1 == 1 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = factorial(size) * factorial(m - size - 1) / factorial(m);
            *p += w * (values[(s | 1 << i) as usize] - values[s as usize]);
        }
    }
    (phi, values[0])
}

/// Shapley interaction index for `i ≠ j`, halved so that off-diagonals split
/// the pairwise effect symmetrically; diagonal is `φ_i − Σ_{j≠i} Φ_ij`.
pub fn interaction_values(model: &Ensemble, x: &[f64]) -> Vec<Vec<f64>> {
    let m = model.features;
    assert!((2..=16).contains(&m));
    let values: Vec<f64> = (0..1u64 << m).map(|s| model.value(x, s)).collect();
    let (phi, _) = shapley_values(model, x);
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut acc = 0.0;
            for s in 0..1u64 << m {
                if s >> i & 1 == 1 || s >> j & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = factorial(size) * factorial(m - size - 2) / factorial(m - 1);
                let v = |t: u64| values[t as usize];
                acc += w * (v(s | 1 << i | 1 << j) - v(s | 1 << i) - v(s | 1 << j) + v(s));
            }
            out[i][j] = acc / 2.0;
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| out[i][j]).sum();
        out[i][i] = phi[i] - off;
    }
    out
}
