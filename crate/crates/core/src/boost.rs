//! Gradient-boosted regression trees for binary classification (logistic
//! loss, second-order exact greedy splits), stratified cross-validation with
//! training-fold undersampling, AUROC/AUPRC, and a penalized logistic
//! regression baseline.

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss of margins against 0/1 labels.
pub fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    margins.iter().zip(y).map(|(&z, &t)| softplus(z) - f64::from(t) * z).sum::<f64>() / y.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Rows with `x[feature] < threshold` go left.
        threshold: f64,
        /// Where rows with a missing value go.
        default_left: bool,
        cover: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    /// True when `x` goes to the left child of a split on `feature`.
    #[inline]
    pub fn goes_left(x: f64, threshold: f64, default_left: bool) -> bool {
        if x.is_nan() {
            default_left
        } else {
            x < threshold
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split { feature, threshold, default_left, left, right, .. } => {
                    node = if Self::goes_left(x[*feature], *threshold, *default_left) { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Features used by any split, with repetition.
    pub fn split_features(&self, out: &mut Vec<usize>) {
        if let TreeNode::Split { feature, left, right, .. } = self {
            out.push(*feature);
            left.split_features(out);
            right.split_features(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<TreeNode>,
    /// Log-odds offset.
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_count: usize,
}

impl TreeEnsemble {
    /// `base + η Σ_k f_k(x)`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    fn check_dims(&self, x: &[Vec<f64>]) -> Result<()> {
        if let Some(row) = x.iter().find(|r| r.len() != self.feature_count) {
            return Err(Error::invalid(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.feature_count
            )));
        }
        Ok(())
    }

    pub fn predict_margin(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x.iter().map(|r| self.margin(r)).collect())
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.predict_margin(x)?.into_iter().map(sigmoid).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn predict_proba(model: &TreeEnsemble, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

pub const N_ESTIMATORS_GRID: [usize; 4] = [100, 500, 1000, 5000];
pub const SUBSAMPLE_GRID: [f64; 3] = [0.5, 0.7, 0.9];
pub const MAX_DEPTH_GRID: [usize; 4] = [3, 5, 7, 9];
pub const LEARNING_RATE_GRID: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub subsample: f64,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Penalty per leaf.
    pub gamma: f64,
    pub min_child_cover: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_estimators: 100,
            subsample: 0.7,
            max_depth: 5,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_cover: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    /// The full hyperparameter lattice (144 configurations).
    pub fn full_grid() -> Vec<GbtConfig> {
        let mut out = Vec::new();
        for &n_estimators in &N_ESTIMATORS_GRID {
            for &subsample in &SUBSAMPLE_GRID {
                for &max_depth in &MAX_DEPTH_GRID {
                    for &learning_rate in &LEARNING_RATE_GRID {
                        out.push(GbtConfig { n_estimators, subsample, max_depth, learning_rate, ..Default::default() });
                    }
                }
            }
        }
        out
    }

    /// Whether every tuned parameter lies on the documented grid.
    pub fn on_grid(&self) -> bool {
        N_ESTIMATORS_GRID.contains(&self.n_estimators)
            && SUBSAMPLE_GRID.contains(&self.subsample)
            && MAX_DEPTH_GRID.contains(&self.max_depth)
            && LEARNING_RATE_GRID.contains(&self.learning_rate)
    }

    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 {
            return Err(Error::invalid("n_estimators and max_depth must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must lie in (0, 1]"));
        }
        if !(self.learning_rate > 0.0) || self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_cover < 0.0 {
            return Err(Error::invalid("learning_rate must be positive; lambda, gamma, min_child_cover nonnegative"));
        }
        Ok(())
    }
}

fn check_xy(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("empty design matrix"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("ragged design matrix"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid("labels contain a single class"));
    }
    Ok(p)
}

/// Gain of splitting `(G, H)` into `(G_L, H_L)` and the remainder.
#[inline]
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// Optimal leaf weight `-G / (H + λ)`.
#[inline]
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbtConfig,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

impl Grower<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]))
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<BestSplit> {
        let p = self.x[0].len();
        let lambda = self.cfg.lambda;
        let gamma = self.cfg.gamma;
        let min_cover = self.cfg.min_child_cover.max(1.0);
        let total = rows.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut vals: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in 0..p {
            vals.clear();
            let (mut gm, mut hm) = (0.0, 0.0);
            for &i in rows {
                let v = self.x[i][f];
                if v.is_nan() {
                    gm += self.grad[i];
                    hm += self.hess[i];
                } else {
                    vals.push((v, i));
                }
            }
            if vals.len() < 2 {
                continue;
            }
            let n_missing = total - vals.len() as f64;
            vals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..vals.len() - 1 {
                let i = vals[k].1;
                gl += self.grad[i];
                hl += self.hess[i];
                let (a, b) = (vals[k].0, vals[k + 1].0);
                if a == b {
                    continue;
                }
                let mut threshold = 0.5 * (a + b);
                if threshold <= a {
                    threshold = b;
                }
                let n_left = (k + 1) as f64;
                // Missing rows to the left, then to the right; left wins ties.
                for default_left in [true, false] {
                    let (cl, gl2, hl2) =
                        if default_left { (n_left + n_missing, gl + gm, hl + hm) } else { (n_left, gl, hl) };
                    if cl < min_cover || total - cl < min_cover {
                        continue;
                    }
                    let gain = split_gain(gl2, hl2, g, h, lambda, gamma);
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(BestSplit { gain, feature: f, threshold, default_left });
                    }
                }
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let (g, h) = self.sums(&rows);
        let cover = rows.len() as f64;
        let leaf = || TreeNode::Leaf { weight: leaf_weight(g, h, self.cfg.lambda), cover };
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return leaf();
        }
        match self.best_split(&rows, g, h) {
            Some(best) if best.gain > 0.0 => {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| TreeNode::goes_left(self.x[i][best.feature], best.threshold, best.default_left));
                TreeNode::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    default_left: best.default_left,
                    cover,
                    gain: best.gain,
                    left: Box::new(self.grow(left, depth + 1)),
                    right: Box::new(self.grow(right, depth + 1)),
                }
            }
            _ => leaf(),
        }
    }
}

/// Training record returned alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean logistic loss on the full training set after each round
    /// (index 0 = before the first tree).
    pub loss: Vec<f64>,
    /// Rows used by each round's tree.
    pub rows_per_round: Vec<usize>,
}

pub fn train_gbt(x: &[Vec<f64>], y: &[u8], cfg: &GbtConfig) -> Result<TreeEnsemble> {
    train_gbt_traced(x, y, cfg).map(|(m, _)| m)
}

/// Boosting with logistic loss; see [`train_gbt`].
pub fn train_gbt_traced(x: &[Vec<f64>], y: &[u8], cfg: &GbtConfig) -> Result<(TreeEnsemble, TrainTrace)> {
    let p = check_xy(x, y)?;
    cfg.validate()?;
    if !cfg.on_grid() {
        info!("GBT parameters off the documented grid: {cfg:?}");
    }
    let n = y.len();
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let prior = pos / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut trace = TrainTrace { loss: vec![logistic_loss(&margins, y)], rows_per_round: Vec::new() };
    let n_sub = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let all: Vec<usize> = (0..n).collect();
    for round in 0..cfg.n_estimators {
        for i in 0..n {
            let pr = sigmoid(margins[i]);
            grad[i] = pr - f64::from(y[i]);
            hess[i] = pr * (1.0 - pr);
        }
        let rows = if n_sub == n {
            all.clone()
        } else {
            let mut r = rng::stream(cfg.seed, &[round as u64]);
            let mut idx = all.clone();
            idx.shuffle(&mut r);
            idx.truncate(n_sub);
            idx.sort_unstable();
            idx
        };
        trace.rows_per_round.push(rows.len());
        let grower = Grower { x, grad: &grad, hess: &hess, cfg };
        let tree = grower.grow(rows, 0);
        for (m, row) in margins.iter_mut().zip(x) {
            *m += cfg.learning_rate * tree.predict(row);
        }
        trees.push(tree);
        trace.loss.push(logistic_loss(&margins, y));
    }
    Ok((TreeEnsemble { trees, base_score, learning_rate: cfg.learning_rate, feature_count: p }, trace))
}

fn check_binary(y: &[u8]) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((y.len() - pos, pos))
}

/// Fold assignment with one seed per class, so that swapping labels and
/// seeds reproduces the same folds.
pub fn assign_folds(y: &[u8], k: usize, class_seeds: [u64; 2]) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let (neg, pos) = check_binary(y)?;
    if neg < k || pos < k {
        return Err(Error::invalid(format!("each class needs at least {k} members (have {neg} and {pos})")));
    }
    let mut folds = vec![0; y.len()];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng::stream(class_seeds[class as usize], &[]));
        for (pos, i) in idx.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

/// Per-class shuffled round-robin fold assignment.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    assign_folds(y, k, [rng::derive_seed(seed, &[0]), rng::derive_seed(seed, &[1])])
}

/// Stratified random split; returns `(train, test)` row indices, ascending.
pub fn stratified_holdout(y: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_binary(y)?;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test fraction must lie in (0, 1)"));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::invalid("each class needs at least 2 members for a holdout split"));
        }
        idx.shuffle(&mut rng::stream(seed, &[class as u64]));
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Randomly drops majority-class rows until both classes have equal counts.
/// `y` is indexed by row id; the returned rows keep their input order.
pub fn undersample_majority(rows: &[usize], y: &[u8], seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = rows.iter().copied().filter(|&r| y[r] == 1).collect();
    let neg: Vec<usize> = rows.iter().copied().filter(|&r| y[r] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("undersampling needs both classes"));
    }
    if pos.len() == neg.len() {
        return Ok(rows.to_vec());
    }
    let (mut major, minor_len) = if pos.len() > neg.len() { (pos, neg.len()) } else { (neg, pos.len()) };
    major.shuffle(&mut rng::stream(seed, &[]));
    major.truncate(minor_len);
    major.sort_unstable();
    Ok(rows.iter().copied().filter(|r| y[*r] != y[major[0]] || major.binary_search(r).is_ok()).collect())
}

/// Area under the ROC curve via the Mann–Whitney statistic (ties count ½).
pub fn auroc(scores: &[f64], y: &[u8]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let (neg, pos) = check_binary(y)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of average ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&r| y[r] == 1).count() as f64 * avg_rank;
        i = j + 1;
    }
    let (np, nn) = (pos as f64, neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Average precision: Σ (R_k − R_{k−1}) P_k over distinct score thresholds.
pub fn auprc(scores: &[f64], y: &[u8]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let (_, pos) = check_binary(y)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        for &r in &idx[i..=j] {
            if y[r] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

fn select(x: &[Vec<f64>], rows: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&r| x[r].clone()).collect()
}

fn select_y(y: &[u8], rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&r| y[r]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow<C> {
    pub config: C,
    pub fold_auroc: Vec<f64>,
    pub fold_auprc: Vec<f64>,
    pub mean_auroc: f64,
    pub mean_auprc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport<C> {
    pub rows: Vec<CvRow<C>>,
    pub chosen_index: usize,
    pub chosen: C,
    pub holdout_auroc: f64,
    pub holdout_auprc: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Shared outer split + stratified CV. `fit` trains on rows and returns
/// scores for the evaluation rows.
fn cross_validate<C, F>(x: &[Vec<f64>], y: &[u8], grid: &[C], k: usize, seed: u64, fit: F) -> Result<(CvReport<C>, Vec<usize>, Vec<usize>)>
where
    C: Clone + Send + Sync,
    F: Fn(&C, usize, u64, &[Vec<f64>], &[u8], &[Vec<f64>]) -> Result<Vec<f64>> + Sync,
{
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    check_xy(x, y)?;
    let (train, test) = stratified_holdout(y, 0.2, rng::derive_seed(seed, &[0xA0]))?;
    let y_train = select_y(y, &train);
    let folds = stratified_kfold(&y_train, k, rng::derive_seed(seed, &[0xF0]))?;
    let rows: Vec<CvRow<C>> = grid
        .par_iter()
        .enumerate()
        .map(|(ci, cfg)| {
            let mut aurocs = Vec::with_capacity(k);
            let mut auprcs = Vec::with_capacity(k);
            for fold in 0..k {
                let fit_local: Vec<usize> = (0..train.len()).filter(|&i| folds[i] != fold).collect();
                let eval_local: Vec<usize> = (0..train.len()).filter(|&i| folds[i] == fold).collect();
                let fit_rows: Vec<usize> = fit_local.iter().map(|&i| train[i]).collect();
                let fit_rows = undersample_majority(&fit_rows, y, rng::derive_seed(seed, &[ci as u64, fold as u64, 1]))?;
                let eval_rows: Vec<usize> = eval_local.iter().map(|&i| train[i]).collect();
                let stream = rng::derive_seed(seed, &[ci as u64, fold as u64, 2]);
                let scores = fit(cfg, ci, stream, &select(x, &fit_rows), &select_y(y, &fit_rows), &select(x, &eval_rows))?;
                let ye = select_y(y, &eval_rows);
                aurocs.push(auroc(&scores, &ye)?);
                auprcs.push(auprc(&scores, &ye)?);
            }
            Ok(CvRow {
                config: cfg.clone(),
                mean_auroc: aurocs.iter().sum::<f64>() / k as f64,
                mean_auprc: auprcs.iter().sum::<f64>() / k as f64,
                fold_auroc: aurocs,
                fold_auprc: auprcs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen_index = (0..rows.len())
        .max_by(|&a, &b| {
            rows[a]
                .mean_auroc
                .total_cmp(&rows[b].mean_auroc)
                .then(rows[a].mean_auprc.total_cmp(&rows[b].mean_auprc))
                .then(b.cmp(&a))
        })
        .expect("nonempty grid");
    let chosen = rows[chosen_index].config.clone();
    let report = CvReport {
        rows,
        chosen_index,
        chosen,
        holdout_auroc: f64::NAN,
        holdout_auprc: f64::NAN,
        train_rows: train.len(),
        test_rows: test.len(),
    };
    Ok((report, train, test))
}

/// Outcome of a GBT grid search: the report and the refitted chosen model.
#[derive(Debug, Clone)]
pub struct GbtSearch {
    pub report: CvReport<GbtConfig>,
    pub model: TreeEnsemble,
}

/// 80/20 stratified holdout, stratified k-fold CV on the 80% with
/// undersampled training folds, selection by mean AUROC (AUPRC breaks
/// ties), refit on the undersampled 80% and holdout evaluation.
pub fn grid_search(x: &[Vec<f64>], y: &[u8], grid: &[GbtConfig], k: usize, seed: u64) -> Result<GbtSearch> {
    let fit = |cfg: &GbtConfig, _ci: usize, stream: u64, xf: &[Vec<f64>], yf: &[u8], xe: &[Vec<f64>]| {
        let cfg = GbtConfig { seed: stream, ..cfg.clone() };
        train_gbt(xf, yf, &cfg)?.predict_proba(xe)
    };
    let (mut report, train, test) = cross_validate(x, y, grid, k, seed, fit)?;
    let refit_rows = undersample_majority(&train, y, rng::derive_seed(seed, &[0xB0]))?;
    let cfg = GbtConfig { seed: rng::derive_seed(seed, &[0xB1]), ..report.chosen.clone() };
    let model = train_gbt(&select(x, &refit_rows), &select_y(y, &refit_rows), &cfg)?;
    let scores = model.predict_proba(&select(x, &test))?;
    let yt = select_y(y, &test);
    report.holdout_auroc = auroc(&scores, &yt)?;
    report.holdout_auprc = auprc(&scores, &yt)?;
    Ok(GbtSearch { report, model })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

pub const LOGIT_C_GRID: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitConfig {
    pub penalty: Penalty,
    pub c: f64,
}

impl LogitConfig {
    pub fn full_grid() -> Vec<LogitConfig> {
        [Penalty::L1, Penalty::L2]
            .into_iter()
            .flat_map(|penalty| LOGIT_C_GRID.into_iter().map(move |c| LogitConfig { penalty, c }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub penalty: Penalty,
    pub c: f64,
    /// Coefficients on the standardized scale.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub train_auroc: f64,
    pub train_auprc: f64,
}

/// Column means and standard deviations over non-missing entries.
fn standardizer(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let p = x[0].len();
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 0..p {
        let col: Vec<f64> = x.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
        if col.is_empty() {
            continue;
        }
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
        means[j] = m;
        scales[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (means, scales)
}

/// Missing entries map to the column mean, i.e. 0 after scaling.
fn standardize(x: &[Vec<f64>], means: &[f64], scales: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| r.iter().zip(means.iter().zip(scales)).map(|(v, (m, s))| if v.is_nan() { 0.0 } else { (v - m) / s }).collect())
        .collect()
}

/// Smooth part of the logit objective and its gradient with respect to
/// `params = [w.., intercept]`: mean logistic loss plus `ridge/2 ‖w‖²`.
pub fn logit_loss_grad(x: &[Vec<f64>], y: &[u8], params: &[f64], ridge: f64) -> (f64, Vec<f64>) {
    let p = params.len() - 1;
    let n = y.len() as f64;
    let mut grad = vec![0.0; p + 1];
    let mut loss = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let z = params[p] + row.iter().zip(params).map(|(a, b)| a * b).sum::<f64>();
        loss += softplus(z) - f64::from(t) * z;
        let r = sigmoid(z) - f64::from(t);
        for j in 0..p {
            grad[j] += r * row[j];
        }
        grad[p] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for j in 0..p {
        loss += 0.5 * ridge * params[j] * params[j];
        grad[j] += ridge * params[j];
    }
    (loss, grad)
}

const LOGIT_MAX_ITER: usize = 10_000;
const LOGIT_TOL: f64 = 1e-8;

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Penalized logistic regression on internally standardized features:
/// minimizes mean logistic loss + (1/C)·penalty (L2 = ½‖w‖², L1 = ‖w‖₁).
pub fn train_logit(x: &[Vec<f64>], y: &[u8], penalty: Penalty, c: f64) -> Result<LogitModel> {
    let p = check_xy(x, y)?;
    if !(c > 0.0) {
        return Err(Error::invalid("C must be positive"));
    }
    let (means, scales) = standardizer(x);
    let xs = standardize(x, &means, &scales);
    let inv_c = 1.0 / c;
    let (ridge, l1) = match penalty {
        Penalty::L2 => (inv_c, 0.0),
        Penalty::L1 => (0.0, inv_c),
    };
    let objective = |params: &[f64]| {
        let (f, g) = logit_loss_grad(&xs, y, params, ridge);
        (f + l1 * params[..p].iter().map(|w| w.abs()).sum::<f64>(), f, g)
    };
    let mut params = vec![0.0; p + 1];
    let (mut total, mut smooth, mut grad) = objective(&params);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LOGIT_MAX_ITER {
        iterations += 1;
        // Backtracking on the (proximal) gradient step.
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = (0..=p)
                .map(|j| {
                    let v = params[j] - step * grad[j];
                    if j < p && l1 > 0.0 {
                        soft_threshold(v, step * l1)
                    } else {
                        v
                    }
                })
                .collect();
            let (t2, s2, g2) = objective(&cand);
            let diff: Vec<f64> = cand.iter().zip(&params).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            if s2 <= smooth + lin + quad + 1e-15 {
                accepted = Some((cand, t2, s2, g2));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, t2, s2, g2)) = accepted else { break };
        let change = (total - t2).abs();
        params = cand;
        total = t2;
        smooth = s2;
        grad = g2;
        step *= 2.0;
        if change < LOGIT_TOL {
            converged = true;
            break;
        }
    }
    // Optimality residual: prox-gradient mapping norm.
    let grad_norm = (0..=p)
        .map(|j| {
            let v = if j < p && l1 > 0.0 {
                params[j] - soft_threshold(params[j] - grad[j], l1)
            } else {
                grad[j]
            };
            v * v
        })
        .sum::<f64>()
        .sqrt();
    if !converged {
        warn!("logistic regression did not converge in {iterations} iterations (gradient norm {grad_norm:.3e})");
    }
    let mut model = LogitModel {
        penalty,
        c,
        weights: params[..p].to_vec(),
        intercept: params[p],
        means,
        scales,
        iterations,
        converged,
        grad_norm,
        train_auroc: f64::NAN,
        train_auprc: f64::NAN,
    };
    let scores = model.predict_proba(x)?;
    model.train_auroc = auroc(&scores, y)?;
    model.train_auprc = auprc(&scores, y)?;
    Ok(model)
}

impl LogitModel {
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if x.iter().any(|r| r.len() != self.weights.len()) {
            return Err(Error::invalid("feature count mismatch"));
        }
        let xs = standardize(x, &self.means, &self.scales);
        Ok(xs
            .iter()
            .map(|r| sigmoid(self.intercept + r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()))
            .collect())
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| w.abs() > 1e-10).count()
    }
}

#[derive(Debug, Clone)]
pub struct LogitSearch {
    pub report: CvReport<LogitConfig>,
    pub model: LogitModel,
}

/// Same protocol as [`grid_search`] for the logistic baseline.
pub fn logit_grid_search(x: &[Vec<f64>], y: &[u8], grid: &[LogitConfig], k: usize, seed: u64) -> Result<LogitSearch> {
    let fit = |cfg: &LogitConfig, _ci: usize, _stream: u64, xf: &[Vec<f64>], yf: &[u8], xe: &[Vec<f64>]| {
        train_logit(xf, yf, cfg.penalty, cfg.c)?.predict_proba(xe)
    };
    let (mut report, train, test) = cross_validate(x, y, grid, k, seed, fit)?;
    let refit_rows = undersample_majority(&train, y, rng::derive_seed(seed, &[0xB0]))?;
    let model = train_logit(&select(x, &refit_rows), &select_y(y, &refit_rows), report.chosen.penalty, report.chosen.c)?;
    let scores = model.predict_proba(&select(x, &test))?;
    let yt = select_y(y, &test);
    report.holdout_auroc = auroc(&scores, &yt)?;
    report.holdout_auprc = auprc(&scores, &yt)?;
    Ok(LogitSearch { report, model })
}
