//! Exact path-dependent TreeSHAP for [`TreeEnsemble`] models, Shapley
//! interaction values, global mean-|SHAP| rankings and local profiles.
//!
//! Attributions are on the margin (log-odds) scale, where local accuracy is
//! exact: `phi0 + Σ phi = margin(x)`. The conditional expectation of a tree
//! given a feature subset follows the training covers stored in each node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{TreeEnsemble, TreeNode};
use crate::error::{Error, Result};

pub const MAX_INTERACTION_FEATURES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapVector {
    pub phi: Vec<f64>,
    /// Cover-weighted expected margin.
    pub phi0: f64,
}

impl ShapVector {
    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    /// Symmetric; the diagonal holds main effects.
    pub values: Vec<Vec<f64>>,
}

impl InteractionMatrix {
    pub fn main_effects(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.values[i][i]).collect()
    }
}

const NO_FEATURE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

const EMPTY: PathElement = PathElement { feature: NO_FEATURE, zero_fraction: 0.0, one_fraction: 0.0, pweight: 0.0 };

fn extend_path(path: &mut Vec<PathElement>, depth: usize, zero_fraction: f64, one_fraction: f64, feature: usize) {
    if path.len() <= depth {
        path.resize(depth + 1, EMPTY);
    }
    path[depth] = PathElement { feature, zero_fraction, one_fraction, pweight: if depth == 0 { 1.0 } else { 0.0 } };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / d1;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * d1 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].pweight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

/// Conditioning for interaction values: feature `feature` forced present
/// (`On`) or absent (`Off`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Condition {
    None,
    On(usize),
    Off(usize),
}

impl Condition {
    fn feature(self) -> Option<usize> {
        match self {
            Condition::None => None,
            Condition::On(f) | Condition::Off(f) => Some(f),
        }
    }
}

struct Walker<'a> {
    x: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
    condition: Condition,
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: &TreeNode,
        mut path: Vec<PathElement>,
        mut depth: usize,
        parent_zero: f64,
        parent_one: f64,
        parent_feature: usize,
        condition_fraction: f64,
    ) {
        if condition_fraction == 0.0 {
            return;
        }
        if self.condition.feature() != Some(parent_feature) {
            extend_path(&mut path, depth, parent_zero, parent_one, parent_feature);
        }
        match node {
            TreeNode::Leaf { weight, .. } => {
                for i in 1..=depth {
                    let w = unwound_path_sum(&path, depth, i);
                    let el = path[i];
                    self.phi[el.feature] +=
                        w * (el.one_fraction - el.zero_fraction) * weight * condition_fraction * self.scale;
                }
            }
            TreeNode::Split { feature, threshold, default_left, cover, left, right, .. } => {
                let split = *feature;
                let (hot, cold) = if TreeNode::goes_left(self.x[split], *threshold, *default_left) {
                    (left.as_ref(), right.as_ref())
                } else {
                    (right.as_ref(), left.as_ref())
                };
                let hot_zero = if *cover > 0.0 { hot.cover() / cover } else { 0.0 };
                let cold_zero = if *cover > 0.0 { cold.cover() / cover } else { 0.0 };
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = (1..=depth).find(|&k| path[k].feature == split) {
                    in_zero = path[k].zero_fraction;
                    in_one = path[k].one_fraction;
                    unwind_path(&mut path, depth, k);
                    depth -= 1;
                }
                let (mut hot_cf, mut cold_cf) = (condition_fraction, condition_fraction);
                match self.condition {
                    Condition::On(f) if f == split => {
                        cold_cf = 0.0;
                        depth = depth.wrapping_sub(1);
                    }
                    Condition::Off(f) if f == split => {
                        hot_cf *= hot_zero;
                        cold_cf *= cold_zero;
                        depth = depth.wrapping_sub(1);
                    }
                    _ => {}
                }
                let child_depth = depth.wrapping_add(1);
                let keep = (child_depth + 1).min(path.len());
                self.recurse(hot, path[..keep].to_vec(), child_depth, hot_zero * in_zero, in_one, split, hot_cf);
                self.recurse(cold, path[..keep].to_vec(), child_depth, cold_zero * in_zero, 0.0, split, cold_cf);
            }
        }
    }
}

fn tree_shap(tree: &TreeNode, x: &[f64], phi: &mut [f64], scale: f64, condition: Condition) {
    let mut w = Walker { x, phi, scale, condition };
    w.recurse(tree, Vec::with_capacity(16), 0, 1.0, 1.0, NO_FEATURE, 1.0);
}

/// Cover-weighted mean leaf value of one tree.
pub fn expected_value(tree: &TreeNode) -> f64 {
    fn walk(node: &TreeNode, root_cover: f64) -> f64 {
        match node {
            TreeNode::Leaf { weight, cover } => weight * cover / root_cover,
            TreeNode::Split { left, right, .. } => walk(left, root_cover) + walk(right, root_cover),
        }
    }
    let root = tree.cover();
    if root > 0.0 {
        walk(tree, root)
    } else {
        0.0
    }
}

fn check(model: &TreeEnsemble, x: &[f64]) -> Result<()> {
    if x.len() != model.feature_count {
        return Err(Error::invalid(format!("row has {} features, model expects {}", x.len(), model.feature_count)));
    }
    Ok(())
}

pub fn expected_margin(model: &TreeEnsemble) -> f64 {
    model.base_score + model.learning_rate * model.trees.iter().map(expected_value).sum::<f64>()
}

/// Exact SHAP values of one row on the margin scale.
pub fn shap_values(model: &TreeEnsemble, x: &[f64]) -> Result<ShapVector> {
    check(model, x)?;
    let mut phi = vec![0.0; model.feature_count];
    for tree in &model.trees {
        tree_shap(tree, x, &mut phi, model.learning_rate, Condition::None);
    }
    Ok(ShapVector { phi, phi0: expected_margin(model) })
}

/// SHAP values for many rows, in parallel.
pub fn shap_matrix(model: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<Vec<ShapVector>> {
    rows.par_iter().map(|r| shap_values(model, r)).collect()
}

/// Shapley interaction values. Off-diagonals are half the difference of
/// SHAP values computed with the partner feature present and absent,
/// symmetrized; the diagonal is `phi_i − Σ_{j≠i} Φ_ij`.
pub fn shap_interactions(model: &TreeEnsemble, x: &[f64]) -> Result<InteractionMatrix> {
    check(model, x)?;
    let m = model.feature_count;
    if m > MAX_INTERACTION_FEATURES {
        return Err(Error::invalid(format!(
            "{m} features exceeds the interaction limit of {MAX_INTERACTION_FEATURES}; use SHAP values only"
        )));
    }
    let phi = shap_values(model, x)?.phi;
    let mut used = vec![false; m];
    for tree in &model.trees {
        let mut fs = Vec::new();
        tree.split_features(&mut fs);
        fs.into_iter().for_each(|f| used[f] = true);
    }
    let mut raw = vec![vec![0.0; m]; m];
    for j in (0..m).filter(|&j| used[j]) {
        let mut on = vec![0.0; m];
        let mut off = vec![0.0; m];
        for tree in &model.trees {
            tree_shap(tree, x, &mut on, model.learning_rate, Condition::On(j));
            tree_shap(tree, x, &mut off, model.learning_rate, Condition::Off(j));
        }
        for k in 0..m {
            if k != j {
                raw[j][k] = (on[k] - off[k]) / 2.0;
            }
        }
    }
    let mut values = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                values[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
            }
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| values[i][j]).sum();
        values[i][i] = phi[i] - off;
    }
    Ok(InteractionMatrix { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub feature: usize,
    pub name: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRanking {
    /// All features, descending by mean |SHAP|; ties by feature index.
    pub features: Vec<RankedFeature>,
    pub rows: usize,
}

impl GlobalRanking {
    pub fn top(&self, k: usize) -> &[RankedFeature] {
        &self.features[..k.min(self.features.len())]
    }

    pub fn to_csv(&self, k: usize) -> String {
        let mut out = String::from("rank,feature_index,feature,mean_abs_shap\n");
        for f in self.top(k) {
            out.push_str(&format!("{},{},{},{}\n", f.rank, f.feature, f.name, f.mean_abs_shap));
        }
        out
    }
}

fn feature_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("f{j}"))
}

/// Mean absolute SHAP value per feature over `rows`.
pub fn global_ranking(model: &TreeEnsemble, rows: &[Vec<f64>], names: &[String]) -> Result<GlobalRanking> {
    if rows.is_empty() {
        return Err(Error::invalid("ranking needs at least one row"));
    }
    let shap = shap_matrix(model, rows)?;
    Ok(ranking_from(&shap, names))
}

/// Ranking from precomputed SHAP vectors.
pub fn ranking_from(shap: &[ShapVector], names: &[String]) -> GlobalRanking {
    let m = shap.first().map_or(0, |s| s.phi.len());
    let n = shap.len() as f64;
    let mut means: Vec<(usize, f64)> =
        (0..m).map(|j| (j, shap.iter().map(|s| s.phi[j].abs()).sum::<f64>() / n)).collect();
    means.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    GlobalRanking {
        features: means
            .into_iter()
            .enumerate()
            .map(|(r, (j, v))| RankedFeature { rank: r + 1, feature: j, name: feature_name(names, j), mean_abs_shap: v })
            .collect(),
        rows: shap.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub feature: usize,
    pub name: String,
    pub phi: f64,
    /// Raw covariate value (`null` when missing).
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalProfile {
    pub dmu_id: String,
    pub row: usize,
    /// Σ phi on the margin scale.
    pub total_contribution: f64,
    pub phi0: f64,
    /// Top-k features by |phi|, descending.
    pub top: Vec<ProfileEntry>,
}

pub const DEFAULT_PROFILE_K: usize = 12;

/// Tie rule for [`extreme_profiles`]: the maximum takes the earliest row
/// among equal totals, the minimum the latest.
pub const PROFILE_TIE_RULE: &str = "max: earliest row among ties; min: latest row among ties";

fn profile(shap: &ShapVector, row: usize, x: &[f64], id: &str, names: &[String], k: usize) -> LocalProfile {
    let mut order: Vec<usize> = (0..shap.phi.len()).collect();
    order.sort_by(|&a, &b| shap.phi[b].abs().total_cmp(&shap.phi[a].abs()).then(a.cmp(&b)));
    LocalProfile {
        dmu_id: id.to_string(),
        row,
        total_contribution: shap.total(),
        phi0: shap.phi0,
        top: order
            .into_iter()
            .take(k)
            .map(|j| ProfileEntry {
                feature: j,
                name: feature_name(names, j),
                phi: shap.phi[j],
                value: if x[j].is_nan() { None } else { Some(x[j]) },
            })
            .collect(),
    }
}

/// Profiles of the rows with the largest and smallest total contribution.
pub fn extreme_profiles(
    model: &TreeEnsemble,
    rows: &[Vec<f64>],
    ids: &[String],
    names: &[String],
    k: usize,
) -> Result<(LocalProfile, LocalProfile)> {
    if rows.len() < 2 {
        return Err(Error::invalid("extreme profiles need at least two rows"));
    }
    if ids.len() != rows.len() {
        return Err(Error::invalid("one id per row required"));
    }
    let shap = shap_matrix(model, rows)?;
    extreme_profiles_from(&shap, rows, ids, names, k)
}

pub fn extreme_profiles_from(
    shap: &[ShapVector],
    rows: &[Vec<f64>],
    ids: &[String],
    names: &[String],
    k: usize,
) -> Result<(LocalProfile, LocalProfile)> {
    if shap.len() < 2 {
        return Err(Error::invalid("extreme profiles need at least two rows"));
    }
    let totals: Vec<f64> = shap.iter().map(ShapVector::total).collect();
    let mut imax = 0;
    let mut imin = 0;
    for i in 1..totals.len() {
        if totals[i] > totals[imax] {
            imax = i;
        }
        if totals[i] <= totals[imin] {
            imin = i;
        }
    }
    Ok((
        profile(&shap[imax], imax, &rows[imax], &ids[imax], names, k),
        profile(&shap[imin], imin, &rows[imin], &ids[imin], names, k),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(weight: f64, cover: f64) -> Box<TreeNode> {
        Box::new(TreeNode::Leaf { weight, cover })
    }

    fn stump(feature: usize, threshold: f64, a: f64, nl: f64, b: f64, nr: f64) -> TreeNode {
        TreeNode::Split {
            feature,
            threshold,
            default_left: true,
            cover: nl + nr,
            gain: 1.0,
            left: leaf(a, nl),
            right: leaf(b, nr),
        }
    }

    #[test]
    fn single_leaf_tree() {
        let m = TreeEnsemble {
            trees: vec![TreeNode::Leaf { weight: 0.7, cover: 10.0 }],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_count: 3,
        };
        let s = shap_values(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.phi, vec![0.0; 3]);
        assert_eq!(s.phi0, 0.7);
    }

    #[test]
    fn depth_one_closed_form() {
        let (a, nl, b, nr) = (2.0, 3.0, -1.0, 7.0);
        let m = TreeEnsemble {
            trees: vec![stump(1, 0.5, a, nl, b, nr)],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_count: 3,
        };
        let s = shap_values(&m, &[9.0, 0.0, 9.0]).unwrap();
        let expected = a - (nl * a + nr * b) / (nl + nr);
        assert!((s.phi[1] - expected).abs() < 1e-15);
        assert_eq!((s.phi[0], s.phi[2]), (0.0, 0.0));
    }

    #[test]
    fn interaction_guard() {
        let m = TreeEnsemble { trees: vec![], base_score: 0.0, learning_rate: 1.0, feature_count: 65 };
        assert!(shap_interactions(&m, &vec![0.0; 65]).is_err());
        assert!(shap_values(&m, &[0.0]).is_err());
    }

    #[test]
    fn identical_rows_tie_rule() {
        let m = TreeEnsemble {
            trees: vec![stump(0, 0.5, 1.0, 1.0, -1.0, 1.0)],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_count: 1,
        };
        let rows = vec![vec![0.0], vec![0.0]];
        let ids = vec!["a".to_string(), "b".to_string()];
        let (max, min) = extreme_profiles(&m, &rows, &ids, &[], 12).unwrap();
        assert_eq!(max.total_contribution, min.total_contribution);
        assert_eq!((max.dmu_id.as_str(), min.dmu_id.as_str()), ("a", "b"));
    }
}
