//! Order-α partial frontiers (output orientation), super-efficiency share
//! curves, discontinuity-based outlier detection and the trim-and-rerun
//! robustness comparison.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dea::{self, BootstrapConfig};
use crate::error::{Error, Result};
use crate::stats;
use crate::tabular::{DmuPanel, DmuRecord, FrontierSpec};

/// Scores below this are strictly super-efficient.
pub const SUPER_THRESHOLD: f64 = 1.0 - 1e-9;

/// Output ratios `min_r y_jr / y0_r` over the input-dominating set of `x0`,
/// sorted ascending. The set always contains the unit itself when `(x0, y0)`
/// is a panel row.
fn dominating_ratios(x0: &[f64], y0: &[f64], xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Vec<f64> {
    let mut u: Vec<f64> = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| x.iter().zip(x0).all(|(a, b)| a <= b))
        .map(|(_, y)| y.iter().zip(y0).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min))
        .collect();
    u.sort_by(f64::total_cmp);
    u
}

/// Ceiling-rank empirical quantile, `U[⌈(α/100)·n⌉]` (1-based).
fn ceiling_rank(u: &[f64], alpha: f64) -> f64 {
    let n = u.len();
    let k = (alpha * n as f64 / 100.0).ceil() as usize;
    u[k.clamp(1, n) - 1]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 100.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 100], got {alpha}")))
    }
}

fn unit_rows(dmu: &DmuRecord, panel: &DmuPanel) -> Result<()> {
    if panel.n() == 0 {
        return Err(Error::invalid("empty panel"));
    }
    if dmu.inputs.len() != panel.m() || dmu.outputs.len() != panel.s() {
        return Err(Error::invalid("record dimensions do not match the panel"));
    }
    Ok(())
}

fn columns(panel: &DmuPanel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        panel.records.iter().map(|r| r.inputs.clone()).collect(),
        panel.records.iter().map(|r| r.outputs.clone()).collect(),
    )
}

/// FDH Farrell output score, `max_j min_r y_jr / y0_r` over units using no
/// more of any input.
pub fn fdh_output_score(dmu: &DmuRecord, panel: &DmuPanel) -> Result<f64> {
    order_alpha_score(dmu, panel, 100.0)
}

/// Order-α output score. Below 1 means the unit lies above the order-α frontier.
pub fn order_alpha_score(dmu: &DmuRecord, panel: &DmuPanel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    unit_rows(dmu, panel)?;
    let (xs, ys) = columns(panel);
    let mut u = dominating_ratios(&dmu.inputs, &dmu.outputs, &xs, &ys);
    if u.is_empty() {
        // Not a panel member and dominated by nobody: it defines its own frontier.
        u.push(1.0);
    }
    Ok(ceiling_rank(&u, alpha))
}

/// Order-α scores of every panel member at every α of `grid`;
/// `result[g][i]` is unit `i` at `grid[g]`.
pub fn order_alpha_matrix(panel: &DmuPanel, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    for &a in grid {
        check_alpha(a)?;
    }
    let (xs, ys) = columns(panel);
    let ratios: Vec<Vec<f64>> =
        (0..panel.n()).into_par_iter().map(|o| dominating_ratios(&xs[o], &ys[o], &xs, &ys)).collect();
    Ok(grid.iter().map(|&a| ratios.iter().map(|u| ceiling_rank(u, a)).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurve {
    /// Descending α grid.
    pub alpha_grid: Vec<f64>,
    pub share: Vec<f64>,
    /// Super-efficient unit count at each α.
    pub count: Vec<usize>,
    pub chosen_alpha: f64,
    /// Share increase across the selected discontinuity.
    pub jump_size: f64,
    /// Indices of the units super-efficient at `chosen_alpha`.
    pub flagged: Vec<usize>,
}

impl AlphaCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,share,count\n");
        for ((a, s), c) in self.alpha_grid.iter().zip(&self.share).zip(&self.count) {
            out.push_str(&format!("{a},{s},{c}\n"));
        }
        out
    }
}

/// α from 100 down to 50 in steps of 0.5.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=100).map(|i| 100.0 - 0.5 * i as f64).collect()
}

/// Share of super-efficient units along a descending α grid, and the
/// largest single-step jump. `chosen_alpha` is the grid point just above
/// that jump; ties go to the higher α.
pub fn super_share_curve(panel: &DmuPanel, alpha_grid: &[f64]) -> Result<AlphaCurve> {
    if alpha_grid.len() < 10 {
        return Err(Error::invalid("alpha grid needs at least 10 points"));
    }
    if alpha_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("alpha grid must be strictly descending"));
    }
    let scores = order_alpha_matrix(panel, alpha_grid)?;
    let count: Vec<usize> = scores.iter().map(|row| row.iter().filter(|&&s| s < SUPER_THRESHOLD).count()).collect();
    let n = panel.n() as f64;
    let share: Vec<f64> = count.iter().map(|&c| c as f64 / n).collect();

    let mut best = 0usize;
    let mut best_jump = 0usize;
    for k in 0..count.len() - 1 {
        let jump = count[k + 1].saturating_sub(count[k]);
        if jump > best_jump {
            best_jump = jump;
            best = k;
        }
    }
    if best_jump == 0 {
        warn!("flat super-efficiency curve; no discontinuity detected");
    }
    let flagged = scores[best].iter().enumerate().filter(|(_, &s)| s < SUPER_THRESHOLD).map(|(i, _)| i).collect();
    Ok(AlphaCurve {
        alpha_grid: alpha_grid.to_vec(),
        share,
        count,
        chosen_alpha: alpha_grid[best],
        jump_size: best_jump as f64 / n,
        flagged,
    })
}

/// Indices of units super-efficient at `alpha`.
pub fn super_efficient_at(panel: &DmuPanel, alpha: f64) -> Result<Vec<usize>> {
    let scores = order_alpha_matrix(panel, &[alpha])?;
    Ok(scores[0].iter().enumerate().filter(|(_, &s)| s < SUPER_THRESHOLD).map(|(i, _)| i).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimRow {
    pub stratum: String,
    pub full_mean_tebc: f64,
    pub trimmed_mean_tebc: f64,
    /// `(trimmed − full) / full × 100`.
    pub difference_pct: f64,
    /// Units removed, reported as a nonpositive change in N.
    pub delta_n: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimComparison {
    pub chosen_alpha: f64,
    pub removed_ids: Vec<String>,
    pub rows: Vec<TrimRow>,
}

impl TrimComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,chosen_alpha,full_mean_tebc,trimmed_mean_tebc,difference_pct,delta_n\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.stratum, self.chosen_alpha, r.full_mean_tebc, r.trimmed_mean_tebc, r.difference_pct, r.delta_n
            ));
        }
        out
    }
}

/// Removes units super-efficient at `chosen_alpha` (order-α on the frontier
/// columns of `spec`), reruns the bootstrap and compares mean bias-corrected
/// efficiency. `stratum` labels the output row.
pub fn trim_and_rerun(
    panel: &DmuPanel,
    spec: &FrontierSpec,
    chosen_alpha: f64,
    boot: &BootstrapConfig,
    stratum: &str,
) -> Result<TrimComparison> {
    spec.validate(panel)?;
    let full = dea::smoothed_bootstrap(panel, spec, boot)?;
    let mut cmp = trim_compare(panel, spec, &full.estimates, chosen_alpha, boot, None)?;
    cmp.rows[0].stratum = stratum.into();
    Ok(cmp)
}

pub const WHOLE_SAMPLE: &str = "Whole sample";

/// Trim-and-rerun against precomputed full-sample estimates. The first row
/// covers the whole sample; with `strata` (one label per unit) a row per
/// distinct label follows, in sorted order.
pub fn trim_compare(
    panel: &DmuPanel,
    spec: &FrontierSpec,
    full: &[dea::EfficiencyEstimate],
    chosen_alpha: f64,
    boot: &BootstrapConfig,
    strata: Option<&[String]>,
) -> Result<TrimComparison> {
    spec.validate(panel)?;
    if full.len() != panel.n() {
        return Err(Error::invalid("one full-sample estimate per unit required"));
    }
    if strata.is_some_and(|s| s.len() != panel.n()) {
        return Err(Error::invalid("one stratum label per unit required"));
    }
    let projected = project(panel, spec)?;
    let removed = super_efficient_at(&projected, chosen_alpha)?;
    let trimmed_tebc: Vec<Option<f64>> = if removed.is_empty() {
        full.iter().map(|e| Some(e.tebc)).collect()
    } else {
        let min_n = spec.input_columns.len() + spec.output_columns.len();
        let remaining = panel.n() - removed.len();
        if remaining < min_n {
            return Err(Error::invalid(format!(
                "trimming {} of {} units leaves {remaining}, fewer than inputs + outputs = {min_n}",
                removed.len(),
                panel.n()
            )));
        }
        let trimmed = panel.filter(|i, _| removed.binary_search(&i).is_err())?;
        let mut rerun = dea::smoothed_bootstrap(&trimmed, spec, boot)?.estimates.into_iter();
        (0..panel.n())
            .map(|i| if removed.binary_search(&i).is_ok() { None } else { rerun.next().map(|e| e.tebc) })
            .collect()
    };
    let row = |label: &str, members: &[usize]| {
        let before: Vec<f64> = members.iter().map(|&i| full[i].tebc).collect();
        let after: Vec<f64> = members.iter().filter_map(|&i| trimmed_tebc[i]).collect();
        let (f, t) = (stats::mean(&before), stats::mean(&after));
        TrimRow {
            stratum: label.into(),
            full_mean_tebc: f,
            trimmed_mean_tebc: t,
            difference_pct: (t - f) / f * 100.0,
            delta_n: after.len() as i64 - before.len() as i64,
        }
    };
    let mut rows = vec![row(WHOLE_SAMPLE, &(0..panel.n()).collect::<Vec<_>>())];
    if let Some(labels) = strata {
        let mut distinct: Vec<&String> = labels.iter().collect();
        distinct.sort();
        distinct.dedup();
        for d in distinct {
            let members: Vec<usize> = (0..panel.n()).filter(|&i| &labels[i] == d).collect();
            rows.push(row(d, &members));
        }
    }
    Ok(TrimComparison {
        chosen_alpha,
        removed_ids: removed.iter().map(|&i| panel.records[i].id.clone()).collect(),
        rows,
    })
}

/// Panel restricted to the frontier columns of `spec`.
pub fn project(panel: &DmuPanel, spec: &FrontierSpec) -> Result<DmuPanel> {
    spec.validate(panel)?;
    let records = panel
        .records
        .iter()
        .map(|r| DmuRecord {
            id: r.id.clone(),
            group: r.group.clone(),
            inputs: spec.input_columns.iter().map(|&c| r.inputs[c]).collect(),
            outputs: spec.output_columns.iter().map(|&c| r.outputs[c]).collect(),
            covariates: r.covariates.clone(),
        })
        .collect();
    DmuPanel::new(
        records,
        spec.input_columns.iter().map(|&c| panel.input_names[c].clone()).collect(),
        spec.output_columns.iter().map(|&c| panel.output_names[c].clone()).collect(),
        panel.covariate_names.clone(),
    )
}
