//! Output-oriented radial DEA under CRS/VRS, the smoothed homogeneous
//! bootstrap for bias correction and confidence intervals, and the
//! CRS-vs-VRS returns-to-scale test.
//!
//! Internally every score is the Farrell output-expansion factor θ ≥ 1;
//! user-facing scores are the inverted 1/θ ∈ (0, 1].

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linprog::{self, LinearProgram, LpStatus, Relation, Sense};
use crate::rng;
use crate::stats;
use crate::tabular::{DmuPanel, FrontierSpec, Rts};

/// A DMU counts as efficient when `|θ - 1|` is below this.
pub const EFFICIENT_TOL: f64 = 1e-6;
pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub dmu_id: String,
    pub te_farrell: f64,
    pub te: f64,
    pub tebc: f64,
    /// Bias on the inverted scale, `te - tebc`.
    pub bias: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reference_weights: BTreeMap<String, f64>,
}

impl EfficiencyEstimate {
    pub fn is_efficient(&self) -> bool {
        (self.te_farrell - 1.0).abs() < EFFICIENT_TOL
    }
}

/// Solution of one envelopment program.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub theta: f64,
    pub weights: Vec<f64>,
}

/// Envelopment program for the point `(x0, y0)` against the reference rows:
/// maximize θ s.t. Σ z_i y_ir ≥ θ y0_r, Σ z_i x_im ≤ x0_m, z ≥ 0, and Σ z = 1
/// under VRS. Variables are `[z_1..z_n, θ]`.
pub fn envelopment_program(ref_x: &[Vec<f64>], ref_y: &[Vec<f64>], x0: &[f64], y0: &[f64], rts: Rts) -> LinearProgram {
    let n = ref_x.len();
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for (r, &y0r) in y0.iter().enumerate() {
        let mut row: Vec<f64> = ref_y.iter().map(|y| y[r]).collect();
        row.push(-y0r);
        lp.add(row, Relation::Ge, 0.0);
    }
    for (k, &x0k) in x0.iter().enumerate() {
        let mut row: Vec<f64> = ref_x.iter().map(|x| x[k]).collect();
        row.push(0.0);
        lp.add(row, Relation::Le, x0k);
    }
    if rts == Rts::Vrs {
        let mut row = vec![1.0; n];
        row.push(0.0);
        lp.add(row, Relation::Eq, 1.0);
    }
    lp
}

/// Farrell output score of `(x0, y0)` relative to the reference technology.
pub fn farrell_score(ref_x: &[Vec<f64>], ref_y: &[Vec<f64>], x0: &[f64], y0: &[f64], rts: Rts) -> Result<RadialSolution> {
    let lp = envelopment_program(ref_x, ref_y, x0, y0, rts);
    let sol = linprog::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let n = ref_x.len();
            Ok(RadialSolution { theta: sol.primal[n], weights: sol.primal[..n].to_vec() })
        }
        LpStatus::Infeasible => Err(Error::numeric("envelopment program infeasible")),
        LpStatus::Unbounded => Err(Error::numeric("envelopment program unbounded")),
    }
}

fn check_panel(panel: &DmuPanel, spec: &FrontierSpec) -> Result<()> {
    spec.validate(panel)?;
    let (m, s) = (spec.input_columns.len(), spec.output_columns.len());
    if panel.n() < m + s {
        warn!("only {} DMUs for {} inputs and {} outputs; DEA discrimination will be poor", panel.n(), m, s);
    }
    Ok(())
}

/// Farrell scores of every DMU against its own panel (θ clamped at 1 from below).
fn farrell_all(xs: &[Vec<f64>], ys: &[Vec<f64>], rts: Rts) -> Result<Vec<RadialSolution>> {
    (0..xs.len())
        .map(|o| {
            farrell_score(xs, ys, &xs[o], &ys[o], rts).map(|mut s| {
                s.theta = s.theta.max(1.0);
                s
            })
        })
        .collect()
}

/// Radial output-oriented scores; bootstrap fields are filled with the
/// point estimate (`tebc = te`, zero bias, degenerate interval).
pub fn radial_scores(panel: &DmuPanel, spec: &FrontierSpec) -> Result<Vec<EfficiencyEstimate>> {
    check_panel(panel, spec)?;
    let (xs, ys) = spec.extract(panel);
    let sols = farrell_all(&xs, &ys, spec.rts)?;
    Ok(sols
        .into_iter()
        .zip(&panel.records)
        .map(|(sol, rec)| {
            let te = 1.0 / sol.theta;
            let reference_weights = sol
                .weights
                .iter()
                .enumerate()
                .filter(|(_, &z)| z > 1e-12)
                .map(|(i, &z)| (panel.records[i].id.clone(), z))
                .collect();
            EfficiencyEstimate {
                dmu_id: rec.id.clone(),
                te_farrell: sol.theta,
                te,
                tebc: te,
                bias: 0.0,
                ci_low: te,
                ci_high: te,
                reference_weights,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// Basic (reflected-percentile) interval: θ̂ minus the quantiles of θ* − θ̂.
    Basic,
    /// Plain percentile interval of the bootstrap scores.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    /// Overrides the Silverman bandwidth on the reflected sample.
    pub bandwidth: Option<f64>,
    pub ci: CiMethod,
    /// Worker cap; 0 uses the global pool. Results do not depend on it.
    pub jobs: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { reps: 2000, level: 0.95, seed: 0, bandwidth: None, ci: CiMethod::Basic, jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDiagnostics {
    pub reps: usize,
    /// `3 bias² / variance` per DMU (Farrell scale).
    pub performance: Vec<f64>,
    /// Sample mean of the finite entries of `performance`.
    pub mean_performance: f64,
    pub bandwidth: f64,
    /// False when the sample was degenerate and the bootstrap was skipped.
    pub performed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub estimates: Vec<EfficiencyEstimate>,
    pub diagnostics: BootstrapDiagnostics,
}

/// Silverman bandwidth of the sample reflected about 1.
pub fn reflected_bandwidth(theta: &[f64]) -> f64 {
    let reflected: Vec<f64> = theta.iter().flat_map(|&t| [t, 2.0 - t]).collect();
    stats::silverman_bandwidth(&reflected)
}

/// One draw of smoothed, variance-corrected, reflected Farrell scores.
fn draw_smoothed(theta: &[f64], h: f64, reflected_var: f64, rng: &mut rng::StreamRng) -> Vec<f64> {
    let n = theta.len();
    let beta: Vec<f64> = (0..n)
        .map(|_| {
            let k = rng.random_range(0..2 * n);
            if k < n {
                theta[k]
            } else {
                2.0 - theta[k - n]
            }
        })
        .collect();
    let beta_bar = stats::mean(&beta);
    let shrink = if reflected_var > 0.0 { (1.0 + h * h / reflected_var).sqrt().recip() } else { 1.0 };
    beta.into_iter()
        .map(|b| {
            let eps: f64 = rng.sample(StandardNormal);
            let t = beta_bar + shrink * (b + h * eps - beta_bar);
            if t < 1.0 {
                2.0 - t
            } else {
                t
            }
        })
        .collect()
}

/// Farrell scores of the original points against the pseudo technology
/// `(x_i, y_i θ̂_i / θ*_i)` for one bootstrap replication.
fn replicate(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    theta_hat: &[f64],
    theta_star: &[f64],
    rts_list: &[Rts],
) -> Result<Vec<Vec<f64>>> {
    let pseudo_y: Vec<Vec<f64>> = ys
        .iter()
        .zip(theta_hat.iter().zip(theta_star))
        .map(|(y, (&th, &ts))| y.iter().map(|v| v * th / ts).collect())
        .collect();
    rts_list
        .iter()
        .map(|&rts| {
            (0..xs.len())
                .map(|o| farrell_score(xs, &pseudo_y, &xs[o], &ys[o], rts).map(|s| s.theta))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Homogeneous smoothed bootstrap for bias correction and confidence
/// intervals of the radial scores.
pub fn smoothed_bootstrap(panel: &DmuPanel, spec: &FrontierSpec, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    if cfg.reps < MIN_REPS {
        return Err(Error::invalid(format!("bootstrap needs at least {MIN_REPS} replications, got {}", cfg.reps)));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::invalid("confidence level must lie in (0, 1)"));
    }
    let mut estimates = radial_scores(panel, spec)?;
    let theta_hat: Vec<f64> = estimates.iter().map(|e| e.te_farrell).collect();
    let n = theta_hat.len();

    let spread = theta_hat.iter().fold(0.0f64, |acc, &t| acc.max((t - theta_hat[0]).abs()));
    let h = cfg.bandwidth.unwrap_or_else(|| reflected_bandwidth(&theta_hat));
    if spread == 0.0 || !(h > 0.0 && h.is_finite()) {
        warn!("degenerate efficiency sample (all scores equal); bootstrap skipped");
        return Ok(BootstrapResult {
            estimates,
            diagnostics: BootstrapDiagnostics {
                reps: cfg.reps,
                performance: vec![0.0; n],
                mean_performance: 0.0,
                bandwidth: 0.0,
                performed: false,
            },
        });
    }
    let reflected: Vec<f64> = theta_hat.iter().flat_map(|&t| [t, 2.0 - t]).collect();
    let reflected_var = stats::variance(&reflected);
    let (xs, ys) = spec.extract(panel);

    let reps: Vec<Vec<f64>> = rng::with_jobs(cfg.jobs, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|b| {
                let mut r = rng::stream(cfg.seed, &[b as u64]);
                let star = draw_smoothed(&theta_hat, h, reflected_var, &mut r);
                replicate(&xs, &ys, &theta_hat, &star, &[spec.rts]).map(|mut v| v.swap_remove(0))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let alpha = 1.0 - cfg.level;
    let mut performance = Vec::with_capacity(n);
    for (o, est) in estimates.iter_mut().enumerate() {
        let mut boot: Vec<f64> = reps.iter().map(|r| r[o]).collect();
        let th = theta_hat[o];
        let bias_f = stats::mean(&boot) - th;
        let var = stats::variance(&boot);
        performance.push(bootstrap_performance(&[bias_f], &[var])[0]);
        let theta_bc = th - bias_f;
        boot.sort_by(f64::total_cmp);
        let q_lo = stats::quantile_sorted(&boot, alpha / 2.0);
        let q_hi = stats::quantile_sorted(&boot, 1.0 - alpha / 2.0);
        // Farrell-scale interval, then invert (bounds swap).
        let (f_lo, f_hi) = match cfg.ci {
            CiMethod::Basic => (2.0 * th - q_hi, 2.0 * th - q_lo),
            CiMethod::Percentile => (q_lo, q_hi),
        };
        let invert = |f: f64| if f > 0.0 { 1.0 / f } else { f64::INFINITY };
        est.tebc = 1.0 / theta_bc;
        est.bias = est.te - est.tebc;
        est.ci_low = invert(f_hi);
        est.ci_high = invert(f_lo);
        if est.tebc < est.ci_low || est.tebc > est.ci_high {
            warn!("DMU {}: bias-corrected score outside its interval; interval widened", est.dmu_id);
            est.ci_low = est.ci_low.min(est.tebc);
            est.ci_high = est.ci_high.max(est.tebc);
        }
    }
    let finite: Vec<f64> = performance.iter().copied().filter(|p| p.is_finite()).collect();
    Ok(BootstrapResult {
        estimates,
        diagnostics: BootstrapDiagnostics {
            reps: cfg.reps,
            mean_performance: if finite.is_empty() { f64::INFINITY } else { stats::mean(&finite) },
            performance,
            bandwidth: h,
            performed: true,
        },
    })
}

/// `3 bias² / variance` elementwise; zero variance maps to +∞ (or 0 when the
/// bias is also zero).
pub fn bootstrap_performance(bias: &[f64], variance: &[f64]) -> Vec<f64> {
    bias.iter()
        .zip(variance)
        .map(|(&b, &v)| {
            if v > 0.0 {
                3.0 * b * b / v
            } else if b == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtsTestResult {
    /// Mean of CRS over VRS Farrell scores.
    pub statistic: f64,
    pub bootstrap_reps: usize,
    pub p_value: f64,
    pub bandwidth: f64,
}

impl RtsTestResult {
    pub fn rejects_crs(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn ratio_statistic(crs: &[f64], vrs: &[f64]) -> f64 {
    stats::mean(&crs.iter().zip(vrs).map(|(c, v)| c / v).collect::<Vec<_>>())
}

/// Bootstrap test of H0: the technology is CRS, against VRS.
pub fn rts_test(panel: &DmuPanel, spec: &FrontierSpec, reps: usize, seed: u64, jobs: usize) -> Result<RtsTestResult> {
    if reps < MIN_REPS {
        return Err(Error::invalid(format!("returns-to-scale test needs at least {MIN_REPS} replications")));
    }
    spec.validate(panel)?;
    let (m, s) = (spec.input_columns.len(), spec.output_columns.len());
    if panel.n() < m + s + 1 {
        return Err(Error::invalid(format!("returns-to-scale test needs at least {} DMUs", m + s + 1)));
    }
    let (xs, ys) = spec.extract(panel);
    let crs: Vec<f64> = farrell_all(&xs, &ys, Rts::Crs)?.into_iter().map(|s| s.theta).collect();
    let vrs: Vec<f64> = farrell_all(&xs, &ys, Rts::Vrs)?.into_iter().map(|s| s.theta).collect();
    let statistic = ratio_statistic(&crs, &vrs);

    let h = reflected_bandwidth(&crs);
    let h = if h.is_finite() { h } else { 0.0 };
    let reflected: Vec<f64> = crs.iter().flat_map(|&t| [t, 2.0 - t]).collect();
    let reflected_var = stats::variance(&reflected);
    let stats_star: Vec<f64> = rng::with_jobs(jobs, || {
        (0..reps)
            .into_par_iter()
            .map(|b| {
                let mut r = rng::stream(seed, &[b as u64]);
                let star = draw_smoothed(&crs, h, reflected_var, &mut r);
                let scores = replicate(&xs, &ys, &crs, &star, &[Rts::Crs, Rts::Vrs])?;
                Ok(ratio_statistic(&scores[0], &scores[1]))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let exceed = stats_star.iter().filter(|&&s| s >= statistic - 1e-12).count();
    Ok(RtsTestResult { statistic, bootstrap_reps: reps, p_value: exceed as f64 / reps as f64, bandwidth: h })
}
