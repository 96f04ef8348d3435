//! First- and second-order stochastic dominance tests between two samples.
//!
//! The null hypothesis is "A s-dominates B" (D^s F_A ≤ D^s F_B everywhere);
//! large values of the one-sided statistic reject it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

pub const MIN_REPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominanceOrder {
    First = 1,
    Second = 2,
}

impl DominanceOrder {
    pub fn from_int(s: u8) -> Result<Self> {
        match s {
            1 => Ok(DominanceOrder::First),
            2 => Ok(DominanceOrder::Second),
            _ => Err(Error::invalid(format!("dominance order must be 1 or 2, got {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdResult {
    pub order: DominanceOrder,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reps: usize,
    pub grid: Vec<f64>,
}

impl SdResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Empirical CDF, `#{x ≤ z} / n`.
pub fn ecdf(sample: &[f64], z: f64) -> f64 {
    sample.iter().filter(|&&x| x <= z).count() as f64 / sample.len() as f64
}

/// Integrated ECDF, `Σ max(z − x, 0) / n`.
pub fn integrated_cdf(sample: &[f64], z: f64) -> f64 {
    sample.iter().map(|&x| (z - x).max(0.0)).sum::<f64>() / sample.len() as f64
}

/// Sorted unique values of both samples.
pub fn pooled_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = a.iter().chain(b).copied().collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Evaluates `D^s F` of a sorted sample on a sorted grid in one sweep.
fn dominance_curve(sorted: &[f64], grid: &[f64], order: DominanceOrder) -> Vec<f64> {
    let n = sorted.len() as f64;
    let mut out = Vec::with_capacity(grid.len());
    let (mut k, mut sum) = (0usize, 0.0);
    for &z in grid {
        while k < sorted.len() && sorted[k] <= z {
            sum += sorted[k];
            k += 1;
        }
        out.push(match order {
            DominanceOrder::First => k as f64 / n,
            DominanceOrder::Second => (k as f64 * z - sum) / n,
        });
    }
    out
}

fn statistic_sorted(a: &[f64], b: &[f64], grid: &[f64], order: DominanceOrder) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let fa = dominance_curve(a, grid, order);
    let fb = dominance_curve(b, grid, order);
    let sup = fa.iter().zip(&fb).map(|(x, y)| x - y).fold(0.0f64, f64::max);
    (n * m / (n + m)).sqrt() * sup
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("both samples must be nonempty"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    Ok(())
}

/// `√(nm/(n+m)) · max(0, sup_z (D^s F_A − D^s F_B))` over the pooled grid.
pub fn sd_statistic(a: &[f64], b: &[f64], order: DominanceOrder) -> Result<f64> {
    check(a, b)?;
    let grid = pooled_grid(a, b);
    Ok(statistic_sorted(&sorted(a), &sorted(b), &grid, order))
}

/// Pooled bootstrap test of "A s-dominates B". Both groups are resampled
/// with replacement from the pooled sample, which imposes the least
/// favourable null of equal distributions.
pub fn sd_test(a: &[f64], b: &[f64], order: DominanceOrder, reps: usize, seed: u64) -> Result<SdResult> {
    check(a, b)?;
    if reps < MIN_REPS {
        return Err(Error::invalid(format!("dominance test needs at least {MIN_REPS} replications, got {reps}")));
    }
    let grid = pooled_grid(a, b);
    let statistic = statistic_sorted(&sorted(a), &sorted(b), &grid, order);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let boot: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, &[r as u64]);
            let mut draw = |k: usize| {
                let mut v: Vec<f64> = (0..k).map(|_| pooled[g.random_range(0..pooled.len())]).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let ra = draw(a.len());
            let rb = draw(b.len());
            statistic_sorted(&ra, &rb, &grid, order)
        })
        .collect();
    let mut sorted_boot = boot.clone();
    sorted_boot.sort_by(f64::total_cmp);
    let critical_value = stats::quantile_sorted(&sorted_boot, 0.95);
    let exceed = boot.iter().filter(|&&t| t >= statistic).count();
    Ok(SdResult {
        order,
        statistic,
        critical_value,
        p_value: (1 + exceed) as f64 / (reps + 1) as f64,
        reps,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_examples() {
        assert!((ecdf(&[1.0, 2.0, 3.0], 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 0.5), 0.0);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 3.0), 1.0);
        assert_eq!(integrated_cdf(&[0.0], 1.0), 1.0);
        assert_eq!(integrated_cdf(&[1.0, 2.0], 0.5), 0.0);
    }

    #[test]
    fn sweep_matches_direct_formulas() {
        let a = [0.3, 0.1, 0.7, 0.7, 0.2];
        let grid = pooled_grid(&a, &[0.5, 0.05]);
        let s = sorted(&a);
        for order in [DominanceOrder::First, DominanceOrder::Second] {
            let curve = dominance_curve(&s, &grid, order);
            for (z, v) in grid.iter().zip(curve) {
                let direct = match order {
                    DominanceOrder::First => ecdf(&a, *z),
                    DominanceOrder::Second => integrated_cdf(&a, *z),
                };
                assert!((v - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_samples_zero() {
        let a = [0.4, 0.9, 0.5, 0.77];
        for order in [DominanceOrder::First, DominanceOrder::Second] {
            assert_eq!(sd_statistic(&a, &a, order).unwrap(), 0.0);
        }
    }

    #[test]
    fn reps_guard_and_order_parse() {
        assert!(sd_test(&[1.0], &[2.0], DominanceOrder::First, 100, 0).is_err());
        assert!(DominanceOrder::from_int(3).is_err());
        assert!(sd_statistic(&[], &[1.0], DominanceOrder::First).is_err());
    }
}
