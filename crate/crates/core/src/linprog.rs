//! Dense two-phase primal simplex.
//!
//! Bland's rule is always on: the entering column is the lowest-index column
//! with an improving reduced cost, and ratio-test ties go to the lowest-index
//! basic variable. That makes every solve deterministic given the input order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot and reduced-cost tolerance.
pub const PIVOT_TOL: f64 = 1e-9;
/// Tolerance for reported constraint residuals.
pub const RESIDUAL_TOL: f64 = 1e-7;

const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// Program over `v` variables with default bounds `[0, ∞)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let v = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), lower: vec![0.0; v], upper: vec![None; v] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.num_vars();
        if self.lower.len() != v || self.upper.len() != v {
            return Err(Error::invalid("bound vectors must match the objective length"));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("objective coefficients must be finite"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != v {
                return Err(Error::invalid(format!("constraint {i} has {} coefficients, expected {v}", c.coeffs.len())));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::invalid(format!("constraint {i} has a non-finite entry")));
            }
        }
        for j in 0..v {
            if !self.lower[j].is_finite() {
                return Err(Error::invalid(format!("lower bound of x{j} must be finite")));
            }
            if let Some(u) = self.upper[j] {
                if u.is_nan() || u < self.lower[j] {
                    return Err(Error::invalid(format!("upper bound of x{j} below its lower bound")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj);
            if let Some(u) = self.upper[j] {
                worst = worst.max(xj - u);
            }
        }
        worst
    }

    /// CPLEX-style LP text, for cross-checking with external solvers.
    pub fn to_lp_text(&self) -> String {
        fn terms(coeffs: &[f64]) -> String {
            let mut s = String::new();
            for (j, &a) in coeffs.iter().enumerate().filter(|(_, a)| **a != 0.0) {
                let sign = if a < 0.0 { "-" } else { "+" };
                let _ = write!(s, " {sign} {} x{j}", a.abs());
            }
            if s.is_empty() {
                s.push_str(" 0 x0");
            }
            s
        }
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Maximize => "Maximize\n",
            Sense::Minimize => "Minimize\n",
        });
        let _ = writeln!(out, " obj:{}", terms(&self.objective));
        out.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " c{i}:{} {rel} {}", terms(&c.coeffs), c.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            match self.upper[j] {
                Some(u) => {
                    let _ = writeln!(out, " {} <= x{j} <= {u}", self.lower[j]);
                }
                None => {
                    let _ = writeln!(out, " x{j} >= {}", self.lower[j]);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.a[r * w + c];
        for j in 0..w {
            self.a[r * w + j] /= p;
        }
        self.a[r * w + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                self.a[i * w + j] -= f * self.a[r * w + j];
            }
            self.a[i * w + c] = 0.0;
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Maximizes `cost · x` over columns `< allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<Outcome> {
        loop {
            if self.iterations > MAX_PIVOTS {
                return Err(Error::numeric("simplex pivot limit exceeded"));
            }
            // Bland: first column with positive reduced cost.
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.at(i, j);
                }
                if d > PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return Ok(Outcome::Optimal) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[r] {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(Outcome::Unbounded),
            }
        }
    }
}

/// Solves `lp` to optimality or reports infeasibility/unboundedness.
/// Errors only on malformed input.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let v = lp.num_vars();
    let sign = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };

    // Shift to x' = x - lower >= 0; upper bounds become rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(lp.constraints.len());
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
        rows.push((c.coeffs.clone(), c.relation, c.rhs - shift));
    }
    for j in 0..v {
        if let Some(u) = lp.upper[j] {
            let mut e = vec![0.0; v];
            e[j] = 1.0;
            rows.push((e, Relation::Le, u - lp.lower[j]));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = v + n_slack;
    let cols = art_start + n_art;
    let w = cols + 1;
    let mut tab = Tableau { rows: m, cols, a: vec![0.0; m * w], basis: vec![0; m], iterations: 0 };
    let (mut next_slack, mut next_art) = (v, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        tab.a[i * w..i * w + v].copy_from_slice(coeffs);
        tab.a[i * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                tab.a[i * w + next_slack] = 1.0;
                tab.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                tab.a[i * w + next_slack] = -1.0;
                next_slack += 1;
                tab.a[i * w + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                tab.a[i * w + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.optimize(&phase1, cols)?;
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= art_start).map(|i| tab.rhs(i)).sum();
        if infeas > PIVOT_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: f64::NAN,
                primal: Vec::new(),
                iterations: tab.iterations,
            });
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut keep = vec![true; m];
        for i in 0..m {
            if tab.basis[i] < art_start {
                continue;
            }
            match (0..art_start).find(|&j| !tab.basis.contains(&j) && tab.at(i, j).abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => keep[i] = false,
            }
        }
        if keep.iter().any(|k| !k) {
            let mut a = Vec::with_capacity(m * w);
            let mut basis = Vec::new();
            for i in (0..m).filter(|&i| keep[i]) {
                a.extend_from_slice(&tab.a[i * w..(i + 1) * w]);
                basis.push(tab.basis[i]);
            }
            tab.rows = basis.len();
            tab.a = a;
            tab.basis = basis;
        }
    }

    let mut cost = vec![0.0; cols];
    for j in 0..v {
        cost[j] = sign * lp.objective[j];
    }
    let outcome = tab.optimize(&cost, art_start)?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective_value: sign * f64::INFINITY,
            primal: Vec::new(),
            iterations: tab.iterations,
        });
    }
    let mut primal = lp.lower.clone();
    for i in 0..tab.rows {
        if tab.basis[i] < v {
            primal[tab.basis[i]] += tab.rhs(i);
        }
    }
    let objective_value = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();
    Ok(LpSolution { status: LpStatus::Optimal, objective_value, primal, iterations: tab.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_max() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add(vec![1.0], Relation::Ge, 2.0).add(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn minimize_with_equality_and_bounds() {
        // min x + 2y s.t. x + y = 3, y >= 0.5, x <= 2
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 3.0);
        lp.lower[1] = 0.5;
        lp.upper[0] = Some(2.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 4.0).abs() < 1e-12, "{sol:?}");
        assert!(lp.max_violation(&sol.primal) < RESIDUAL_TOL);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0).add(vec![2.0, 2.0], Relation::Eq, 4.0);
        lp.add(vec![1.0, 0.0], Relation::Le, 1.5);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0);
        assert!(solve(&lp).is_err());
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add(vec![1.0], Relation::Le, f64::NAN);
        assert!(solve(&lp).is_err());
    }

    #[test]
    fn lp_text_dump() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, -2.0]);
        lp.add(vec![1.0, 1.0], Relation::Le, 4.0);
        let text = lp.to_lp_text();
        assert!(text.starts_with("Maximize\n obj: + 1 x0 - 2 x1\n"));
        assert!(text.contains(" c0: + 1 x0 + 1 x1 <= 4"));
        assert!(text.ends_with("End\n"));
    }
}
