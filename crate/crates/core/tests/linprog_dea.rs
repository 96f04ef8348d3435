use effx_core::dea::{farrell_score, radial_scores};
use effx_core::linprog::{solve, LinearProgram, LpStatus, Relation, Sense};
use effx_core::tabular::{DmuPanel, FrontierSpec, Rts};
use effx_oracles::{dgp, lp};
use proptest::prelude::*;
use rand::Rng;

fn bounded_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (2usize..5, 1usize..4).prop_flat_map(|(v, k)| {
        (
            prop::collection::vec(-5.0..5.0f64, v),
            prop::collection::vec(prop::collection::vec(-3.0..6.0f64, v), k),
            prop::collection::vec(0.5..10.0f64, k),
            prop::collection::vec(1.0..4.0f64, v),
        )
    })
}

/// `max c·x, A x ≤ b, 0 ≤ x ≤ u` in equality standard form.
fn standard_form(c: &[f64], a: &[Vec<f64>], b: &[f64], u: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let v = c.len();
    let rows = a.len() + v;
    let cols = v + rows;
    let mut sa = Vec::new();
    let mut sb = Vec::new();
    for (i, row) in a.iter().enumerate() {
        let mut r = vec![0.0; cols];
        r[..v].copy_from_slice(row);
        r[v + i] = 1.0;
        sa.push(r);
        sb.push(b[i]);
    }
    for j in 0..v {
        let mut r = vec![0.0; cols];
        r[j] = 1.0;
        r[v + a.len() + j] = 1.0;
        sa.push(r);
        sb.push(u[j]);
    }
    let mut sc = vec![0.0; cols];
    sc[..v].copy_from_slice(c);
    (sc, sa, sb)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, a, b, u) in bounded_lp()) {
        let mut p = LinearProgram::new(Sense::Maximize, c.clone());
        for (row, &rhs) in a.iter().zip(&b) {
            p.add(row.clone(), Relation::Le, rhs);
        }
        p.upper = u.iter().map(|&x| Some(x)).collect();
        let sol = solve(&p).unwrap();
        let (sc, sa, sb) = standard_form(&c, &a, &b, &u);
        let (best, _) = lp::vertex_optimum(&sc, &sa, &sb, true).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.objective_value - best).abs() < 1e-7, "{} vs {}", sol.objective_value, best);
        prop_assert!(p.max_violation(&sol.primal) < 1e-7);
    }

    #[test]
    fn minimize_is_negated_maximize((c, a, b, u) in bounded_lp()) {
        let build = |sense, obj: Vec<f64>| {
            let mut p = LinearProgram::new(sense, obj);
            for (row, &rhs) in a.iter().zip(&b) {
                p.add(row.clone(), Relation::Le, rhs);
            }
            p.upper = u.iter().map(|&x| Some(x)).collect();
            solve(&p).unwrap().objective_value
        };
        let max = build(Sense::Maximize, c.clone());
        let min = build(Sense::Minimize, c.iter().map(|v| -v).collect());
        prop_assert!((max + min).abs() < 1e-9);
    }
}

#[test]
fn infeasible_equalities_detected() {
    let mut p = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
    p.add(vec![1.0, 1.0], Relation::Eq, 1.0).add(vec![1.0, 1.0], Relation::Ge, 3.0);
    assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn dea_matches_vertex_oracle() {
    let mut r = dgp::rng(11);
    for trial in 0..60 {
        let n = r.random_range(2..=9);
        let m = r.random_range(1..=3);
        let s = r.random_range(1..=2);
        let (xs, ys) = dgp::random_panel(&mut r, n, m, s);
        for rts in [Rts::Vrs, Rts::Crs] {
            for o in 0..n {
                let got = farrell_score(&xs, &ys, &xs[o], &ys[o], rts).unwrap().theta;
                let want = lp::dea_theta(&xs, &ys, &xs[o], &ys[o], rts == Rts::Vrs);
                assert!((got - want).abs() < 1e-6, "trial {trial} unit {o} {rts:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn dea_weights_reproduce_projection() {
    let mut r = dgp::rng(5);
    let (xs, ys) = dgp::random_panel(&mut r, 10, 2, 2);
    for o in 0..10 {
        let sol = farrell_score(&xs, &ys, &xs[o], &ys[o], Rts::Vrs).unwrap();
        assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for k in 0..2 {
            let used: f64 = sol.weights.iter().zip(&xs).map(|(w, x)| w * x[k]).sum();
            assert!(used <= xs[o][k] + 1e-7);
            let made: f64 = sol.weights.iter().zip(&ys).map(|(w, y)| w * y[k]).sum();
            assert!(made >= sol.theta * ys[o][k] - 1e-7);
        }
    }
}

fn scores(xs: &[Vec<f64>], ys: &[Vec<f64>], rts: Rts) -> Vec<f64> {
    let panel = DmuPanel::from_matrices(xs, ys).unwrap();
    let spec = FrontierSpec::all_columns(&panel, rts);
    radial_scores(&panel, &spec).unwrap().into_iter().map(|e| e.te).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn units_invariance(seed in any::<u64>(), ki in 0.01..100.0f64, ko in 0.01..100.0f64) {
        let mut r = dgp::rng(seed);
        let (xs, ys) = dgp::random_panel(&mut r, 8, 2, 2);
        let xs2: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * ki, x[1]]).collect();
        let ys2: Vec<Vec<f64>> = ys.iter().map(|y| vec![y[0], y[1] * ko]).collect();
        for rts in [Rts::Vrs, Rts::Crs] {
            for (a, b) in scores(&xs, &ys, rts).iter().zip(scores(&xs2, &ys2, rts)) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn vrs_dominates_crs_and_frontier_nonempty(seed in any::<u64>()) {
        let mut r = dgp::rng(seed);
        let (xs, ys) = dgp::random_panel(&mut r, 9, 2, 1);
        let v = scores(&xs, &ys, Rts::Vrs);
        let c = scores(&xs, &ys, Rts::Crs);
        prop_assert!(v.iter().zip(&c).all(|(a, b)| *a >= b - 1e-9));
        prop_assert!(v.iter().all(|&t| t > 0.0 && t <= 1.0));
        prop_assert!(v.iter().any(|&t| (t - 1.0).abs() < 1e-9));
    }

    #[test]
    fn adding_a_unit_never_raises_scores(seed in any::<u64>()) {
        let mut r = dgp::rng(seed);
        let (xs, ys) = dgp::random_panel(&mut r, 9, 2, 2);
        let before = scores(&xs[..8], &ys[..8], Rts::Vrs);
        let after = scores(&xs, &ys, Rts::Vrs);
        prop_assert!(before.iter().zip(&after).all(|(b, a)| *a <= b + 1e-9));
    }
}
