use effx_core::dea::{rts_test, smoothed_bootstrap, BootstrapConfig, CiMethod};
use effx_core::tabular::{DmuPanel, FrontierSpec, Rts};
use effx_oracles::dgp;

fn cd_panel(seed: u64, n: usize) -> (DmuPanel, Vec<f64>) {
    let mut r = dgp::rng(seed);
    let (xs, ys, te) = dgp::cobb_douglas(&mut r, n);
    (DmuPanel::from_matrices(&xs, &ys).unwrap(), te)
}

#[test]
fn identical_across_worker_counts() {
    let (panel, _) = cd_panel(3, 40);
    let spec = FrontierSpec::all_columns(&panel, Rts::Vrs);
    let run = |jobs| {
        let cfg = BootstrapConfig { reps: 200, seed: 99, jobs, ..Default::default() };
        serde_json::to_string(&smoothed_bootstrap(&panel, &spec, &cfg).unwrap()).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(7));
}

#[test]
fn different_seeds_differ() {
    let (panel, _) = cd_panel(3, 30);
    let spec = FrontierSpec::all_columns(&panel, Rts::Vrs);
    let a = smoothed_bootstrap(&panel, &spec, &BootstrapConfig { reps: 100, seed: 1, ..Default::default() }).unwrap();
    let b = smoothed_bootstrap(&panel, &spec, &BootstrapConfig { reps: 100, seed: 2, ..Default::default() }).unwrap();
    assert_ne!(a.estimates[0].tebc, b.estimates[0].tebc);
}

#[test]
fn estimates_are_ordered_and_bounded() {
    let (panel, _) = cd_panel(8, 50);
    let spec = FrontierSpec::all_columns(&panel, Rts::Vrs);
    for ci in [CiMethod::Basic, CiMethod::Percentile] {
        let cfg = BootstrapConfig { reps: 300, seed: 4, ci, ..Default::default() };
        let res = smoothed_bootstrap(&panel, &spec, &cfg).unwrap();
        assert!(res.diagnostics.performed);
        for e in &res.estimates {
            assert!(e.ci_low <= e.ci_high, "{e:?}");
            assert!(e.ci_low <= e.tebc && e.tebc <= e.ci_high, "{e:?}");
            assert!(e.tebc <= e.te + 1e-12, "bias correction moves scores down: {e:?}");
            assert!((e.bias - (e.te - e.tebc)).abs() < 1e-12);
        }
        assert_eq!(res.diagnostics.performance.len(), 50);
    }
}

#[test]
fn bias_correction_helps_on_known_frontier() {
    let mut wins = 0;
    for draw in 0..10 {
        let (panel, truth) = cd_panel(1000 + draw, 60);
        let spec = FrontierSpec::all_columns(&panel, Rts::Vrs);
        let cfg = BootstrapConfig { reps: 300, seed: draw, ..Default::default() };
        let res = smoothed_bootstrap(&panel, &spec, &cfg).unwrap();
        let err = |f: &dyn Fn(&effx_core::dea::EfficiencyEstimate) -> f64| {
            res.estimates.iter().zip(&truth).map(|(e, t)| (f(e) - t).abs()).sum::<f64>()
        };
        if err(&|e| e.tebc) < err(&|e| e.te) {
            wins += 1;
        }
    }
    assert!(wins >= 8, "bias correction won {wins}/10");
}

#[test]
fn rts_test_separates_technologies() {
    let mut r = dgp::rng(21);
    let (xs, ys) = dgp::frontier_panel(&mut r, 80, |x| 2.0 * x);
    let crs = DmuPanel::from_matrices(&xs, &ys).unwrap();
    let (xs, ys) = dgp::frontier_panel(&mut r, 80, f64::sqrt);
    let concave = DmuPanel::from_matrices(&xs, &ys).unwrap();
    let spec = FrontierSpec::all_columns(&crs, Rts::Vrs);
    let p_crs = rts_test(&crs, &spec, 200, 5, 0).unwrap();
    let p_concave = rts_test(&concave, &spec, 200, 5, 0).unwrap();
    assert!(p_crs.statistic >= 1.0 && p_concave.statistic > p_crs.statistic);
    assert!(!p_crs.rejects_crs(0.05), "{p_crs:?}");
    assert!(p_concave.rejects_crs(0.05), "{p_concave:?}");
}
