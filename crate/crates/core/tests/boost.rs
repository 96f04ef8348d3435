use effx_core::boost::{
    auprc, auroc, logit_loss_grad, stratified_kfold, train_gbt, train_gbt_traced, train_logit, GbtConfig, Penalty,
    TreeEnsemble,
};
use effx_oracles::{average_precision, auroc_pairs, dgp, finite_diff_grad};
use proptest::prelude::*;
use rand::Rng;

fn classification(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = dgp::rng(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let y = x.iter().map(|row| u8::from(row[0] + 0.5 * row[1] + r.random_range(-1.0..1.0) > 0.0)).collect();
    (x, y)
}

#[test]
fn full_batch_loss_never_increases() {
    for seed in 0..20 {
        let (x, y) = classification(seed, 120, 4);
        let cfg = GbtConfig { n_estimators: 100, subsample: 1.0, max_depth: 3, seed, ..Default::default() };
        let (_, trace) = train_gbt_traced(&x, &y, &cfg).unwrap();
        assert_eq!(trace.loss.len(), 101);
        for (k, w) in trace.loss.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed} round {k}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn model_json_round_trip() {
    let (x, y) = classification(2, 80, 3);
    let m = train_gbt(&x, &y, &GbtConfig { n_estimators: 10, ..Default::default() }).unwrap();
    let back = TreeEnsemble::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(m, back);
    assert_eq!(m.predict_margin(&x).unwrap(), back.predict_margin(&x).unwrap());
}

#[test]
fn missing_values_follow_default_direction() {
    let (mut x, y) = classification(4, 100, 3);
    for (i, row) in x.iter_mut().enumerate() {
        if i % 5 == 0 {
            row[0] = f64::NAN;
        }
    }
    let m = train_gbt(&x, &y, &GbtConfig { n_estimators: 20, ..Default::default() }).unwrap();
    let p = m.predict_proba(&x).unwrap();
    assert!(p.iter().all(|v| v.is_finite() && *v > 0.0 && *v < 1.0));
}

#[test]
fn training_is_reproducible() {
    let (x, y) = classification(6, 90, 3);
    let cfg = GbtConfig { n_estimators: 15, subsample: 0.5, seed: 3, ..Default::default() };
    assert_eq!(train_gbt(&x, &y, &cfg).unwrap(), train_gbt(&x, &y, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auroc_matches_pair_count(
        data in prop::collection::vec(((0u8..20).prop_map(|v| f64::from(v) / 4.0), 0u8..2), 2..200)
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<u8> = data.iter().map(|d| d.1).collect();
        prop_assume!(y.contains(&0) && y.contains(&1));
        let got = auroc(&scores, &y).unwrap();
        prop_assert!((got - auroc_pairs(&scores, &y)).abs() <= 1e-12);
        let ap = auprc(&scores, &y).unwrap();
        prop_assert!((ap - average_precision(&scores, &y)).abs() <= 1e-12);
    }

    #[test]
    fn folds_are_stratified(y in prop::collection::vec(0u8..2, 10..120), k in 2usize..6, seed in any::<u64>()) {
        let pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(pos >= k && y.len() - pos >= k);
        let folds = stratified_kfold(&y, k, seed).unwrap();
        for class in 0..2u8 {
            let counts: Vec<usize> = (0..k)
                .map(|f| folds.iter().zip(&y).filter(|(ff, yy)| **ff == f && **yy == class).count())
                .collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences(seed in any::<u64>(), ridge in 0.0..2.0f64) {
        let (x, y) = classification(seed, 40, 3);
        let mut r = dgp::rng(seed ^ 1);
        let params: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, grad) = logit_loss_grad(&x, &y, &params, ridge);
        let fd = finite_diff_grad(|p| logit_loss_grad(&x, &y, p, ridge).0, &params, 1e-5);
        for (g, f) in grad.iter().zip(&fd) {
            prop_assert!((g - f).abs() <= 1e-6 * g.abs().max(1e-3), "{} vs {}", g, f);
        }
    }
}

#[test]
fn lasso_is_sparser_than_ridge() {
    let (x, y) = classification(9, 200, 8);
    let l1 = train_logit(&x, &y, Penalty::L1, 10.0).unwrap();
    let l2 = train_logit(&x, &y, Penalty::L2, 10.0).unwrap();
    assert!(l1.converged && l2.converged);
    assert!(l1.support_size() < l2.support_size());
    assert!(l1.weights[0].abs() > l1.weights[5].abs(), "{:?} {:?}", l1, l2);
}

#[test]
fn strong_lasso_zeroes_everything_on_noise() {
    let mut r = dgp::rng(12);
    let x: Vec<Vec<f64>> = (0..150).map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<u8> = (0..150).map(|i| (i % 2) as u8).collect();
    let m = train_logit(&x, &y, Penalty::L1, 0.1).unwrap();
    assert_eq!(m.support_size(), 0);
    assert!((m.train_auroc - 0.5).abs() < 1e-12);
}
