mod common;

use std::path::Path;

use common::{effx, fixture, header, path_str, rows, run_ok, snapshot, SMALL};
use effx_core::tabular::{load_csv, Schema};
use effx_oracles::{dgp, sd};

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let h = header(path);
    let j = h.iter().position(|c| c == name).unwrap();
    rows(path).into_iter().map(|r| r[j].clone()).collect()
}

fn floats(xs: &[String]) -> Vec<f64> {
    xs.iter().map(|s| s.parse().unwrap()).collect()
}

/// Type-7 quantile by direct interpolation between order statistics.
fn q7(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[test]
fn dea_writes_four_score_files_and_manifest() {
    let f = fixture(&SMALL, 1);
    run_ok(&["dea", "--config", path_str(&f.config)]);
    let csvs: Vec<_> = std::fs::read_dir(f.out.join("dea"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("scores_") && n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 4, "{csvs:?}");
    assert!(f.out.join("manifest.json").exists());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(f.out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "dea");
    for key in ["bootstrap.bandwidth_rule", "quantile.convention", "gbt.lambda", "gbt.gamma", "bootstrap.scheme"] {
        assert!(m["defaults"][key].is_string(), "missing default {key}");
    }
}

#[test]
fn strata_table_matches_order_statistics_oracle() {
    let f = fixture(&SMALL, 2);
    run_ok(&["dea", "--config", path_str(&f.config)]);
    let table = f.out.join("dea/table_cognitive_strata.csv");
    assert_eq!(header(&table), ["panel", "stratum", "Mean", "SD", "IQR", "Min", "Max", "N"]);
    let scores = f.out.join("dea/scores_cognitive_public.csv");
    let tebc = floats(&column(&scores, "tebc"));
    let strata = column(&scores, "stratum");
    let mut checked = 0;
    for r in rows(&table).iter().filter(|r| r[0] == "public") {
        let xs: Vec<f64> =
            tebc.iter().zip(&strata).filter(|(_, s)| r[1] == "Whole sample" || **s == r[1]).map(|(t, _)| *t).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let iqr = q7(&xs, 0.75) - q7(&xs, 0.25);
        let got = floats(&r[2..7]);
        for (g, want) in got.iter().zip([mean, sd, iqr, q7(&xs, 0.0), q7(&xs, 1.0)]) {
            assert!((g - want).abs() < 1e-12, "{r:?}: {g} vs {want}");
        }
        assert_eq!(r[7], xs.len().to_string());
        checked += 1;
    }
    // Whole sample plus every country present among public schools.
    assert_eq!(checked, 1 + dgp::COUNTRIES.len());
}

#[test]
fn score_files_reload_through_tabular() {
    let f = fixture(&SMALL, 3);
    run_ok(&["dea", "--config", path_str(&f.config)]);
    let path = f.out.join("dea/scores_noncognitive_private.csv");
    let schema = Schema {
        id: "id".into(),
        group: "group".into(),
        inputs: vec!["te_farrell".into()],
        outputs: vec!["tebc".into(), "te".into()],
        covariates: vec!["ci_low".into(), "ci_high".into(), "performance".into()],
    };
    let panel = load_csv(&path, &schema).unwrap();
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.out.join("dea/scores_noncognitive_private.json")).unwrap()).unwrap();
    let est = json["result"]["estimates"].as_array().unwrap();
    assert_eq!(panel.n(), est.len());
    for (r, e) in panel.records.iter().zip(est) {
        assert_eq!(r.id, e["dmu_id"].as_str().unwrap());
        assert_eq!(r.group, "private");
        assert_eq!(r.outputs[0], e["tebc"].as_f64().unwrap());
        assert_eq!(r.inputs[0], e["te_farrell"].as_f64().unwrap());
        assert!(r.outputs[0] <= r.outputs[1] + 1e-12);
    }
}

#[test]
fn table_layouts() {
    let f = fixture(&SMALL, 4);
    run_ok(&["pipeline", "--config", path_str(&f.config)]);
    let o = &f.out;
    assert_eq!(
        header(&o.join("dea/table_cognitive_panel_a.csv")),
        ["row", "TE", "TEBC", "TEBC lower bound", "TEBC upper bound", "Bootstrap performance", "N"]
    );
    let pa = rows(&o.join("dea/table_cognitive_panel_a.csv"));
    assert_eq!(pa.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["private", "public"]);
    let n: usize = pa.iter().map(|r| r[6].parse::<usize>().unwrap()).sum();
    assert_eq!(n, SMALL.n);

    let t5 = o.join("sdtest/table5.csv");
    assert_eq!(
        header(&t5),
        ["H0", "row", "cognitive s=1", "cognitive s=2", "noncognitive s=1", "noncognitive s=2"]
    );
    let labels: Vec<(String, String)> = rows(&t5).into_iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let mut want = Vec::new();
    for h in ["private dominates public", "public dominates private"] {
        for r in ["Test statistic", "Critical-value", "P-value"] {
            want.push((h.to_string(), r.to_string()));
        }
    }
    assert_eq!(labels, want);

    let a1 = o.join("explain/tableA1.csv");
    assert_eq!(
        header(&a1),
        ["arm", "model", "Chosen parameters", "AUROC score", "AUPRC score", "CV AUROC score", "CV AUPRC score"]
    );
    let a1_rows = rows(&a1);
    assert_eq!(a1_rows.len(), 8);
    assert_eq!(a1_rows.iter().filter(|r| r[0] == "GBT").count(), 4);
    assert!(a1_rows.iter().any(|r| r[1] == "noncognitive - public"));

    let c1 = o.join("outliers/tableC1.csv");
    assert_eq!(
        header(&c1),
        [
            "panel",
            "stratum",
            "private Efficiency difference (%)",
            "private Delta N",
            "public Efficiency difference (%)",
            "public Delta N"
        ]
    );
    let c1_rows = rows(&c1);
    assert_eq!(c1_rows.len(), 2 * (1 + dgp::COUNTRIES.len()));
    assert_eq!(c1_rows[0][1], "Whole sample");
    for r in &c1_rows {
        assert!(r[3].parse::<i64>().unwrap() <= 0 && r[5].parse::<i64>().unwrap() <= 0);
    }

    assert_eq!(header(&o.join("explain/ranking_cognitive_private.csv")), ["rank", "feature_index", "feature", "mean_abs_shap"]);
    assert_eq!(rows(&o.join("explain/ranking_cognitive_private.csv")).len(), 4);
    assert_eq!(rows(&o.join("dea/density_cognitive.csv")).len(), 2 * 512);
    let report = std::fs::read_to_string(o.join("report/report.md")).unwrap();
    for section in ["Efficiency scores", "Stochastic dominance", "Outlier trimming", "Classifier validation"] {
        assert!(report.contains(section), "report lacks {section}");
    }
}

#[test]
fn delta_n_counts_super_efficient_units() {
    let f = fixture(&SMALL, 5);
    run_ok(&["pipeline", "--config", path_str(&f.config), "--stage", "outliers"]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(f.out.join("outliers/outliers.json")).unwrap()).unwrap();
    for rec in v.as_array().unwrap() {
        let group = rec["group"].as_str().unwrap();
        let frontier = rec["frontier"].as_str().unwrap();
        let alpha = rec["chosen_alpha"].as_f64().unwrap();
        let curve = rows(&f.out.join(format!("outliers/curve_{frontier}_{group}.csv")));
        let count: i64 = curve.iter().find(|r| r[0].parse::<f64>().unwrap() == alpha).unwrap()[2].parse().unwrap();
        let rows = rec["comparison"]["rows"].as_array().unwrap();
        assert_eq!(rows[0]["delta_n"].as_i64().unwrap(), -count);
        assert_eq!(rec["comparison"]["removed_ids"].as_array().unwrap().len() as i64, count);
        let by_stratum: i64 = rows[1..].iter().map(|r| r["delta_n"].as_i64().unwrap()).sum();
        assert_eq!(by_stratum, -count);
    }
    assert!(!f.out.join("explain").exists());
}

#[test]
fn explain_binarizes_against_pooled_mean() {
    let f = fixture(&SMALL, 6);
    run_ok(&["pipeline", "--config", path_str(&f.config), "--stage", "explain"]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(f.out.join("explain/explain.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    for rec in v.as_array().unwrap() {
        let fr = rec["frontier"].as_str().unwrap();
        let mut pooled = Vec::new();
        for g in ["private", "public"] {
            pooled.extend(floats(&column(&f.out.join(format!("dea/scores_{fr}_{g}.csv")), "tebc")));
        }
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        assert!((rec["threshold"].as_f64().unwrap() - mean).abs() < 1e-12);
        let own = floats(&column(&f.out.join(format!("dea/scores_{fr}_{}.csv", rec["group"].as_str().unwrap())), "tebc"));
        let positives = own.iter().filter(|&&t| t > rec["threshold"].as_f64().unwrap()).count();
        assert_eq!(rec["positives"].as_u64().unwrap() as usize, positives);
    }
    // c1 drives efficiency in the generator.
    let top = rows(&f.out.join("explain/ranking_cognitive_public.csv"));
    assert_eq!(top[0][2], "c1");
}

#[test]
fn sdtest_statistics_match_brute_force() {
    let f = fixture(&SMALL, 7);
    run_ok(&["pipeline", "--config", path_str(&f.config), "--stage", "sdtest"]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(f.out.join("sdtest/sdtest.json")).unwrap()).unwrap();
    for rec in v.as_array().unwrap() {
        let fr = rec["frontier"].as_str().unwrap();
        let h0 = rec["null_hypothesis"].as_str().unwrap();
        let (x, y) = if h0.starts_with("private") { ("private", "public") } else { ("public", "private") };
        let a = floats(&column(&f.out.join(format!("dea/scores_{fr}_{x}.csv")), "tebc"));
        let b = floats(&column(&f.out.join(format!("dea/scores_{fr}_{y}.csv")), "tebc"));
        let want = sd::statistic(&a, &b, rec["order"].as_u64().unwrap() as u8);
        assert!((rec["statistic"].as_f64().unwrap() - want).abs() < 1e-12, "{rec}");
        let p = rec["p_value"].as_f64().unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
}

#[test]
fn reruns_are_cached_and_partial_changes_rerun_downstream_only() {
    let f = fixture(&SMALL, 8);
    let cfg = path_str(&f.config);
    run_ok(&["pipeline", "--config", cfg]);
    let first = snapshot(&f.out);
    let out = run_ok(&["pipeline", "--config", cfg]);
    assert_eq!(out.matches("cached").count(), 5, "{out}");
    assert_eq!(snapshot(&f.out), first);

    // A different explain grid invalidates explain and report only.
    let text = std::fs::read_to_string(&f.config).unwrap().replace("max_depth = [2, 3]", "max_depth = [2]");
    std::fs::write(&f.config, text).unwrap();
    let out = run_ok(&["pipeline", "--config", cfg]);
    let cached: Vec<&str> = out.lines().filter(|l| l.ends_with("cached")).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(cached, ["dea", "sdtest", "outliers"], "{out}");

    // Tampering with an output invalidates its stage.
    let p = f.out.join("sdtest/table5.csv");
    std::fs::write(&p, "tampered").unwrap();
    let out = run_ok(&["pipeline", "--config", cfg]);
    assert!(out.lines().any(|l| l.starts_with("sdtest") && !l.ends_with("cached")), "{out}");
    assert_ne!(std::fs::read(&p).unwrap(), b"tampered");
}

#[test]
fn outputs_do_not_depend_on_jobs_or_forced_reruns() {
    let f = fixture(&SMALL, 9);
    let cfg = path_str(&f.config);
    let a = f.dir.path().join("a");
    let b = f.dir.path().join("b");
    let ma = run_ok(&["pipeline", "--config", cfg, "--out", path_str(&a), "--jobs", "1"]);
    let mb = run_ok(&["pipeline", "--config", cfg, "--out", path_str(&b), "--jobs", "3"]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(ma.lines().last(), mb.lines().last(), "manifest hash differs");
    let mc = run_ok(&["pipeline", "--config", cfg, "--out", path_str(&a), "--force"]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(ma.lines().last(), mc.lines().last());
    let md = run_ok(&["pipeline", "--config", cfg, "--out", path_str(&b), "--seed", "10", "--stage", "dea"]);
    assert_ne!(ma.lines().last(), md.lines().last());
}

#[test]
fn dump_lp_writes_program_text() {
    let f = fixture(&SMALL, 10);
    run_ok(&["dea", "--config", path_str(&f.config), "--dump-lp", "S0004"]);
    let text = std::fs::read_to_string(f.out.join("debug/lp_cognitive_S0004.lp")).unwrap();
    assert!(!text.trim().is_empty());
}

fn code(o: &std::process::Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let f = fixture(&SMALL, 11);
    let cfg = path_str(&f.config);
    let dir = f.dir.path();

    let o = effx(&["dea"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let bad = dir.join("unknown_key.toml");
    std::fs::write(&bad, std::fs::read_to_string(&f.config).unwrap() + "\n[extra]\nfoo = 1\n").unwrap();
    assert_eq!(code(&effx(&["dea", "--config", path_str(&bad)])), 2);

    let bad = dir.join("missing_col.toml");
    std::fs::write(&bad, std::fs::read_to_string(&f.config).unwrap().replace("\"wellbeing\"", "\"happiness\"")).unwrap();
    let o = effx(&["dea", "--config", path_str(&bad)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("happiness"));

    let bad = dir.join("few_reps.toml");
    std::fs::write(&bad, std::fs::read_to_string(&f.config).unwrap().replace("reps = 100", "reps = 5")).unwrap();
    assert_eq!(code(&effx(&["dea", "--config", path_str(&bad)])), 2);

    // Upstream outputs missing.
    let o = effx(&["sdtest", "--config", cfg]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("dea"));

    // Bad data row.
    let text = std::fs::read_to_string(dir.join("panel.csv")).unwrap();
    let broken: Vec<String> = text
        .lines()
        .map(|l| {
            let mut fields: Vec<&str> = l.split(',').collect();
            if fields[0] == "S0007" {
                fields[2] = "-3";
            }
            fields.join(",")
        })
        .collect();
    std::fs::write(dir.join("panel.csv"), broken.join("\n")).unwrap();
    let o = effx(&["dea", "--config", cfg]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("row 9") && stderr(&o).contains("x1"), "{}", stderr(&o));
    std::fs::write(dir.join("panel.csv"), text).unwrap();

    // Single-class labels after binarization.
    let bad = dir.join("threshold.toml");
    std::fs::write(&bad, std::fs::read_to_string(&f.config).unwrap().replace("folds = 3", "folds = 3\nthreshold = 0.0")).unwrap();
    let o = effx(&["pipeline", "--config", path_str(&bad), "--stage", "explain"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("stratum 'private'"), "{}", stderr(&o));
}
