use effx_core::stats::{iqr, kde_grid, Describe};
use effx_core::tabular::{load_csv, Schema};
use effx_core::Error;
use effx_oracles::dgp;

fn school_schema() -> Schema {
    Schema {
        id: "id".into(),
        group: "group".into(),
        inputs: ["x1", "x2", "x3", "x4"].map(String::from).to_vec(),
        outputs: ["math", "reading", "science", "wellbeing"].map(String::from).to_vec(),
        covariates: (1..=5).map(|k| format!("c{k}")).collect(),
    }
}

#[test]
fn synthetic_panel_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    std::fs::write(&path, dgp::school_panel_csv(4, 90, 5)).unwrap();
    let panel = load_csv(&path, &school_schema()).unwrap();
    assert_eq!((panel.n(), panel.m(), panel.s(), panel.p()), (90, 4, 4, 5));
    assert_eq!(panel.groups(), vec!["private".to_string(), "public".to_string()]);
    assert!(panel.records.iter().any(|r| r.covariates[1].is_nan()));

    let again = dir.path().join("again.csv");
    panel.write_csv(&again).unwrap();
    let back = load_csv(&again, &panel.schema()).unwrap();
    assert_eq!(back.n(), panel.n());
    for (a, b) in panel.records.iter().zip(&back.records) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.outputs, b.outputs);
        for (x, y) in a.covariates.iter().zip(&b.covariates) {
            assert!(x == y || (x.is_nan() && y.is_nan()));
        }
    }
}

#[test]
fn data_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let text = dgp::school_panel_csv(1, 5, 5);
    let fixed: Vec<String> = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f[0] == "S0003" {
                f[2] = "-1";
            }
            f.join(",")
        })
        .collect();
    std::fs::write(&path, fixed.join("\n")).unwrap();
    match load_csv(&path, &school_schema()) {
        Err(Error::Data { row, column, .. }) => {
            assert_eq!(row, 5);
            assert_eq!(column, "x1");
        }
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn describe_matches_order_statistics() {
    let xs = [0.70, 0.95, 0.60, 0.80, 0.90, 0.75, 0.85];
    let d = Describe::of(&xs);
    // type-7 quartiles of the sorted vector: 0.725 and 0.875
    assert!((d.iqr - 0.15).abs() < 1e-12);
    assert!((iqr(&xs) - 0.15).abs() < 1e-12);
    assert_eq!((d.min, d.max, d.n), (0.60, 0.95, 7));
    assert!((d.mean - 0.792857142857143).abs() < 1e-12);
}

#[test]
fn density_grid_has_512_points() {
    let xs: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 / 100.0).collect();
    let (grid, dens) = kde_grid(&xs, 512);
    assert_eq!((grid.len(), dens.len()), (512, 512));
    assert!(grid.windows(2).all(|w| w[1] > w[0]));
}
