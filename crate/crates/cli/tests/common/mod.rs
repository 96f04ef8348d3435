#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use effx_oracles::dgp;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
    pub out: PathBuf,
}

pub struct Size {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub sd_reps: usize,
    pub extra: &'static str,
}

pub const SMALL: Size = Size { n: 240, p: 5, reps: 100, sd_reps: 200, extra: "" };

/// Reduced grid: 2 x 1 x 2 x 1 = 4 configurations.
pub const REDUCED_GRID: &str = "[explain.gbt]\nn_estimators = [20, 50]\nsubsample = [0.7]\nmax_depth = [2, 3]\nlearning_rate = [0.1]\n";

pub fn config_text(size: &Size, seed: u64) -> String {
    let covs: Vec<String> = (1..=size.p).map(|k| format!("\"c{k}\"")).collect();
    format!(
        r#"seed = {seed}
out = "out"

[data]
path = "panel.csv"
stratum = "country"
covariates = [{covs}]

[groups]
a = "private"
b = "public"

[[frontier]]
name = "cognitive"
inputs = ["x1", "x2", "x3", "x4"]
outputs = ["math", "reading", "science"]

[[frontier]]
name = "noncognitive"
inputs = ["x1", "x2", "x3", "x4"]
outputs = ["wellbeing"]

[bootstrap]
reps = {reps}

[sdtest]
reps = {sd_reps}

[explain]
folds = 3
top_k = 4
profile_k = 3

{grid}{extra}"#,
        covs = covs.join(", "),
        reps = size.reps,
        sd_reps = size.sd_reps,
        grid = REDUCED_GRID,
        extra = size.extra,
    )
}

pub fn fixture(size: &Size, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("panel.csv"), dgp::school_panel_csv(seed, size.n, size.p)).unwrap();
    let config = dir.path().join("effx.toml");
    std::fs::write(&config, config_text(size, seed)).unwrap();
    let out = dir.path().join("out");
    Fixture { dir, config, out }
}

pub fn effx(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_effx")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

pub fn run_ok(args: &[&str]) -> String {
    let o = effx(args);
    assert!(o.status.success(), "effx {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `root` except the manifest, with its bytes.
pub fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    out.push((rel, std::fs::read(&p).unwrap()));
                }
            }
        }
    }
    out.sort();
    out
}

pub fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

pub fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}
