//! Pipeline configuration: a TOML file plus command-line overrides.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use effx_core::boost::{GbtConfig, LogitConfig, LEARNING_RATE_GRID, MAX_DEPTH_GRID, N_ESTIMATORS_GRID, SUBSAMPLE_GRID};
use effx_core::dea::{BootstrapConfig, CiMethod};
use effx_core::orderalpha::default_alpha_grid;
use effx_core::tabular::{Rts, Schema};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub groups: GroupLabels,
    #[serde(rename = "frontier")]
    pub frontiers: Vec<FrontierConfig>,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub sdtest: SdSection,
    #[serde(default)]
    pub outliers: OutlierSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker cap; 0 = all cores. Never affects results.
    #[serde(default)]
    pub jobs: usize,
}

fn default_out() -> PathBuf {
    PathBuf::from("effx-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Relative to the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_group")]
    pub group: String,
    /// Optional column of sub-population labels (e.g. country) for the
    /// per-stratum table rows.
    #[serde(default)]
    pub stratum: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

fn default_id() -> String {
    "id".into()
}

fn default_group() -> String {
    "group".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupLabels {
    pub a: String,
    pub b: String,
}

impl GroupLabels {
    pub fn both(&self) -> [&str; 2] {
        [&self.a, &self.b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierConfig {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default = "default_rts")]
    pub rts: Rts,
}

fn default_rts() -> Rts {
    Rts::Vrs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_boot_reps")]
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_ci")]
    pub ci: CiMethod,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Also run the CRS-vs-VRS bootstrap test per frontier and group.
    #[serde(default)]
    pub rts_test: bool,
}

fn default_boot_reps() -> usize {
    2000
}
fn default_level() -> f64 {
    0.95
}
fn default_ci() -> CiMethod {
    CiMethod::Basic
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection { reps: 2000, level: 0.95, ci: CiMethod::Basic, bandwidth: None, rts_test: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdSection {
    #[serde(default = "default_sd_reps")]
    pub reps: usize,
}

fn default_sd_reps() -> usize {
    1000
}

impl Default for SdSection {
    fn default() -> Self {
        SdSection { reps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierSection {
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
}

impl Default for OutlierSection {
    fn default() -> Self {
        OutlierSection { alpha_grid: default_alpha_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtGrid {
    #[serde(default = "grid_n")]
    pub n_estimators: Vec<usize>,
    #[serde(default = "grid_sub")]
    pub subsample: Vec<f64>,
    #[serde(default = "grid_depth")]
    pub max_depth: Vec<usize>,
    #[serde(default = "grid_lr")]
    pub learning_rate: Vec<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub min_child_cover: f64,
}

fn grid_n() -> Vec<usize> {
    N_ESTIMATORS_GRID.to_vec()
}
fn grid_sub() -> Vec<f64> {
    SUBSAMPLE_GRID.to_vec()
}
fn grid_depth() -> Vec<usize> {
    MAX_DEPTH_GRID.to_vec()
}
fn grid_lr() -> Vec<f64> {
    LEARNING_RATE_GRID.to_vec()
}
fn one() -> f64 {
    1.0
}

impl Default for GbtGrid {
    fn default() -> Self {
        GbtGrid {
            n_estimators: grid_n(),
            subsample: grid_sub(),
            max_depth: grid_depth(),
            learning_rate: grid_lr(),
            lambda: 1.0,
            gamma: 0.0,
            min_child_cover: 1.0,
        }
    }
}

impl GbtGrid {
    /// Cartesian product in the order estimators, subsample, depth, rate.
    pub fn configs(&self, seed: u64) -> Vec<GbtConfig> {
        let mut out = Vec::new();
        for &n in &self.n_estimators {
            for &s in &self.subsample {
                for &d in &self.max_depth {
                    for &lr in &self.learning_rate {
                        out.push(GbtConfig {
                            n_estimators: n,
                            subsample: s,
                            max_depth: d,
                            learning_rate: lr,
                            lambda: self.lambda,
                            gamma: self.gamma,
                            min_child_cover: self.min_child_cover,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Fixed binarization threshold; the pooled mean of TEBC when absent.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_true")]
    pub logit: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_profile_k")]
    pub profile_k: usize,
    #[serde(default)]
    pub gbt: GbtGrid,
}

fn default_folds() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_top_k() -> usize {
    30
}
fn default_profile_k() -> usize {
    12
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection { folds: 5, threshold: None, logit: true, top_k: 30, profile_k: 12, gbt: GbtGrid::default() }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves the data path against the file location, applies
    /// overrides and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.data.path.is_relative() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
            if cfg.out.is_relative() {
                cfg.out = dir.join(&cfg.out);
            }
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.reps {
            self.bootstrap.reps = r;
            self.sdtest.reps = r;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.groups.a == self.groups.b {
            return bad("group labels a and b must differ".into());
        }
        if self.frontiers.is_empty() {
            return bad("at least one [[frontier]] is required".into());
        }
        let mut names = HashSet::new();
        for f in &self.frontiers {
            if !valid_name(&f.name) {
                return bad(format!("frontier name '{}' must be non-empty ASCII letters, digits, '_' or '-'", f.name));
            }
            if !names.insert(&f.name) {
                return bad(format!("duplicate frontier name '{}'", f.name));
            }
            if f.inputs.is_empty() || f.outputs.is_empty() {
                return bad(format!("frontier '{}' needs inputs and outputs", f.name));
            }
            if f.inputs.iter().any(|c| f.outputs.contains(c)) {
                return bad(format!("frontier '{}' uses a column as both input and output", f.name));
            }
        }
        let b = &self.bootstrap;
        if b.reps < effx_core::dea::MIN_REPS {
            return bad(format!("bootstrap.reps must be at least {}", effx_core::dea::MIN_REPS));
        }
        if !(b.level > 0.0 && b.level < 1.0) {
            return bad("bootstrap.level must lie in (0, 1)".into());
        }
        if b.bandwidth.is_some_and(|h| !(h > 0.0)) {
            return bad("bootstrap.bandwidth must be positive".into());
        }
        if self.sdtest.reps < effx_core::sdtest::MIN_REPS {
            return bad(format!("sdtest.reps must be at least {}", effx_core::sdtest::MIN_REPS));
        }
        let grid = &self.outliers.alpha_grid;
        if grid.len() < 10 || grid.windows(2).any(|w| w[1] >= w[0]) || grid.iter().any(|&a| !(a > 0.0 && a <= 100.0)) {
            return bad("outliers.alpha_grid needs at least 10 strictly descending values in (0, 100]".into());
        }
        let e = &self.explain;
        if !(2..=20).contains(&e.folds) {
            return bad("explain.folds must lie in 2..=20".into());
        }
        if e.top_k == 0 || e.profile_k == 0 {
            return bad("explain.top_k and explain.profile_k must be positive".into());
        }
        let g = &e.gbt;
        if g.n_estimators.is_empty() || g.subsample.is_empty() || g.max_depth.is_empty() || g.learning_rate.is_empty() {
            return bad("every explain.gbt grid list must be non-empty".into());
        }
        for cfg in g.configs(0) {
            if cfg.n_estimators == 0
                || !(cfg.subsample > 0.0 && cfg.subsample <= 1.0)
                || cfg.max_depth == 0
                || !(cfg.learning_rate > 0.0)
            {
                return bad(format!("invalid GBT grid point {cfg:?}"));
            }
        }
        if !(g.lambda >= 0.0 && g.gamma >= 0.0 && g.min_child_cover >= 0.0) {
            return bad("explain.gbt lambda, gamma and min_child_cover must be nonnegative".into());
        }
        Ok(())
    }

    /// Union of frontier columns, in first-use order.
    pub fn schema(&self) -> Schema {
        let mut inputs: Vec<String> = Vec::new();
        let mut outputs: Vec<String> = Vec::new();
        for f in &self.frontiers {
            for c in &f.inputs {
                if !inputs.contains(c) {
                    inputs.push(c.clone());
                }
            }
            for c in &f.outputs {
                if !outputs.contains(c) {
                    outputs.push(c.clone());
                }
            }
        }
        Schema {
            id: self.data.id.clone(),
            group: self.data.group.clone(),
            inputs,
            outputs,
            covariates: self.data.covariates.clone(),
        }
    }

    pub fn bootstrap_config(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            reps: self.bootstrap.reps,
            level: self.bootstrap.level,
            seed,
            bandwidth: self.bootstrap.bandwidth,
            ci: self.bootstrap.ci,
            jobs: self.jobs,
        }
    }

    pub fn logit_grid(&self) -> Vec<LogitConfig> {
        LogitConfig::full_grid()
    }

    /// Hash of everything that can change results (not `out` or `jobs`).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.jobs = 0;
        c.data.path = PathBuf::from(self.data.path.file_name().unwrap_or_default());
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
