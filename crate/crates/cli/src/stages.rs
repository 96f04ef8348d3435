//! The five pipeline stages. Each stage writes into its own directory under
//! the output root and is keyed by a hash of the settings it reads plus the
//! stamps of the stages it consumes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use effx_core::boost::{self, CvReport, GbtConfig, LogitConfig};
use effx_core::dea::{self, BootstrapResult};
use effx_core::orderalpha::{self, TrimComparison, WHOLE_SAMPLE};
use effx_core::sdtest::{self, DominanceOrder};
use effx_core::stats::{self, Describe};
use effx_core::tabular::{self, DmuPanel, FrontierSpec, Orientation, Rts, ThresholdMode};
use effx_core::{rng, treeshap};
use log::info;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, read_json, StageStamp, StageTiming, StageWriter};
use crate::config::{sha256_hex, FrontierConfig, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::tables::{self, num, Csv, PanelARow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Stage {
    Dea,
    Sdtest,
    Outliers,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Dea, Stage::Sdtest, Stage::Outliers, Stage::Explain, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Dea => "dea",
            Stage::Sdtest => "sdtest",
            Stage::Outliers => "outliers",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

/// Per-group scores as stored by the dea stage and read by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub frontier: String,
    pub group: String,
    pub rts: Rts,
    pub seed: u64,
    pub strata: Vec<String>,
    pub result: BootstrapResult,
    pub rts_test: Option<dea::RtsTestResult>,
}

impl ScoreFile {
    pub fn tebc(&self) -> Vec<f64> {
        self.result.estimates.iter().map(|e| e.tebc).collect()
    }
}

struct Loaded {
    panel: DmuPanel,
    strata: Option<Vec<String>>,
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub root: PathBuf,
    pub force: bool,
    pub data_hash: String,
    config_hash: String,
    loaded: Option<Loaded>,
}

fn score_name(f: &str, g: &str) -> String {
    format!("scores_{}_{}.json", f, file_label(g))
}

/// Group labels as they appear in file names.
pub fn file_label(g: &str) -> String {
    g.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn stratum_label(strata: Option<&[String]>, i: usize) -> &str {
    strata.map(|s| s[i].as_str()).unwrap_or(WHOLE_SAMPLE)
}

/// `Whole sample` followed by the sorted distinct labels.
fn stratum_groups(strata: Option<&[String]>, n: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![(WHOLE_SAMPLE.to_string(), (0..n).collect())];
    if let Some(labels) = strata {
        let mut distinct: Vec<&String> = labels.iter().collect();
        distinct.sort();
        distinct.dedup();
        for d in distinct {
            out.push((d.clone(), (0..n).filter(|&i| &labels[i] == d).collect()));
        }
    }
    out
}

fn pick(xs: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| xs[i]).collect()
}

impl Context {
    pub fn new(cfg: PipelineConfig, force: bool) -> CliResult<Self> {
        let bytes = std::fs::read(&cfg.data.path).map_err(CliError::io(&cfg.data.path))?;
        Ok(Context {
            root: cfg.out.clone(),
            data_hash: sha256_hex(&bytes),
            config_hash: cfg.hash(),
            cfg,
            force,
            loaded: None,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn load(&mut self, stage: &'static str) -> CliResult<&Loaded> {
        if self.loaded.is_none() {
            let schema = self.cfg.schema();
            let panel = tabular::load_csv(&self.cfg.data.path, &schema).map_err(CliError::stage(stage, "loading data"))?;
            let strata = match &self.cfg.data.stratum {
                Some(col) => Some(read_labels(&self.cfg.data.path, col).map_err(CliError::stage(stage, "loading strata"))?),
                None => None,
            };
            if strata.as_ref().is_some_and(|s| s.len() != panel.n()) {
                return Err(CliError::Stage {
                    stage,
                    context: "loading strata".into(),
                    source: effx_core::Error::invalid("stratum column length differs from panel"),
                });
            }
            self.loaded = Some(Loaded { panel, strata });
        }
        Ok(self.loaded.as_ref().expect("just loaded"))
    }

    fn seed(&self, path: &[u64]) -> u64 {
        rng::derive_seed(self.cfg.seed, path)
    }

    /// Bootstrap seed of frontier `fi`, group `gi`; shared by the outlier rerun.
    fn dea_seed(&self, fi: usize, gi: usize) -> u64 {
        self.seed(&[Stage::Dea.tag(), fi as u64, gi as u64])
    }

    fn key_of<T: Serialize>(&self, stage: Stage, settings: &T, upstream: &[&StageStamp]) -> String {
        #[derive(Serialize)]
        struct Key<'a, T> {
            stage: &'a str,
            version: &'a str,
            seed: u64,
            data: &'a str,
            settings: &'a T,
            upstream: Vec<String>,
        }
        let k = Key {
            stage: stage.name(),
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.seed,
            data: &self.data_hash,
            settings,
            upstream: upstream.iter().map(|s| s.digest()).collect(),
        };
        sha256_hex(serde_json::to_string(&k).expect("key serializes").as_bytes())
    }

    fn dea_key(&self) -> String {
        let c = &self.cfg;
        let settings = (&c.data.id, &c.data.group, &c.data.stratum, &c.data.covariates, &c.groups, &c.frontiers, &c.bootstrap);
        self.key_of(Stage::Dea, &settings, &[])
    }

    /// The dea stamp, provided it is current.
    fn dea_stamp(&self, stage: &'static str) -> CliResult<StageStamp> {
        artifacts::valid_stamp(&self.root, "dea", &self.dea_key()).ok_or_else(|| CliError::Upstream {
            stage,
            message: format!("run the dea stage first (no current stamp in {})", self.root.join("dea").display()),
        })
    }

    /// Key of `stage`; fails if a required upstream stage is missing or stale.
    pub fn key(&self, stage: Stage) -> CliResult<String> {
        let c = &self.cfg;
        Ok(match stage {
            Stage::Dea => self.dea_key(),
            Stage::Sdtest => self.key_of(stage, &(&c.sdtest, &c.groups), &[&self.dea_stamp("sdtest")?]),
            Stage::Outliers => self.key_of(stage, &(&c.outliers, &c.bootstrap), &[&self.dea_stamp("outliers")?]),
            Stage::Explain => self.key_of(stage, &c.explain, &[&self.dea_stamp("explain")?]),
            Stage::Report => {
                let dea = self.dea_stamp("report")?;
                let mut ups = vec![dea];
                for s in [Stage::Sdtest, Stage::Outliers, Stage::Explain] {
                    if let Some(st) = self.current_stamp(s) {
                        ups.push(st);
                    }
                }
                self.key_of(stage, &(), &ups.iter().collect::<Vec<_>>())
            }
        })
    }

    /// The stamp of `stage` if it exists and matches the current key.
    pub fn current_stamp(&self, stage: Stage) -> Option<StageStamp> {
        let key = self.key(stage).ok()?;
        artifacts::valid_stamp(&self.root, stage.name(), &key)
    }

    /// Runs `stage` unless a current stamp exists.
    pub fn run(&mut self, stage: Stage) -> CliResult<StageTiming> {
        let key = self.key(stage)?;
        if !self.force && artifacts::valid_stamp(&self.root, stage.name(), &key).is_some() {
            info!("{}: cached", stage.name());
            return Ok(StageTiming { stage: stage.name().into(), key, cached: true, seconds: 0.0 });
        }
        info!("{}: running", stage.name());
        let start = Instant::now();
        std::fs::create_dir_all(&self.root).map_err(CliError::io(&self.root))?;
        let mut w = StageWriter::new(&self.root, stage.name())?;
        match stage {
            Stage::Dea => self.run_dea(&mut w)?,
            Stage::Sdtest => self.run_sdtest(&mut w)?,
            Stage::Outliers => self.run_outliers(&mut w)?,
            Stage::Explain => self.run_explain(&mut w)?,
            Stage::Report => self.run_report(&mut w)?,
        }
        w.finish(key.clone())?;
        let seconds = start.elapsed().as_secs_f64();
        info!("{}: done in {seconds:.2}s", stage.name());
        Ok(StageTiming { stage: stage.name().into(), key, cached: false, seconds })
    }

    fn spec_for(&self, panel: &DmuPanel, f: &FrontierConfig) -> FrontierSpec {
        let idx = |names: &[String], c: &String| names.iter().position(|n| n == c).expect("schema covers frontier");
        FrontierSpec {
            orientation: Orientation::Output,
            rts: f.rts,
            input_columns: f.inputs.iter().map(|c| idx(&panel.input_names, c)).collect(),
            output_columns: f.outputs.iter().map(|c| idx(&panel.output_names, c)).collect(),
        }
    }

    fn scores(&self, stage: &'static str, f: &str, g: &str) -> CliResult<ScoreFile> {
        read_json(&self.root, &format!("dea/{}", score_name(f, g)), stage)
    }

    fn run_dea(&mut self, w: &mut StageWriter) -> CliResult<()> {
        self.load("dea")?;
        let cfg = self.cfg.clone();
        let loaded = self.loaded.as_ref().expect("loaded");
        let panel = &loaded.panel;
        let groups = cfg.groups.both();
        for (fi, f) in cfg.frontiers.iter().enumerate() {
            let spec = self.spec_for(panel, f);
            let mut panel_a = Vec::new();
            let mut strata_rows = Vec::new();
            let mut files = Vec::new();
            for (gi, g) in groups.iter().enumerate() {
                let ctx = format!("frontier {}, group {g}", f.name);
                let members: Vec<usize> = (0..panel.n()).filter(|&i| panel.records[i].group == *g).collect();
                let sub = panel.split_by_group(g).map_err(CliError::stage("dea", ctx.clone()))?;
                let strata: Vec<String> =
                    members.iter().map(|&i| stratum_label(loaded.strata.as_deref(), i).to_string()).collect();
                let seed = self.dea_seed(fi, gi);
                let result = dea::smoothed_bootstrap(&sub, &spec, &cfg.bootstrap_config(seed))
                    .map_err(CliError::stage("dea", ctx.clone()))?;
                let rts_test = if cfg.bootstrap.rts_test {
                    let t = dea::rts_test(&sub, &spec, cfg.bootstrap.reps, rng::derive_seed(seed, &[0x75]), cfg.jobs)
                        .map_err(CliError::stage("dea", format!("{ctx}, returns-to-scale test")))?;
                    Some(t)
                } else {
                    None
                };
                let file = ScoreFile {
                    frontier: f.name.clone(),
                    group: g.to_string(),
                    rts: f.rts,
                    seed,
                    strata,
                    result,
                    rts_test,
                };
                w.write(&format!("scores_{}_{}.csv", f.name, file_label(g)), scores_csv(&file))?;
                w.write_json(&score_name(&f.name, g), &file)?;
                let est = &file.result.estimates;
                let mean_of = |get: fn(&dea::EfficiencyEstimate) -> f64| stats::mean(&est.iter().map(get).collect::<Vec<_>>());
                panel_a.push(PanelARow {
                    label: g.to_string(),
                    te: mean_of(|e| e.te),
                    tebc: mean_of(|e| e.tebc),
                    ci_low: mean_of(|e| e.ci_low),
                    ci_high: mean_of(|e| e.ci_high),
                    performance: file.result.diagnostics.mean_performance,
                    n: est.len(),
                });
                let tebc = file.tebc();
                let labels = loaded.strata.as_ref().map(|_| file.strata.clone());
                for (label, idx) in stratum_groups(labels.as_deref(), tebc.len()) {
                    strata_rows.push((g.to_string(), label, Describe::of(&pick(&tebc, &idx))));
                }
                files.push(file);
            }
            w.write(&format!("table_{}_panel_a.csv", f.name), tables::panel_a(&panel_a))?;
            w.write(&format!("table_{}_strata.csv", f.name), tables::strata(&strata_rows))?;

            let mut dens = Csv::new(&tables::DENSITY_HEADER);
            for file in &files {
                let (grid, d) = stats::kde_grid(&file.tebc(), 512);
                for (x, y) in grid.iter().zip(&d) {
                    dens.row(&[file.group.clone(), num(*x), num(*y)]);
                }
            }
            w.write(&format!("density_{}.csv", f.name), dens.finish())?;
            w.write(&format!("differences_{}.csv", f.name), differences(&files[0], &files[1], loaded.strata.is_some()))?;
        }
        let summary = tabular::group_summary(panel, &cfg.groups.a, &cfg.groups.b).map_err(CliError::stage("dea", "group summary"))?;
        w.write("group_summary.csv", summary.to_csv())?;
        w.write("group_summary.md", summary.render_table())?;
        w.write_json("group_summary.json", &summary)?;
        Ok(())
    }

    fn run_sdtest(&mut self, w: &mut StageWriter) -> CliResult<()> {
        let cfg = self.cfg.clone();
        let (a, b) = (&cfg.groups.a, &cfg.groups.b);
        let names: Vec<String> = cfg.frontiers.iter().map(|f| f.name.clone()).collect();
        let mut records = Vec::new();
        // [direction][row] -> cells in column order
        let mut cells = vec![vec![Vec::new(); 3]; 2];
        for (fi, f) in cfg.frontiers.iter().enumerate() {
            let sa = self.scores("sdtest", &f.name, a)?.tebc();
            let sb = self.scores("sdtest", &f.name, b)?.tebc();
            for order in [DominanceOrder::First, DominanceOrder::Second] {
                for (dir, (x, y, hx, hy)) in [(&sa, &sb, a, b), (&sb, &sa, b, a)].into_iter().enumerate() {
                    let seed = self.seed(&[Stage::Sdtest.tag(), fi as u64, order as u64, dir as u64]);
                    let ctx = format!("frontier {}, order {}, H0 {hx} dominates {hy}", f.name, order as u8);
                    let r = sdtest::sd_test(x, y, order, cfg.sdtest.reps, seed).map_err(CliError::stage("sdtest", ctx))?;
                    cells[dir][0].push(num(r.statistic));
                    cells[dir][1].push(num(r.critical_value));
                    cells[dir][2].push(num(r.p_value));
                    records.push(SdRecord {
                        frontier: f.name.clone(),
                        order: order as u8,
                        null_hypothesis: format!("{hx} dominates {hy}"),
                        statistic: r.statistic,
                        critical_value: r.critical_value,
                        p_value: r.p_value,
                        reps: r.reps,
                        seed,
                    });
                }
            }
            let grid = sdtest::pooled_grid(&sa, &sb);
            let mut c = Csv::new(&tables::CDF_HEADER);
            for &z in &grid {
                c.row(&[
                    num(z),
                    num(sdtest::ecdf(&sa, z)),
                    num(sdtest::ecdf(&sb, z)),
                    num(sdtest::integrated_cdf(&sa, z)),
                    num(sdtest::integrated_cdf(&sb, z)),
                ]);
            }
            w.write(&format!("cdf_{}.csv", f.name), c.finish())?;
        }
        let mut t5 = Csv::new(&tables::table5_header(&names));
        for (dir, h0) in [format!("{a} dominates {b}"), format!("{b} dominates {a}")].iter().enumerate() {
            for (ri, row) in tables::TABLE5_ROWS.iter().enumerate() {
                let mut fields = vec![h0.clone(), row.to_string()];
                fields.extend(cells[dir][ri].iter().cloned());
                t5.row(&fields);
            }
        }
        w.write("table5.csv", t5.finish())?;
        w.write_json("sdtest.json", &records)?;
        Ok(())
    }

    fn run_outliers(&mut self, w: &mut StageWriter) -> CliResult<()> {
        self.load("outliers")?;
        let cfg = self.cfg.clone();
        let panel = &self.loaded.as_ref().expect("loaded").panel;
        let has_strata = cfg.data.stratum.is_some();
        let groups = cfg.groups.both();
        let mut summary = Vec::new();
        let mut c1 = Csv::new(&tables::c1_header(&cfg.groups.a, &cfg.groups.b));
        for (fi, f) in cfg.frontiers.iter().enumerate() {
            let spec = self.spec_for(panel, f);
            let mut per_group: Vec<TrimComparison> = Vec::new();
            for (gi, g) in groups.iter().enumerate() {
                let ctx = format!("frontier {}, group {g}", f.name);
                let scores = self.scores("outliers", &f.name, g)?;
                let sub = panel.split_by_group(g).map_err(CliError::stage("outliers", ctx.clone()))?;
                let projected = orderalpha::project(&sub, &spec).map_err(CliError::stage("outliers", ctx.clone()))?;
                let curve = orderalpha::super_share_curve(&projected, &cfg.outliers.alpha_grid)
                    .map_err(CliError::stage("outliers", ctx.clone()))?;
                w.write(&format!("curve_{}_{}.csv", f.name, file_label(g)), curve.to_csv())?;
                let strata = has_strata.then_some(scores.strata.as_slice());
                let boot = cfg.bootstrap_config(self.dea_seed(fi, gi));
                let cmp = orderalpha::trim_compare(&sub, &spec, &scores.result.estimates, curve.chosen_alpha, &boot, strata)
                    .map_err(CliError::stage("outliers", ctx))?;
                summary.push(OutlierRecord {
                    frontier: f.name.clone(),
                    group: g.to_string(),
                    chosen_alpha: curve.chosen_alpha,
                    jump_size: curve.jump_size,
                    flagged_ids: curve.flagged.iter().map(|&i| sub.records[i].id.clone()).collect(),
                    comparison: cmp.clone(),
                });
                per_group.push(cmp);
            }
            let mut labels: Vec<String> = Vec::new();
            for cmp in &per_group {
                for r in &cmp.rows {
                    if !labels.contains(&r.stratum) {
                        labels.push(r.stratum.clone());
                    }
                }
            }
            labels[1..].sort();
            for label in labels {
                let mut fields = vec![f.name.clone(), label.clone()];
                for cmp in &per_group {
                    match cmp.rows.iter().find(|r| r.stratum == label) {
                        Some(r) => fields.extend([num(r.difference_pct), r.delta_n.to_string()]),
                        None => fields.extend(["NA".to_string(), "NA".to_string()]),
                    }
                }
                c1.row(&fields);
            }
        }
        w.write("tableC1.csv", c1.finish())?;
        w.write_json("outliers.json", &summary)?;
        Ok(())
    }

    fn run_explain(&mut self, w: &mut StageWriter) -> CliResult<()> {
        if self.cfg.data.covariates.is_empty() {
            return Err(CliError::Config("the explain stage needs data.covariates".into()));
        }
        self.load("explain")?;
        let cfg = self.cfg.clone();
        let panel = &self.loaded.as_ref().expect("loaded").panel;
        let names = panel.covariate_names.clone();
        let e = &cfg.explain;
        let grid = e.gbt.configs(0);
        let mode = e.threshold.map(ThresholdMode::Explicit).unwrap_or(ThresholdMode::RegionalMean);
        let mut a1 = Csv::new(&tables::A1_HEADER);
        let mut summary = Vec::new();
        for (fi, f) in cfg.frontiers.iter().enumerate() {
            let files = [self.scores("explain", &f.name, &cfg.groups.a)?, self.scores("explain", &f.name, &cfg.groups.b)?];
            let pooled: Vec<f64> = files.iter().flat_map(|s| s.tebc()).collect();
            let threshold = match mode {
                ThresholdMode::RegionalMean => stats::mean(&pooled),
                ThresholdMode::Explicit(t) => t,
            };
            let labels = tabular::binarize_efficiency(&pooled, mode).map_err(CliError::stage("explain", f.name.clone()))?;
            let mut offset = 0;
            for (gi, file) in files.iter().enumerate() {
                let g = &file.group;
                let ctx = format!("frontier {}, group {g}", f.name);
                let n = file.result.estimates.len();
                let y = labels[offset..offset + n].to_vec();
                offset += n;
                let positives = y.iter().filter(|&&v| v == 1).count();
                if positives == 0 || positives == n {
                    return Err(CliError::Stage {
                        stage: "explain",
                        context: ctx,
                        source: effx_core::Error::invalid(format!(
                            "labels for stratum '{g}' are all {} after binarizing at {threshold}",
                            u8::from(positives == n)
                        )),
                    });
                }
                let sub = panel.split_by_group(g).map_err(CliError::stage("explain", ctx.clone()))?;
                let x = sub.covariate_matrix();
                let ids: Vec<String> = sub.records.iter().map(|r| r.id.clone()).collect();
                let seed = self.seed(&[Stage::Explain.tag(), fi as u64, gi as u64]);
                let gbt = boost::grid_search(&x, &y, &grid, e.folds, seed).map_err(CliError::stage("explain", ctx.clone()))?;
                let stem = format!("{}_{}", f.name, file_label(g));
                let model_label = format!("{} - {g}", f.name);
                w.write(&format!("cv_{stem}.csv"), gbt_cv_csv(&gbt.report))?;
                w.write(&format!("model_{stem}.json"), gbt.model.to_json().map_err(CliError::stage("explain", ctx.clone()))?)?;
                let shap = treeshap::shap_matrix(&gbt.model, &x).map_err(CliError::stage("explain", ctx.clone()))?;
                let ranking = treeshap::ranking_from(&shap, &names);
                w.write(&format!("ranking_{stem}.csv"), ranking.to_csv(e.top_k))?;
                w.write(&format!("shap_{stem}.csv"), shap_csv(&ids, &names, &shap))?;
                let (max, min) = treeshap::extreme_profiles_from(&shap, &x, &ids, &names, e.profile_k)
                    .map_err(CliError::stage("explain", ctx.clone()))?;
                w.write_json(&format!("profiles_{stem}.json"), &Profiles { tie_rule: treeshap::PROFILE_TIE_RULE.into(), max, min })?;
                a1.row(&a1_row("GBT", &model_label, gbt_params(&gbt.report.chosen), &gbt.report));

                let logit = if e.logit {
                    let s = boost::logit_grid_search(&x, &y, &cfg.logit_grid(), e.folds, rng::derive_seed(seed, &[0x10]))
                        .map_err(CliError::stage("explain", format!("{ctx}, logit")))?;
                    w.write(&format!("cv_logit_{stem}.csv"), logit_cv_csv(&s.report))?;
                    w.write_json(&format!("logit_{stem}.json"), &s.model)?;
                    a1.row(&a1_row("Logit", &model_label, logit_params(&s.report.chosen), &s.report));
                    Some(s.report)
                } else {
                    None
                };
                summary.push(ExplainRecord {
                    frontier: f.name.clone(),
                    group: g.clone(),
                    threshold,
                    rows: n,
                    positives,
                    seed,
                    gbt: gbt.report,
                    logit,
                });
            }
        }
        w.write("tableA1.csv", a1.finish())?;
        w.write_json("explain.json", &summary)?;
        Ok(())
    }

    fn run_report(&mut self, w: &mut StageWriter) -> CliResult<()> {
        let cfg = &self.cfg;
        let root = &self.root;
        let mut md = String::from("# Efficiency report\n\n");
        md.push_str(&format!("Groups: {} vs {}. Seed: {}.\n\n", cfg.groups.a, cfg.groups.b, cfg.seed));
        md.push_str("## Efficiency scores\n\n");
        for f in &cfg.frontiers {
            md.push_str(&format!("### {} (panel A)\n\n", f.name));
            md.push_str(&csv_to_markdown(&root.join(format!("dea/table_{}_panel_a.csv", f.name)), "report")?);
            md.push_str(&format!("\n### {} by stratum (TEBC)\n\n", f.name));
            md.push_str(&csv_to_markdown(&root.join(format!("dea/table_{}_strata.csv", f.name)), "report")?);
            md.push('\n');
        }
        md.push_str("## Group summary\n\nNon-significant differences (10% level) in bold.\n\n");
        md.push_str(&std::fs::read_to_string(root.join("dea/group_summary.md")).map_err(|e| CliError::Upstream {
            stage: "report",
            message: e.to_string(),
        })?);
        if self.current_stamp(Stage::Sdtest).is_some() {
            md.push_str("\n## Stochastic dominance\n\n");
            md.push_str(&csv_to_markdown(&root.join("sdtest/table5.csv"), "report")?);
        }
        if self.current_stamp(Stage::Outliers).is_some() {
            md.push_str("\n## Outlier trimming\n\n");
            md.push_str(&csv_to_markdown(&root.join("outliers/tableC1.csv"), "report")?);
        }
        if self.current_stamp(Stage::Explain).is_some() {
            md.push_str("\n## Classifier validation\n\n");
            md.push_str(&csv_to_markdown(&root.join("explain/tableA1.csv"), "report")?);
            for f in &cfg.frontiers {
                for g in cfg.groups.both() {
                    md.push_str(&format!("\n### Top features: {} - {g}\n\n", f.name));
                    let path = root.join(format!("explain/ranking_{}_{}.csv", f.name, file_label(g)));
                    md.push_str(&csv_to_markdown_head(&path, "report", 10)?);
                }
            }
        }
        w.write("report.md", md)
    }
}

/// Reads one text column of the data file, in row order.
fn read_labels(path: &Path, column: &str) -> effx_core::Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| effx_core::Error::Schema(format!("unknown column '{column}'")))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v = rec.get(idx).unwrap_or("").trim();
        if v.is_empty() {
            return Err(effx_core::Error::Data { row: i + 2, column: column.into(), message: "empty stratum label".into() });
        }
        out.push(v.to_string());
    }
    Ok(out)
}

fn scores_csv(file: &ScoreFile) -> Vec<u8> {
    let mut c = Csv::new(&tables::SCORES_HEADER);
    for (i, e) in file.result.estimates.iter().enumerate() {
        c.row(&[
            e.dmu_id.clone(),
            file.group.clone(),
            file.strata[i].clone(),
            num(e.te_farrell),
            num(e.te),
            num(e.tebc),
            num(e.bias),
            num(e.ci_low),
            num(e.ci_high),
            num(file.result.diagnostics.performance[i]),
        ]);
    }
    c.finish()
}

fn differences(a: &ScoreFile, b: &ScoreFile, by_stratum: bool) -> Vec<u8> {
    let (ta, tb) = (a.tebc(), b.tebc());
    let ga = stratum_groups(by_stratum.then_some(a.strata.as_slice()), ta.len());
    let gb = stratum_groups(by_stratum.then_some(b.strata.as_slice()), tb.len());
    let mut c = Csv::new(&tables::DIFFERENCES_HEADER);
    for (label, ia) in &ga {
        let Some((_, ib)) = gb.iter().find(|(l, _)| l == label) else { continue };
        let (xa, xb) = (pick(&ta, ia), pick(&tb, ib));
        let (ma, mb) = (stats::mean(&xa), stats::mean(&xb));
        let p = tabular::welch_t_test(&xa, &xb).map(|t| t.1);
        c.row(&[
            label.clone(),
            num(ma),
            num(mb),
            num(ma - mb),
            p.map(num).unwrap_or_else(|| "NA".into()),
            p.map(|p| if p < tabular::SUMMARY_LEVEL { "yes" } else { "no" }).unwrap_or("untestable").to_string(),
        ]);
    }
    c.finish()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdRecord {
    pub frontier: String,
    pub order: u8,
    pub null_hypothesis: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub frontier: String,
    pub group: String,
    pub chosen_alpha: f64,
    pub jump_size: f64,
    pub flagged_ids: Vec<String>,
    pub comparison: TrimComparison,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainRecord {
    pub frontier: String,
    pub group: String,
    pub threshold: f64,
    pub rows: usize,
    pub positives: usize,
    pub seed: u64,
    pub gbt: CvReport<GbtConfig>,
    pub logit: Option<CvReport<LogitConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profiles {
    pub tie_rule: String,
    pub max: treeshap::LocalProfile,
    pub min: treeshap::LocalProfile,
}

fn gbt_params(c: &GbtConfig) -> String {
    format!(
        "n_estimators={}; subsample={}; max_depth={}; learning_rate={}",
        c.n_estimators, c.subsample, c.max_depth, c.learning_rate
    )
}

fn logit_params(c: &LogitConfig) -> String {
    format!("penalty={:?}; C={}", c.penalty, c.c)
}

fn a1_row<C>(arm: &str, model: &str, params: String, r: &CvReport<C>) -> Vec<String> {
    let chosen = &r.rows[r.chosen_index];
    vec![
        arm.into(),
        model.into(),
        params,
        num(r.holdout_auroc),
        num(r.holdout_auprc),
        num(chosen.mean_auroc),
        num(chosen.mean_auprc),
    ]
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";")
}

fn gbt_cv_csv(r: &CvReport<GbtConfig>) -> Vec<u8> {
    let mut c = Csv::new(&[
        "index", "n_estimators", "subsample", "max_depth", "learning_rate", "mean_auroc", "mean_auprc", "fold_auroc",
        "fold_auprc", "chosen",
    ]);
    for (i, row) in r.rows.iter().enumerate() {
        let k = &row.config;
        c.row(&[
            i.to_string(),
            k.n_estimators.to_string(),
            num(k.subsample),
            k.max_depth.to_string(),
            num(k.learning_rate),
            num(row.mean_auroc),
            num(row.mean_auprc),
            joined(&row.fold_auroc),
            joined(&row.fold_auprc),
            u8::from(i == r.chosen_index).to_string(),
        ]);
    }
    c.finish()
}

fn logit_cv_csv(r: &CvReport<LogitConfig>) -> Vec<u8> {
    let mut c = Csv::new(&["index", "penalty", "C", "mean_auroc", "mean_auprc", "fold_auroc", "fold_auprc", "chosen"]);
    for (i, row) in r.rows.iter().enumerate() {
        c.row(&[
            i.to_string(),
            format!("{:?}", row.config.penalty),
            num(row.config.c),
            num(row.mean_auroc),
            num(row.mean_auprc),
            joined(&row.fold_auroc),
            joined(&row.fold_auprc),
            u8::from(i == r.chosen_index).to_string(),
        ]);
    }
    c.finish()
}

fn shap_csv(ids: &[String], names: &[String], shap: &[treeshap::ShapVector]) -> Vec<u8> {
    let mut header = vec!["id".to_string(), "phi0".to_string()];
    header.extend(names.iter().cloned());
    header.push("total".into());
    let mut c = Csv::new(&header);
    for (id, s) in ids.iter().zip(shap) {
        let mut fields = vec![id.clone(), num(s.phi0)];
        fields.extend(s.phi.iter().map(|&v| num(v)));
        fields.push(num(s.total()));
        c.row(&fields);
    }
    c.finish()
}

fn fmt_cell(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains('.') || s.contains('e') => format!("{v:.4}"),
        _ => s.to_string(),
    }
}

fn csv_to_markdown(path: &Path, stage: &'static str) -> CliResult<String> {
    csv_to_markdown_head(path, stage, usize::MAX)
}

fn csv_to_markdown_head(path: &Path, stage: &'static str, limit: usize) -> CliResult<String> {
    let up = |e: csv::Error| CliError::Upstream { stage, message: format!("{}: {e}", path.display()) };
    let mut rdr = csv::Reader::from_path(path).map_err(up)?;
    let headers = rdr.headers().map_err(up)?.clone();
    let mut out = format!("| {} |\n|{}\n", headers.iter().collect::<Vec<_>>().join(" | "), "---|".repeat(headers.len()));
    for rec in rdr.records().take(limit) {
        let rec = rec.map_err(up)?;
        out.push_str(&format!("| {} |\n", rec.iter().map(fmt_cell).collect::<Vec<_>>().join(" | ")));
    }
    Ok(out)
}

/// Every default left open by the method description, as recorded in the manifest.
pub fn defaults(cfg: &PipelineConfig) -> BTreeMap<String, String> {
    let b = &cfg.bootstrap;
    let g = &cfg.explain.gbt;
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("dea.orientation", "output".into());
    put("dea.efficient_tolerance", dea::EFFICIENT_TOL.to_string());
    put("lp.method", "dense two-phase simplex, Bland's rule".into());
    put("lp.pivot_tolerance", effx_core::linprog::PIVOT_TOL.to_string());
    put("lp.residual_tolerance", effx_core::linprog::RESIDUAL_TOL.to_string());
    put("bootstrap.scheme", "smoothed homogeneous, reflection about 1, variance-corrected".into());
    put(
        "bootstrap.bandwidth_rule",
        b.bandwidth.map(|h| format!("fixed {h}")).unwrap_or_else(|| "Silverman on reflected sample".into()),
    );
    put("bootstrap.ci", format!("{:?}", b.ci).to_lowercase());
    put("bootstrap.level", b.level.to_string());
    put("bootstrap.reps", b.reps.to_string());
    put("bootstrap.performance", "3 bias^2 / variance on the Farrell scale".into());
    put("bootstrap.rts_test", b.rts_test.to_string());
    put("rts_test.statistic", "mean(theta_crs / theta_vrs)".into());
    put("quantile.convention", "linear interpolation (type 7)".into());
    put("order_alpha.quantile", "ceiling rank".into());
    put("order_alpha.super_threshold", orderalpha::SUPER_THRESHOLD.to_string());
    put("order_alpha.grid", cfg.outliers.alpha_grid.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","));
    put("sdtest.reps", cfg.sdtest.reps.to_string());
    put("sdtest.p_value", "(1 + #{T* >= T}) / (1 + B)".into());
    put("sdtest.resampling", "pooled-sample bootstrap".into());
    put("summary.test", "Welch two-sided t-test at 10%".into());
    put("kde", "Gaussian kernel, Silverman bandwidth, 512 points".into());
    put("rng", "ChaCha8 streams seeded by SplitMix64 path hashing".into());
    put("binarize.threshold", cfg.explain.threshold.map(|t| t.to_string()).unwrap_or_else(|| "pooled regional mean".into()));
    put("gbt.lambda", g.lambda.to_string());
    put("gbt.gamma", g.gamma.to_string());
    put("gbt.min_child_cover", g.min_child_cover.to_string());
    put("gbt.base_score", "prior log-odds".into());
    put("gbt.split_finding", "exact greedy".into());
    put("cv.folds", cfg.explain.folds.to_string());
    put("cv.holdout", "stratified 80/20".into());
    put("cv.selection", "mean AUROC, ties by mean AUPRC".into());
    put("logit.objective", "mean log loss + penalty / C".into());
    put("treeshap.variant", "path-dependent, margin scale".into());
    put("treeshap.profile_ties", treeshap::PROFILE_TIE_RULE.into());
    m
}
