//! Command-line pipeline: DEA scores, dominance tests, outlier screening and
//! classifier explanations, written under a fixed output layout.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;
pub mod tables;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use effx_core::dea;
use effx_core::tabular::{self, FrontierSpec, Orientation};

use crate::artifacts::{RunManifest, StageTiming};
use crate::config::{Overrides, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::stages::{Context, Stage};

#[derive(Debug, Parser)]
#[command(name = "effx", version, about = "Two-stage efficiency analytics")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bootstrap and dominance-test replications.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Rerun stages even when their cached outputs are current.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Efficiency scores per frontier and group.
    Dea {
        /// Also write the envelopment program of this DMU in LP text format.
        #[arg(long, value_name = "ID")]
        dump_lp: Option<String>,
    },
    /// Stochastic dominance tests between the groups.
    Sdtest,
    /// Order-alpha outlier screening and trimmed rerun.
    Outliers,
    /// Classifier grid search, SHAP rankings and profiles.
    Explain,
    /// Markdown report from existing stage outputs.
    Report,
    /// All stages in order.
    Pipeline {
        /// Stop after this stage.
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dea { .. } => "dea",
            Command::Sdtest => "sdtest",
            Command::Outliers => "outliers",
            Command::Explain => "explain",
            Command::Report => "report",
            Command::Pipeline { .. } => "pipeline",
        }
    }

    fn stages(&self) -> Vec<Stage> {
        match self {
            Command::Dea { .. } => vec![Stage::Dea],
            Command::Sdtest => vec![Stage::Sdtest],
            Command::Outliers => vec![Stage::Outliers],
            Command::Explain => vec![Stage::Explain],
            Command::Report => vec![Stage::Report],
            Command::Pipeline { stage } => {
                let last = stage.unwrap_or(Stage::Report);
                Stage::ALL.into_iter().filter(|s| *s <= last).collect()
            }
        }
    }
}

/// Parses the config, runs the requested stages and writes the manifest.
pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let overrides = Overrides { seed: cli.seed, reps: cli.reps, out: cli.out.clone(), jobs: cli.jobs };
    let cfg = PipelineConfig::load(path, &overrides)?;
    let jobs = cfg.jobs;
    effx_core::rng::with_jobs(jobs, || run_config(cfg, cli))
}

fn run_config(cfg: PipelineConfig, cli: &Cli) -> CliResult<RunManifest> {
    let mut ctx = Context::new(cfg, cli.force)?;
    let mut timings: Vec<StageTiming> = Vec::new();
    for stage in cli.command.stages() {
        timings.push(ctx.run(stage)?);
    }
    if let Command::Dea { dump_lp: Some(id) } = &cli.command {
        dump_lp(&ctx.cfg, id)?;
    }
    let mut outputs = std::collections::BTreeMap::new();
    for stage in Stage::ALL {
        if let Some(stamp) = ctx.current_stamp(stage) {
            outputs.extend(stamp.outputs);
        }
    }
    let mut manifest = RunManifest {
        tool: "effx".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        config_hash: ctx.config_hash().into(),
        data_hash: ctx.data_hash.clone(),
        seed: ctx.cfg.seed,
        defaults: stages::defaults(&ctx.cfg),
        stages: timings,
        outputs,
        manifest_hash: String::new(),
    };
    manifest.seal();
    manifest.write(&ctx.root)?;
    Ok(manifest)
}

/// Writes `debug/lp_<frontier>_<id>.lp`: the envelopment program of one DMU
/// against its own group, for cross-checking with an external solver.
fn dump_lp(cfg: &PipelineConfig, id: &str) -> CliResult<()> {
    let panel = tabular::load_csv(&cfg.data.path, &cfg.schema()).map_err(CliError::stage("dea", "loading data"))?;
    let Some(rec) = panel.records.iter().find(|r| r.id == id) else {
        return Err(CliError::Stage {
            stage: "dea",
            context: "--dump-lp".into(),
            source: effx_core::Error::invalid(format!("no DMU with id '{id}'")),
        });
    };
    let sub = panel.split_by_group(&rec.group).map_err(CliError::stage("dea", "--dump-lp"))?;
    let dir = cfg.out.join("debug");
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    for f in &cfg.frontiers {
        let pos = |names: &[String], c: &String| names.iter().position(|n| n == c).expect("schema covers frontier");
        let spec = FrontierSpec {
            orientation: Orientation::Output,
            rts: f.rts,
            input_columns: f.inputs.iter().map(|c| pos(&sub.input_names, c)).collect(),
            output_columns: f.outputs.iter().map(|c| pos(&sub.output_names, c)).collect(),
        };
        let (xs, ys) = spec.extract(&sub);
        let i = sub.records.iter().position(|r| r.id == id).expect("id in own group");
        let lp = dea::envelopment_program(&xs, &ys, &xs[i], &ys[i], f.rts);
        let path = dir.join(format!("lp_{}_{}.lp", f.name, stages::file_label(id)));
        std::fs::write(&path, lp.to_lp_text()).map_err(CliError::io(&path))?;
    }
    Ok(())
}
