//! Command-line surface and dispatch.
//!
//! Exit codes: 0 success, 1 total failure (every batch entry errored, or a
//! self-test check failed), 2 usage error.

use crate::commands;
use crate::manifest::Manifest;
use crate::report::RunReport;
use crate::UsageError;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use navgeom::config::PipelineConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "navgeom",
    about = "Street-scene navigation data pipeline: annotation geometry, trajectory conditioning, flow masking, and evaluation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for all random substreams (overrides the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent batch entries.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    /// Override one config field, e.g. --set mask_ratio=0.2 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonOpts {
    fn load_config(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::read_json(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        for entry in &self.overrides {
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got {entry:?}")))?;
            config
                .apply_override(key.trim(), value.trim())
                .map_err(|e| UsageError(e.to_string()))?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Annotate manifest entries: occupancy grid, planned path, trajectory.
    Annotate {
        /// Batch manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (one subdirectory per entry).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit Plücker maps and z-buffered constraint frames along annotated
    /// trajectories.
    Condition {
        /// Batch manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory produced by `annotate`.
        #[arg(long)]
        annotations: PathBuf,
        /// Output directory (one subdirectory per entry).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Magnitude + top-k salient mask per optical-flow file.
    Flowmask {
        /// .flo files or directories containing them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Mask ratio; defaults to the config value.
        #[arg(long)]
        ratio: Option<f64>,
        /// Output directory for masks and the summary.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a scripted policy over an episode manifest and report metrics.
    Eval {
        /// Episodes manifest JSON.
        #[arg(long)]
        episodes: PathBuf,
        /// oracle | noisy-oracle | greedy-straight
        #[arg(long)]
        policy: String,
        /// Waypoint noise std-dev for noisy-oracle, meters.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Metric report output path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build alignment positives plus deranged negative pairings.
    SwapNegatives {
        /// Batch manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Output JSONL path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the bundled synthetic-scene oracle suite.
    Selftest {
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// Returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            if err.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {err:#}");
                2
            } else {
                eprintln!("error: {err:#}");
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Annotate {
            manifest,
            out,
            common,
        } => {
            let config = common.load_config()?;
            let (manifest, base) = Manifest::load(&manifest).map_err(usage_from_manifest)?;
            let out = commands::ensure_out_dir(&out)?;
            let mut report = RunReport::new("annotate", config.seed);
            commands::annotate::run(&manifest, &base, &config, &out, common.jobs, &mut report)?;
            finish_batch(report, &out)
        }
        Command::Condition {
            manifest,
            annotations,
            out,
            common,
        } => {
            let config = common.load_config()?;
            let (manifest, base) = Manifest::load(&manifest).map_err(usage_from_manifest)?;
            let out = commands::ensure_out_dir(&out)?;
            let mut report = RunReport::new("condition", config.seed);
            commands::condition::run(
                &manifest,
                &base,
                &annotations,
                &config,
                &out,
                common.jobs,
                &mut report,
            )?;
            finish_batch(report, &out)
        }
        Command::Flowmask {
            inputs,
            ratio,
            out,
            common,
        } => {
            let config = common.load_config()?;
            let ratio = ratio.unwrap_or(config.mask_ratio);
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(UsageError(format!("ratio {ratio} outside (0, 1]")).into());
            }
            let files = commands::flowmask::collect_inputs(&inputs)?;
            if files.is_empty() {
                return Err(UsageError("no .flo inputs found".into()).into());
            }
            let out = commands::ensure_out_dir(&out)?;
            let mut report = RunReport::new("flowmask", config.seed);
            commands::flowmask::run(&files, ratio, &out, common.jobs, &mut report)?;
            finish_batch(report, &out)
        }
        Command::Eval {
            episodes,
            policy,
            sigma,
            out,
            common,
        } => {
            let config = common.load_config()?;
            let report = commands::eval::run(
                &episodes,
                &policy,
                sigma,
                config.seed,
                config.deviation_samples,
                &out,
            )?;
            println!(
                "eval: {} episodes, SR(0.1)={:.3} SR(0.2)={:.3} SR(0.3)={:.3} TR(mean)={:.4}",
                report.episode_count, report.sr_010, report.sr_020, report.sr_030, report.tr_mean
            );
            Ok(0)
        }
        Command::SwapNegatives {
            manifest,
            out,
            common,
        } => {
            let config = common.load_config()?;
            let (manifest, _) = Manifest::load(&manifest).map_err(usage_from_manifest)?;
            let count = commands::swap::run(&manifest, config.seed, &out)?;
            println!("swap-negatives: wrote {count} samples to {}", out.display());
            Ok(0)
        }
        Command::Selftest { common } => {
            let config = common.load_config()?;
            let ok = commands::selftest::run(config.seed)?;
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Structural manifest problems (bad JSON, duplicate ids) are usage errors.
fn usage_from_manifest(err: anyhow::Error) -> anyhow::Error {
    UsageError(format!("{err:#}")).into()
}

fn finish_batch(report: RunReport, out: &std::path::Path) -> Result<i32> {
    report.write(&out.join("run_report.json"))?;
    println!("{}", report.summarize());
    for entry in &report.entries {
        if let Some(reason) = &entry.reason {
            println!("  {}: {:?} ({reason})", entry.id, entry.status);
        }
    }
    Ok(if report.total_failure() { 1 } else { 0 })
}
