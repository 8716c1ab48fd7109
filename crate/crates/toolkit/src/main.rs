use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mon_core::{SynthConfig, ThresholdId};
use mon_toolkit::config::{apply_synth, parse_extent};
use mon_toolkit::format::sig9;
use mon_toolkit::kv::KeyValues;
use mon_toolkit::pipeline::{
    run_build, run_evaluate, run_score, run_synth, BuildOptions, EvalInput, RowFilter, Threads,
};
use mon_toolkit::{Error, Result, Role};

/// Model-of-normality anomaly scoring over feature tensors.
#[derive(Debug, Parser)]
#[command(name = "mon", version)]
struct Cli {
    /// Flat key=value file supplying defaults for any flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-image work: a count or `auto`.
    #[arg(long, global = true)]
    threads: Option<Threads>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a deterministic synthetic feature-tensor dataset.
    Synth(SynthArgs),
    /// Build the model of normality, calibration vectors and thresholds.
    #[command(name = "build-mon")]
    BuildMon(BuildArgs),
    /// Score manifest rows against a model artifact.
    Score(ScoreArgs),
    /// Write the per-threshold AUC report and the normalized scatter.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for tensors and manifest.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    /// Normal images for the mon-build pool.
    #[arg(long)]
    n_mon: Option<usize>,
    /// Normal images in the evaluation set.
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    n_anomalous: Option<usize>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Bump amplitude added to every channel of the anomalous region.
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    /// Bump extent as HxW.
    #[arg(long, value_parser = parse_extent)]
    extent: Option<(usize, usize)>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Artifact directory to write.
    #[arg(long, alias = "out")]
    artifact: Option<PathBuf>,
    /// Backbone identifier recorded in the artifact meta.
    #[arg(long)]
    backbone: Option<String>,
    /// Feature stage recorded in the artifact meta.
    #[arg(long)]
    stage: Option<String>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Score CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows to score: evaluate (default), mon-build, calibrate or all.
    #[arg(long)]
    role: Option<RowFilter>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Score CSV from `mon score`; alternative to --artifact with --manifest.
    #[arg(long, conflicts_with_all = ["artifact", "manifest"])]
    scores: Option<PathBuf>,
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scatter CSV to write; defaults to `<out stem>.scatter.csv`.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

/// Flag values layered over the `--config` file.
struct Settings {
    file: KeyValues,
}

impl Settings {
    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.file.get(key).map(PathBuf::from))
    }

    fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(flag, key)
            .ok_or_else(|| Error::Precondition(format!("--{} is required", key.replace('_', "-"))))
    }

    fn string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.file.get(key).map(str::to_string))
    }

    fn parsed<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get_parsed(key),
        }
    }
}

fn default_scatter(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.scatter.csv"))
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::new(),
    };
    let settings = Settings { file };
    let threads = settings.parsed(cli.threads, "threads")?.unwrap_or_default();

    match cli.command {
        Command::Synth(a) => {
            let out = settings.require_path(a.out, "out")?;
            let mut cfg = apply_synth(&settings.file, SynthConfig::default())?;
            if let Some(v) = a.seed {
                cfg.seed = v;
            }
            if let Some(v) = a.height {
                cfg.dims.height = v;
            }
            if let Some(v) = a.width {
                cfg.dims.width = v;
            }
            if let Some(v) = a.channels {
                cfg.dims.channels = v;
            }
            if let Some(v) = a.n_mon {
                cfg.n_normal_mon = v;
            }
            if let Some(v) = a.n_eval {
                cfg.n_normal_eval = v;
            }
            if let Some(v) = a.n_anomalous {
                cfg.n_anomalous = v;
            }
            if let Some(v) = a.sigma {
                cfg.noise_sigma = v;
            }
            if let Some(v) = a.amplitude {
                cfg.bump_amplitude = v;
            }
            if let Some(v) = a.extent {
                cfg.bump_extent = v;
            }
            let manifest = run_synth(&cfg, &out, threads)?;
            println!(
                "wrote {} tensors ({} mon-build, {} evaluate) of dims {} to {}",
                manifest.entries.len(),
                manifest.count(Role::MonBuild),
                manifest.count(Role::Evaluate),
                cfg.dims,
                out.display()
            );
        }
        Command::BuildMon(a) => {
            let manifest = settings.require_path(a.manifest, "manifest")?;
            let dir = settings
                .path(a.artifact, "artifact")
                .or_else(|| settings.path(None, "out"))
                .ok_or_else(|| Error::Precondition("--artifact is required".into()))?;
            let opts = BuildOptions {
                backbone: settings.string(a.backbone, "backbone"),
                stage: settings.string(a.stage, "stage"),
                threads,
                created_unix: None,
            };
            let art = run_build(&manifest, &dir, &opts)?;
            println!("N = {}", art.mon.n_source());
            println!("dims = {}", art.mon.dims());
            for (id, t) in art.thresholds.iter() {
                println!("{id} ({}) = {}", t.statistic, sig9(t.value));
            }
        }
        Command::Score(a) => {
            let artifact = settings.require_path(a.artifact, "artifact")?;
            let manifest = settings.require_path(a.manifest, "manifest")?;
            let out = settings.require_path(a.out, "out")?;
            let filter = settings
                .parsed(a.role, "role")?
                .unwrap_or(RowFilter::Only(Role::Evaluate));
            let (rows, timing) = run_score(&artifact, &manifest, &out, filter, threads)?;
            let flagged: Vec<String> = ThresholdId::ALL
                .iter()
                .map(|id| {
                    let n = rows
                        .iter()
                        .filter(|r| r.verdicts[id.index()].is_anomalous())
                        .count();
                    format!("{}={n}", id.short_name())
                })
                .collect();
            println!(
                "scored {} rows; anomalous: {}",
                rows.len(),
                flagged.join(" ")
            );
            println!("post-feature latency: {timing}");
        }
        Command::Evaluate(a) => {
            let out = settings.require_path(a.out, "out")?;
            let scatter = settings
                .path(a.scatter, "scatter")
                .unwrap_or_else(|| default_scatter(&out));
            let input = match settings.path(a.scores, "scores") {
                Some(p) => EvalInput::Scores(p),
                None => EvalInput::Model {
                    artifact: settings.require_path(a.artifact, "artifact")?,
                    manifest: settings.require_path(a.manifest, "manifest")?,
                },
            };
            let report = run_evaluate(&input, &out, &scatter, threads)?;
            for (id, r) in report.iter() {
                println!("{id}: auc {}", sig9(r.auc));
            }
            println!(
                "max_auc {} (best {}); sweep_auc max {} mean {}",
                sig9(report.max_auc),
                report.best(),
                sig9(report.sweep_auc_max),
                sig9(report.sweep_auc_mean)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
