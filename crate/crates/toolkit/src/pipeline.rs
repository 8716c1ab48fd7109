//! The four pipeline stages behind the `mon` subcommands.
//!
//! Every stage computes its results in memory first and writes outputs last
//! through an [`OutputGuard`], so a failing stage leaves nothing behind.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mon_core::synth::SynthKind;
use mon_core::{
    build_mon, calibration_vectors, classify, compute_thresholds, distance_heatmap, encode_tensor,
    evaluate_verdicts, image_score, scatter_export, EvaluationReport, FeatureTensor, ImageScore,
    Label, LabeledScore, NormalityError, ScatterPoint, SynthConfig, ThresholdId, Verdict,
    GENERATOR_ALGORITHM,
};
use rayon::prelude::*;

use crate::artifact::{CalibrationPool, ModelArtifact};
use crate::error::{Error, Result};
use crate::format::{quantize, sig9};
use crate::kv::KeyValues;
use crate::manifest::{read_manifest, write_manifest, DatasetManifest, ManifestEntry, Role};
use crate::output::OutputGuard;
use crate::tensorio::read_tensor;

/// Worker count for per-image stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Fixed(n)),
            _ => Err(format!(
                "expected a positive integer or \"auto\", got {s:?}"
            )),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Fixed(n) => write!(f, "{n}"),
        }
    }
}

fn with_pool<T: Send>(threads: Threads, f: impl FnOnce() -> T + Send) -> T {
    let n = match threads {
        Threads::Auto => 0,
        Threads::Fixed(n) => n,
    };
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn read_entries(
    manifest: &DatasetManifest,
    entries: &[&ManifestEntry],
) -> Result<Vec<FeatureTensor>> {
    entries
        .par_iter()
        .map(|e| read_tensor(manifest.resolve(e)))
        .collect()
}

fn normality_err(
    manifest: &DatasetManifest,
    entries: &[&ManifestEntry],
    e: NormalityError,
) -> Error {
    let path = match &e {
        NormalityError::DimMismatch { index, .. } => manifest.resolve(entries[*index]),
        _ => manifest.base_dir.clone(),
    };
    Error::Normality { path, source: e }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub backbone: Option<String>,
    pub stage: Option<String>,
    pub threads: Threads,
    /// Fixed timestamp for the meta file; the current time when `None`.
    pub created_unix: Option<u64>,
}

/// Builds the MoN from the manifest's mon-build rows, calibrates it and
/// writes the artifact directory.
///
/// Calibration uses the mon-build pool itself unless the manifest has
/// `calibrate` rows, which then form a held-out pool.
pub fn run_build(
    manifest_path: &Path,
    artifact_dir: &Path,
    opts: &BuildOptions,
) -> Result<ModelArtifact> {
    let manifest = read_manifest(manifest_path)?;
    let pool_entries: Vec<&ManifestEntry> = manifest.with_role(Role::MonBuild).collect();
    if pool_entries.is_empty() {
        return Err(Error::Precondition(format!(
            "{} has no mon-build rows; at least one normal image is needed to build the model of normality",
            manifest_path.display()
        )));
    }
    let held_out: Vec<&ManifestEntry> = manifest.with_role(Role::Calibrate).collect();

    let artifact = with_pool(opts.threads, || -> Result<ModelArtifact> {
        let pool = read_entries(&manifest, &pool_entries)?;
        let mon = build_mon(&pool).map_err(|e| normality_err(&manifest, &pool_entries, e))?;
        let (calibration, kind) = if held_out.is_empty() {
            let c = calibration_vectors(&mon, &pool)
                .map_err(|e| normality_err(&manifest, &pool_entries, e))?;
            (c, CalibrationPool::MonBuild)
        } else {
            let cal = read_entries(&manifest, &held_out)?;
            let c = calibration_vectors(&mon, &cal)
                .map_err(|e| normality_err(&manifest, &held_out, e))?;
            (c, CalibrationPool::HeldOut)
        };
        let thresholds = compute_thresholds(&calibration)?;

        let sidecar = DatasetManifest::meta_path(manifest_path);
        let mut prov = if sidecar.is_file() {
            KeyValues::read(&sidecar)?
        } else {
            KeyValues::new()
        };
        if let Some(b) = &opts.backbone {
            prov.set("backbone", b.as_str());
        }
        if let Some(s) = &opts.stage {
            prov.set("stage", s.as_str());
        }
        for key in ["backbone", "stage"] {
            if prov.get(key).is_none() {
                prov.set(key, "unspecified");
            }
        }
        prov.set("manifest", manifest_path.display().to_string());
        let created = opts.created_unix.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        });
        Ok(ModelArtifact::new(
            mon,
            calibration,
            thresholds,
            kind,
            &prov,
            created,
        ))
    })?;

    artifact.save(artifact_dir)?;
    Ok(artifact)
}

/// Which manifest rows `score` processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFilter {
    Only(Role),
    All,
}

impl FromStr for RowFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "all" {
            return Ok(RowFilter::All);
        }
        s.parse::<Role>()
            .map(RowFilter::Only)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub source: String,
    pub label: Label,
    /// Scores rounded to their printed 9-digit value.
    pub score: ImageScore,
    pub verdicts: [Verdict; 6],
}

/// Per-image wall-clock time of the post-feature stage (heatmap, score and
/// six verdicts), in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub images: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

impl Timing {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Self {
            images: samples.len(),
            mean_s: mean,
            std_s: var.sqrt(),
        }
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} images, {:.6}±{:.6} (mean±std) seconds per image",
            self.images, self.mean_s, self.std_s
        )
    }
}

/// Scores one feature tensor against the artifact.
///
/// The score is quantized to its printed form before comparing against the
/// (also printed) thresholds, so rescoring the calibration pool is exactly
/// consistent with `max(D1)` and `max(D2)`.
pub fn score_tensor(
    artifact: &ModelArtifact,
    tensor: &FeatureTensor,
) -> std::result::Result<(ImageScore, [Verdict; 6]), NormalityError> {
    let raw = image_score(&distance_heatmap(tensor, &artifact.mon)?);
    let score = ImageScore {
        d_mean: quantize(raw.d_mean),
        d_max: quantize(raw.d_max),
    };
    let verdicts = ThresholdId::ALL.map(|id| classify(&score, &artifact.thresholds, id).verdict);
    Ok((score, verdicts))
}

pub fn score_manifest(
    artifact: &ModelArtifact,
    manifest: &DatasetManifest,
    filter: RowFilter,
    threads: Threads,
) -> Result<(Vec<ScoreRow>, Timing)> {
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| match filter {
            RowFilter::All => true,
            RowFilter::Only(role) => e.role == role,
        })
        .collect();
    if entries.is_empty() {
        let what = match filter {
            RowFilter::All => "rows".to_string(),
            RowFilter::Only(r) => format!("{r} rows"),
        };
        return Err(Error::Precondition(format!(
            "manifest has no {what} to score"
        )));
    }

    let results: Vec<(ScoreRow, f64)> = with_pool(threads, || {
        entries
            .par_iter()
            .map(|e| {
                let path = manifest.resolve(e);
                let tensor = read_tensor(&path)?;
                let start = Instant::now();
                let (score, verdicts) = score_tensor(artifact, &tensor)
                    .map_err(|source| Error::Normality { path, source })?;
                let elapsed = start.elapsed().as_secs_f64();
                Ok((
                    ScoreRow {
                        source: e.path.clone(),
                        label: e.label,
                        score,
                        verdicts,
                    },
                    elapsed,
                ))
            })
            .collect::<Result<_>>()
    })?;
    let samples: Vec<f64> = results.iter().map(|r| r.1).collect();
    Ok((
        results.into_iter().map(|r| r.0).collect(),
        Timing::from_samples(&samples),
    ))
}

fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields")
}

pub const SCORE_HEADER: [&str; 10] = [
    "source",
    "label",
    "d_mean",
    "d_max",
    "verdict_t1",
    "verdict_t2",
    "verdict_t3",
    "verdict_t4",
    "verdict_t5",
    "verdict_t6",
];

pub fn score_csv(rows: &[ScoreRow]) -> String {
    csv_text(
        &SCORE_HEADER,
        rows.iter().map(|r| {
            let mut fields = vec![
                r.source.clone(),
                r.label.to_string(),
                sig9(r.score.d_mean),
                sig9(r.score.d_max),
            ];
            fields.extend(r.verdicts.iter().map(|v| v.to_string()));
            fields
        }),
    )
}

pub fn parse_score_csv(text: &str, path: &Path) -> Result<Vec<ScoreRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |line: u64, message: String| {
        Error::Precondition(format!("{}:{line}: {message}", path.display()))
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SCORE_HEADER) {
        return Err(bad(
            1,
            format!("expected header {}", SCORE_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let label: Label = rec[1]
            .parse()
            .map_err(|e: mon_core::EvalError| bad(line, e.to_string()))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(line, format!("bad number {s:?}")))
        };
        let score = ImageScore::new(num(&rec[2])?, num(&rec[3])?)
            .ok_or_else(|| bad(line, "need 0 <= d_mean <= d_max".into()))?;
        let mut verdicts = [Verdict::Normal; 6];
        for (k, v) in verdicts.iter_mut().enumerate() {
            *v = match &rec[4 + k] {
                "normal" => Verdict::Normal,
                "anomalous" => Verdict::Anomalous,
                other => return Err(bad(line, format!("bad verdict {other:?}"))),
            };
        }
        rows.push(ScoreRow {
            source: rec[0].to_string(),
            label,
            score,
            verdicts,
        });
    }
    Ok(rows)
}

pub fn run_score(
    artifact_dir: &Path,
    manifest_path: &Path,
    out_csv: &Path,
    filter: RowFilter,
    threads: Threads,
) -> Result<(Vec<ScoreRow>, Timing)> {
    let artifact = ModelArtifact::load(artifact_dir)?;
    let manifest = read_manifest(manifest_path)?;
    let (rows, timing) = score_manifest(&artifact, &manifest, filter, threads)?;
    let mut guard = OutputGuard::new();
    write_with_parent(&mut guard, out_csv, score_csv(&rows))?;
    guard.commit();
    Ok((rows, timing))
}

fn write_with_parent(guard: &mut OutputGuard, path: &Path, contents: String) -> Result<()> {
    if let Some(parent) = path.parent() {
        guard.create_dir(parent)?;
    }
    guard.write(path, contents)
}

pub enum EvalInput {
    /// A CSV written by `score`; its verdict columns are used as-is.
    Scores(PathBuf),
    /// Score the manifest's evaluate rows against the artifact.
    Model {
        artifact: PathBuf,
        manifest: PathBuf,
    },
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .iter()
        .map(|(id, r)| {
            let c = r.confusion;
            vec![
                id.name().to_string(),
                c.true_pos.to_string(),
                c.false_pos.to_string(),
                c.true_neg.to_string(),
                c.false_neg.to_string(),
                sig9(r.auc),
            ]
        })
        .collect();
    for (name, v) in [
        ("max_auc", report.max_auc),
        ("sweep_auc_max", report.sweep_auc_max),
        ("sweep_auc_mean", report.sweep_auc_mean),
    ] {
        let mut row = vec![name.to_string()];
        row.extend(std::iter::repeat_n(String::new(), 4));
        row.push(sig9(v));
        rows.push(row);
    }
    csv_text(&["threshold", "tp", "fp", "tn", "fn", "auc"], rows)
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    csv_text(
        &["source", "label", "norm_mean", "norm_max"],
        points.iter().map(|p| {
            vec![
                p.source.clone(),
                p.label.to_string(),
                sig9(p.norm_mean),
                sig9(p.norm_max),
            ]
        }),
    )
}

pub fn evaluate_rows(rows: &[ScoreRow]) -> Result<(EvaluationReport, Vec<ScatterPoint>)> {
    let items: Vec<LabeledScore> = rows
        .iter()
        .map(|r| LabeledScore {
            score: r.score,
            label: r.label,
            source: r.source.clone(),
        })
        .collect();
    let verdicts: Vec<[Verdict; 6]> = rows.iter().map(|r| r.verdicts).collect();
    let report = evaluate_verdicts(&items, &verdicts)?;
    Ok((report, scatter_export(&items)))
}

pub fn run_evaluate(
    input: &EvalInput,
    report_out: &Path,
    scatter_out: &Path,
    threads: Threads,
) -> Result<EvaluationReport> {
    let rows = match input {
        EvalInput::Scores(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_score_csv(&text, path)?
        }
        EvalInput::Model { artifact, manifest } => {
            let artifact = ModelArtifact::load(artifact)?;
            let manifest = read_manifest(manifest)?;
            score_manifest(
                &artifact,
                &manifest,
                RowFilter::Only(Role::Evaluate),
                threads,
            )?
            .0
        }
    };
    let (report, scatter) = evaluate_rows(&rows)?;
    let mut guard = OutputGuard::new();
    write_with_parent(&mut guard, report_out, report_csv(&report))?;
    write_with_parent(&mut guard, scatter_out, scatter_csv(&scatter))?;
    guard.commit();
    Ok(report)
}

pub const MANIFEST_FILE: &str = "manifest.csv";

fn synth_file_name(kind: SynthKind, ordinal: usize) -> String {
    let prefix = match kind {
        SynthKind::MonBuild => "mon_build",
        SynthKind::EvalNormal => "eval_normal",
        SynthKind::Anomalous => "anomalous",
    };
    format!("{prefix}_{ordinal:04}.mnt")
}

pub fn synth_meta(config: &SynthConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("generator", GENERATOR_ALGORITHM);
    kv.set("backbone", "synthetic");
    kv.set("stage", "none");
    kv.set("seed", config.seed.to_string());
    kv.set("height", config.dims.height.to_string());
    kv.set("width", config.dims.width.to_string());
    kv.set("channels", config.dims.channels.to_string());
    kv.set("n_normal_mon", config.n_normal_mon.to_string());
    kv.set("n_normal_eval", config.n_normal_eval.to_string());
    kv.set("n_anomalous", config.n_anomalous.to_string());
    kv.set("noise_sigma", sig9(config.noise_sigma));
    kv.set("bump_amplitude", sig9(config.bump_amplitude));
    kv.set("bump_height", config.bump_extent.0.to_string());
    kv.set("bump_width", config.bump_extent.1.to_string());
    kv
}

/// Writes a synthetic dataset: one `.mnt` per image, `manifest.csv` and its
/// `manifest.meta` sidecar recording the generator and config.
pub fn run_synth(
    config: &SynthConfig,
    out_dir: &Path,
    threads: Threads,
) -> Result<DatasetManifest> {
    config.validate()?;
    let base = config.base()?;
    let plan = config.plan();
    let encoded: Vec<Vec<u8>> = with_pool(threads, || {
        plan.par_iter()
            .map(|item| config.generate(&base, item).map(|t| encode_tensor(&t)))
            .collect::<std::result::Result<_, _>>()
    })?;

    let entries: Vec<ManifestEntry> = plan
        .iter()
        .map(|item| {
            let (label, role) = match item.kind {
                SynthKind::MonBuild => (Label::Normal, Role::MonBuild),
                SynthKind::EvalNormal => (Label::Normal, Role::Evaluate),
                SynthKind::Anomalous => (Label::Anomalous, Role::Evaluate),
            };
            ManifestEntry {
                path: synth_file_name(item.kind, item.ordinal),
                label,
                role,
            }
        })
        .collect();

    let mut guard = OutputGuard::new();
    guard.create_dir(out_dir)?;
    for (entry, bytes) in entries.iter().zip(&encoded) {
        guard.write(out_dir.join(&entry.path), bytes)?;
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    guard.track(&manifest_path);
    write_manifest(&entries, &manifest_path)?;
    guard.write(
        DatasetManifest::meta_path(&manifest_path),
        synth_meta(config).to_text(),
    )?;
    guard.commit();
    Ok(DatasetManifest {
        base_dir: out_dir.to_path_buf(),
        entries,
    })
}
