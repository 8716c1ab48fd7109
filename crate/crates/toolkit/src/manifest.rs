//! Dataset manifests: `path,label,role` CSV files.
//!
//! Paths are relative to the manifest's own directory. Row order is
//! significant: it fixes the accumulation order of the MoN and the index of
//! each calibration entry.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mon_core::Label;

use crate::error::{Error, ManifestError, Result};

pub const HEADER: [&str; 3] = ["path", "label", "role"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Builds the model of normality (and calibrates it unless a held-out
    /// pool exists).
    MonBuild,
    Evaluate,
    /// Optional held-out calibration pool.
    Calibrate,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::MonBuild => "mon-build",
            Role::Evaluate => "evaluate",
            Role::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mon-build" => Ok(Role::MonBuild),
            "evaluate" => Ok(Role::Evaluate),
            "calibrate" => Ok(Role::Calibrate),
            other => Err(ManifestError::UnknownRole(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub path: String,
    pub label: Label,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    /// Directory entry paths are resolved against.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> + '_ {
        self.entries.iter().filter(move |e| e.role == role)
    }

    pub fn count(&self, role: Role) -> usize {
        self.with_role(role).count()
    }

    /// Path of the optional key-value sidecar next to a manifest file:
    /// `data/manifest.csv` -> `data/manifest.meta`.
    pub fn meta_path(manifest_path: &Path) -> PathBuf {
        manifest_path.with_extension("meta")
    }
}

fn parse_entry(record: &csv::StringRecord) -> Result<ManifestEntry, ManifestError> {
    if record.len() != HEADER.len() {
        return Err(ManifestError::FieldCount {
            expected: HEADER.len(),
            found: record.len(),
        });
    }
    let path = record[0].trim();
    if path.is_empty() {
        return Err(ManifestError::EmptyPath);
    }
    let label = match record[1].trim() {
        "normal" => Label::Normal,
        "anomalous" => Label::Anomalous,
        other => return Err(ManifestError::UnknownLabel(other.into())),
    };
    let role: Role = record[2].trim().parse()?;
    if label == Label::Anomalous && role != Role::Evaluate {
        return Err(ManifestError::AnomalousInPool {
            path: path.into(),
            role: role.as_str(),
        });
    }
    Ok(ManifestEntry {
        path: path.into(),
        label,
        role,
    })
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let manifest_err = |line: u64, kind| Error::Manifest {
        path: path.to_path_buf(),
        line,
        kind,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        None => {
            return Err(manifest_err(
                1,
                ManifestError::BadHeader {
                    expected: HEADER.join(","),
                    found: String::new(),
                },
            ))
        }
        Some(r) => r.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?,
    };
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(manifest_err(
            1,
            ManifestError::BadHeader {
                expected: HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            },
        ));
    }

    let mut entries = Vec::new();
    for record in records {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        entries.push(parse_entry(&record).map_err(|kind| manifest_err(line, kind))?);
    }
    Ok(DatasetManifest {
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
    })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).map_err(csv_err)?;
    for e in entries {
        w.write_record([e.path.as_str(), e.label.as_str(), e.role.as_str()])
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
