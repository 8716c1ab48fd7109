//! Persisted model artifacts.
//!
//! An artifact is a directory holding four files:
//!
//! * `mon.mnt`: the model of normality tensor
//! * `calibration.csv`: `index,d_max,d_mean`, one row per calibration image
//! * `thresholds.csv`: `name,statistic,value`, six rows
//! * `meta.txt`: `key=value` provenance; `created_unix` is the only line
//!   that varies between identical builds

use std::fs;
use std::path::{Path, PathBuf};

use mon_core::{CalibrationVectors, Dims, ModelOfNormality, Statistic, ThresholdId, ThresholdSet};

use crate::error::{Error, Result};
use crate::format::sig9;
use crate::kv::KeyValues;
use crate::output::OutputGuard;
use crate::tensorio::{read_tensor, write_tensor};

pub const MON_FILE: &str = "mon.mnt";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const META_FILE: &str = "meta.txt";
pub const TIMESTAMP_KEY: &str = "created_unix";
pub const FORMAT_ID: &str = "mon-artifact/1";

/// Where the calibration vectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationPool {
    /// The same images that built the MoN.
    MonBuild,
    HeldOut,
}

impl CalibrationPool {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationPool::MonBuild => "mon-build",
            CalibrationPool::HeldOut => "held-out",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub mon: ModelOfNormality,
    pub calibration: CalibrationVectors,
    pub thresholds: ThresholdSet,
    pub meta: KeyValues,
}

impl ModelArtifact {
    /// Assembles an artifact with the standard meta keys. `provenance` keys
    /// (backbone, stage, manifest, ...) follow them; the creation timestamp
    /// goes last.
    pub fn new(
        mon: ModelOfNormality,
        calibration: CalibrationVectors,
        thresholds: ThresholdSet,
        pool: CalibrationPool,
        provenance: &KeyValues,
        created_unix: u64,
    ) -> Self {
        let d = mon.dims();
        let mut meta = KeyValues::new();
        meta.set("format", FORMAT_ID);
        meta.set("n", mon.n_source().to_string());
        meta.set("height", d.height.to_string());
        meta.set("width", d.width.to_string());
        meta.set("channels", d.channels.to_string());
        meta.set("n_calibration", calibration.len().to_string());
        meta.set("calibration_pool", pool.as_str());
        meta.set("std", "population");
        meta.set("tie_rule", "strictly-greater-is-anomalous");
        meta.set("number_format", "9-significant-digits");
        for (k, v) in provenance.iter() {
            if meta.get(k).is_none() && k != TIMESTAMP_KEY {
                meta.set(k, v);
            }
        }
        meta.set(TIMESTAMP_KEY, created_unix.to_string());
        Self {
            mon,
            calibration,
            thresholds,
            meta,
        }
    }

    pub fn calibration_csv(&self) -> String {
        let mut out = String::from("index,d_max,d_mean\n");
        for (i, (mx, mn)) in self
            .calibration
            .d_max()
            .iter()
            .zip(self.calibration.d_mean())
            .enumerate()
        {
            out.push_str(&format!("{i},{},{}\n", sig9(*mx), sig9(*mn)));
        }
        out
    }

    pub fn thresholds_csv(&self) -> String {
        let mut out = String::from("name,statistic,value\n");
        for (id, t) in self.thresholds.iter() {
            out.push_str(&format!(
                "{},{},{}\n",
                id.name(),
                t.statistic,
                sig9(t.value)
            ));
        }
        out
    }

    /// Writes the four files into `dir`, creating it if needed. On failure
    /// every file written so far is removed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut guard = OutputGuard::new();
        guard.create_dir(dir)?;
        let mon_path = dir.join(MON_FILE);
        guard.track(&mon_path);
        write_tensor(self.mon.tensor(), &mon_path)?;
        guard.write(dir.join(CALIBRATION_FILE), self.calibration_csv())?;
        guard.write(dir.join(THRESHOLDS_FILE), self.thresholds_csv())?;
        guard.write(dir.join(META_FILE), self.meta.to_text())?;
        guard.commit();
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::NotFound(dir.to_path_buf()));
        }
        let bad = |message: String| Error::artifact(dir, message);

        let meta = KeyValues::read(dir.join(META_FILE))?;
        let need = |key: &str| -> Result<usize> {
            meta.get_parsed::<usize>(key)?
                .ok_or_else(|| bad(format!("meta is missing {key}")))
        };
        let n = need("n")?;
        let meta_dims = Dims::new(need("height")?, need("width")?, need("channels")?);
        let n_calibration = need("n_calibration")?;

        let tensor = read_tensor(dir.join(MON_FILE))?;
        if tensor.dims() != meta_dims {
            return Err(bad(format!(
                "MoN dims {} differ from meta dims {meta_dims}",
                tensor.dims()
            )));
        }
        let mon =
            ModelOfNormality::from_parts(tensor, n).map_err(|e| bad(format!("meta n: {e}")))?;

        let calibration = read_calibration(&dir.join(CALIBRATION_FILE), dir)?;
        if calibration.len() != n_calibration {
            return Err(bad(format!(
                "{} calibration rows, meta n_calibration = {n_calibration}",
                calibration.len()
            )));
        }
        let thresholds = read_thresholds(&dir.join(THRESHOLDS_FILE), dir)?;
        Ok(Self {
            mon,
            calibration,
            thresholds,
            meta,
        })
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            source: csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("expected header {}", header.join(",")),
            )),
        });
    }
    reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)
}

fn parse_real(dir: &Path, file: &str, row: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::artifact(dir, format!("{file} row {row}: bad number {s:?}")))
}

fn read_calibration(path: &Path, dir: &Path) -> Result<CalibrationVectors> {
    let rows = read_rows(path, &["index", "d_max", "d_mean"])?;
    let mut d_max = Vec::with_capacity(rows.len());
    let mut d_mean = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r[0].parse::<usize>().ok() != Some(i) {
            return Err(Error::artifact(
                dir,
                format!(
                    "{CALIBRATION_FILE} row {i}: index {:?} out of sequence",
                    &r[0]
                ),
            ));
        }
        d_max.push(parse_real(dir, CALIBRATION_FILE, i, &r[1])?);
        d_mean.push(parse_real(dir, CALIBRATION_FILE, i, &r[2])?);
    }
    CalibrationVectors::new(d_max, d_mean).ok_or_else(|| {
        Error::artifact(
            dir,
            format!("{CALIBRATION_FILE}: need 0 <= d_mean <= d_max"),
        )
    })
}

fn read_thresholds(path: &Path, dir: &Path) -> Result<ThresholdSet> {
    let rows = read_rows(path, &["name", "statistic", "value"])?;
    if rows.len() != 6 {
        return Err(Error::artifact(
            dir,
            format!("{THRESHOLDS_FILE}: expected 6 rows, found {}", rows.len()),
        ));
    }
    let mut values = [0.0; 6];
    for (i, (r, id)) in rows.iter().zip(ThresholdId::ALL).enumerate() {
        if &r[0] != id.name() {
            return Err(Error::artifact(
                dir,
                format!(
                    "{THRESHOLDS_FILE} row {i}: expected {id}, found {:?}",
                    &r[0]
                ),
            ));
        }
        let stat: Statistic = r[1].parse()?;
        if stat != id.statistic() {
            return Err(Error::artifact(
                dir,
                format!(
                    "{THRESHOLDS_FILE}: {id} gates {}, not {stat}",
                    id.statistic()
                ),
            ));
        }
        values[i] = parse_real(dir, THRESHOLDS_FILE, i, &r[2])?;
    }
    ThresholdSet::from_values(values)
        .ok_or_else(|| Error::artifact(dir, format!("{THRESHOLDS_FILE}: negative threshold")))
}

/// The artifact files in a fixed order, for byte comparisons.
pub fn artifact_files(dir: &Path) -> [PathBuf; 4] {
    [MON_FILE, CALIBRATION_FILE, THRESHOLDS_FILE, META_FILE].map(|f| dir.join(f))
}
