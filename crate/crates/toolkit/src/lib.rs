//! File formats and the batch pipeline around `mon-core`.
//!
//! * [`tensorio`]: `.mnt` tensor files
//! * [`manifest`]: `path,label,role` dataset manifests
//! * [`artifact`]: persisted model of normality, calibration and thresholds
//! * [`pipeline`]: the `synth`, `build-mon`, `score` and `evaluate` stages

pub mod artifact;
pub mod config;
pub mod error;
pub mod format;
pub mod kv;
pub mod manifest;
pub mod output;
pub mod pipeline;
pub mod tensorio;

pub use artifact::ModelArtifact;
pub use error::{Error, ManifestError, Result};
pub use manifest::{read_manifest, DatasetManifest, ManifestEntry, Role};
pub use tensorio::{read_tensor, write_tensor};
