//! Anomaly scoring against a model of normality.
//!
//! A model of normality (MoN) is the element-wise mean of the deep feature
//! tensors of `N` anomaly-free images. Every other image is compared to it
//! position by position, giving an `H×W` Euclidean distance heatmap that is
//! summarized as `(d_mean, d_max)`. The same `N` images, scored against their
//! own MoN, give the calibration vectors from which six closed-form working
//! point thresholds are derived.
//!
//! This crate holds the arithmetic only and needs nothing beyond `alloc`.
//! File IO, manifests and the command line live in `mon-toolkit`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod codec;
pub mod evaluation;
pub mod normality;
pub mod synth;
pub mod tensor;
pub mod threshold;

pub use codec::{decode_tensor, encode_tensor, DecodeError, HEADER_LEN, MAGIC};
pub use evaluation::{
    confusion, evaluate_all, evaluate_verdicts, operating_point_auc, scatter_export, sweep_auc,
    ConfusionCounts, EvalError, EvaluationReport, Label, LabeledScore, ScatterPoint,
    ThresholdResult,
};
pub use normality::{
    build_mon, calibration_vectors, distance_heatmap, image_score, score_image, CalibrationVectors,
    DistanceHeatmap, ImageScore, ModelOfNormality, NormalityError,
};
pub use synth::{
    generate_anomalous, generate_normal, SynthConfig, SynthError, SynthItem, SynthKind,
    GENERATOR_ALGORITHM,
};
pub use tensor::{Dims, FeatureTensor, TensorError};
pub use threshold::{
    classify, compute_thresholds, Decision, Statistic, Threshold, ThresholdError, ThresholdId,
    ThresholdSet, Verdict,
};
