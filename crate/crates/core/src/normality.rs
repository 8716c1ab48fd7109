//! Model of normality, distance heatmaps, image scores and calibration
//! vectors.

use alloc::vec::Vec;

use thiserror::Error;

use crate::tensor::{Dims, FeatureTensor};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalityError {
    #[error("no feature tensors supplied")]
    Empty,
    #[error("dimension mismatch at input {index}: expected {expected}, got {actual}")]
    DimMismatch {
        index: usize,
        expected: Dims,
        actual: Dims,
    },
    #[error("model of normality needs n_source >= 1")]
    ZeroSource,
}

/// Element-wise mean of the feature tensors of `n_source` normal images.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOfNormality {
    tensor: FeatureTensor,
    n_source: usize,
}

impl ModelOfNormality {
    /// Wraps an already averaged tensor, e.g. one loaded from disk.
    pub fn from_parts(tensor: FeatureTensor, n_source: usize) -> Result<Self, NormalityError> {
        if n_source == 0 {
            return Err(NormalityError::ZeroSource);
        }
        Ok(Self { tensor, n_source })
    }

    pub fn tensor(&self) -> &FeatureTensor {
        &self.tensor
    }

    pub fn dims(&self) -> Dims {
        self.tensor.dims()
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }
}

/// `H×W` map of per-position Euclidean distances over the channel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHeatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DistanceHeatmap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, h: usize, w: usize) -> f64 {
        self.values[h * self.width + w]
    }

    /// Builds a heatmap from raw values. Returns `None` if the length does not
    /// match, the map is empty, or any value is negative or non-finite.
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Option<Self> {
        let valid = height > 0
            && width > 0
            && values.len() == height * width
            && values.iter().all(|v| v.is_finite() && *v >= 0.0);
        valid.then_some(Self {
            height,
            width,
            values,
        })
    }
}

/// Mean and maximum of a distance heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageScore {
    pub d_mean: f64,
    pub d_max: f64,
}

impl ImageScore {
    /// Returns `None` unless `0 <= d_mean <= d_max` and both are finite.
    pub fn new(d_mean: f64, d_max: f64) -> Option<Self> {
        let valid = d_mean.is_finite() && d_max.is_finite() && d_mean >= 0.0 && d_mean <= d_max;
        valid.then_some(Self { d_mean, d_max })
    }
}

/// Per-image `d_max` and `d_mean` of the calibration pool, in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationVectors {
    d_max: Vec<f64>,
    d_mean: Vec<f64>,
}

impl CalibrationVectors {
    /// Returns `None` if the lengths differ or any pair violates
    /// `0 <= d_mean[i] <= d_max[i]`.
    pub fn new(d_max: Vec<f64>, d_mean: Vec<f64>) -> Option<Self> {
        let valid = d_max.len() == d_mean.len()
            && d_max
                .iter()
                .zip(&d_mean)
                .all(|(&mx, &mn)| ImageScore::new(mn, mx).is_some());
        valid.then_some(Self { d_max, d_mean })
    }

    pub fn from_scores(scores: &[ImageScore]) -> Self {
        Self {
            d_max: scores.iter().map(|s| s.d_max).collect(),
            d_mean: scores.iter().map(|s| s.d_mean).collect(),
        }
    }

    pub fn d_max(&self) -> &[f64] {
        &self.d_max
    }

    pub fn d_mean(&self) -> &[f64] {
        &self.d_mean
    }

    pub fn len(&self) -> usize {
        self.d_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_max.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = ImageScore> + '_ {
        self.d_max
            .iter()
            .zip(&self.d_mean)
            .map(|(&d_max, &d_mean)| ImageScore { d_mean, d_max })
    }
}

fn check_dims<'a, I>(expected: Dims, features: I) -> Result<(), NormalityError>
where
    I: IntoIterator<Item = &'a FeatureTensor>,
{
    for (index, t) in features.into_iter().enumerate() {
        if t.dims() != expected {
            return Err(NormalityError::DimMismatch {
                index,
                expected,
                actual: t.dims(),
            });
        }
    }
    Ok(())
}

/// Averages the feature tensors of the normal pool.
///
/// Accumulates in `f64` sequentially in input order, then divides by `N` and
/// rounds to `f32`. The result is a deterministic function of the input order.
pub fn build_mon(features: &[FeatureTensor]) -> Result<ModelOfNormality, NormalityError> {
    let first = features.first().ok_or(NormalityError::Empty)?;
    let dims = first.dims();
    check_dims(dims, features)?;

    let mut acc = alloc::vec![0.0f64; dims.len()];
    for t in features {
        for (a, &v) in acc.iter_mut().zip(t.values()) {
            *a += v as f64;
        }
    }
    let n = features.len() as f64;
    let mean = acc.into_iter().map(|s| (s / n) as f32).collect();
    // mean of finite f32 values stays finite and in range
    let tensor = FeatureTensor::new(dims, mean).expect("mean of valid tensors is valid");
    Ok(ModelOfNormality {
        tensor,
        n_source: features.len(),
    })
}

pub fn distance_heatmap(
    image: &FeatureTensor,
    mon: &ModelOfNormality,
) -> Result<DistanceHeatmap, NormalityError> {
    let dims = mon.dims();
    if image.dims() != dims {
        return Err(NormalityError::DimMismatch {
            index: 0,
            expected: dims,
            actual: image.dims(),
        });
    }
    let values = image
        .pixels()
        .zip(mon.tensor().pixels())
        .map(|(a, m)| {
            let sq: f64 = a
                .iter()
                .zip(m)
                .map(|(&x, &y)| {
                    let d = x as f64 - y as f64;
                    d * d
                })
                .sum();
            libm::sqrt(sq)
        })
        .collect();
    Ok(DistanceHeatmap {
        height: dims.height,
        width: dims.width,
        values,
    })
}

pub fn image_score(heatmap: &DistanceHeatmap) -> ImageScore {
    let values = heatmap.values();
    let sum: f64 = values.iter().sum();
    let d_max = values.iter().copied().fold(0.0f64, f64::max);
    // rounding in the sum can push the mean a hair above a constant max
    let d_mean = (sum / values.len() as f64).min(d_max);
    ImageScore { d_mean, d_max }
}

/// Convenience for `image_score(&distance_heatmap(image, mon)?)`.
pub fn score_image(
    image: &FeatureTensor,
    mon: &ModelOfNormality,
) -> Result<ImageScore, NormalityError> {
    Ok(image_score(&distance_heatmap(image, mon)?))
}

/// Scores every image of the normal pool against the MoN, in pool order.
pub fn calibration_vectors(
    mon: &ModelOfNormality,
    normal_features: &[FeatureTensor],
) -> Result<CalibrationVectors, NormalityError> {
    if normal_features.is_empty() {
        return Err(NormalityError::Empty);
    }
    check_dims(mon.dims(), normal_features)?;
    let scores: Vec<ImageScore> = normal_features
        .iter()
        .map(|t| score_image(t, mon))
        .collect::<Result<_, _>>()?;
    Ok(CalibrationVectors::from_scores(&scores))
}
