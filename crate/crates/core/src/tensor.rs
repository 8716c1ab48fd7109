use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Spatial and channel extent of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    /// Number of spatial positions, `height * width`.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("tensor dims must be positive, got {0}")]
    ZeroDim(Dims),
    #[error("tensor {dims} needs {expected} values, got {actual}")]
    LengthMismatch {
        dims: Dims,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f32 },
}

/// Dense `H×W×C` feature map, row-major in `(h, w, c)` order.
///
/// Construction checks that every dim is positive, that the value count
/// matches, and that all values are finite. The fields are private so a
/// `FeatureTensor` that exists is always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    dims: Dims,
    values: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(dims: Dims, values: Vec<f32>) -> Result<Self, TensorError> {
        if dims.height == 0 || dims.width == 0 || dims.channels == 0 {
            return Err(TensorError::ZeroDim(dims));
        }
        if values.len() != dims.len() {
            return Err(TensorError::LengthMismatch {
                dims,
                expected: dims.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFinite { index, value });
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Dims) -> Result<Self, TensorError> {
        Self::new(dims, alloc::vec![0.0; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Channel vector at spatial position `(h, w)`.
    pub fn pixel(&self, h: usize, w: usize) -> &[f32] {
        let c = self.dims.channels;
        let start = (h * self.dims.width + w) * c;
        &self.values[start..start + c]
    }

    pub fn get(&self, h: usize, w: usize, c: usize) -> f32 {
        self.pixel(h, w)[c]
    }

    /// Iterator over the channel vectors of every spatial position, row-major.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dims.channels)
    }
}
