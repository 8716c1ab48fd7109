//! Byte layout of `.mnt` tensor files.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `MONT`                  |
//! | 4      | 4    | format version, `u32` = 1     |
//! | 8      | 12   | height, width, channels `u32` |
//! | 20     | 4    | dtype code, `u32` = 1 (f32)   |
//! | 24     | 4·n  | `f32` payload, row-major hwc  |

use alloc::vec::Vec;

use thiserror::Error;

use crate::tensor::{Dims, FeatureTensor, TensorError};

pub const MAGIC: [u8; 4] = *b"MONT";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("truncated header: {0} bytes, need {HEADER_LEN}")]
    TruncatedHeader(usize),
    #[error("bad magic {0:02x?}, expected \"MONT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),
    #[error(
        "declared dims {height}x{width}x{channels} need {expected} payload bytes, found {actual}"
    )]
    PayloadMismatch {
        height: u32,
        width: u32,
        channels: u32,
        expected: u128,
        actual: usize,
    },
    #[error(transparent)]
    Invalid(#[from] TensorError),
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    let mut buf = [0u8; 4];
    buf.copy_from_slice(&bytes[offset..offset + 4]);
    u32::from_le_bytes(buf)
}

/// Serializes a tensor. Output is a pure function of the tensor.
///
/// Panics if a dimension does not fit in `u32`.
pub fn encode_tensor(tensor: &FeatureTensor) -> Vec<u8> {
    let dims = tensor.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * dims.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in [dims.height, dims.width, dims.channels] {
        let d = u32::try_from(d).expect("tensor dimension exceeds u32");
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    for v in tensor.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<FeatureTensor, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::TruncatedHeader(bytes.len()));
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let (height, width, channels) = (read_u32(bytes, 8), read_u32(bytes, 12), read_u32(bytes, 16));
    let dtype = read_u32(bytes, 20);
    if dtype != DTYPE_F32 {
        return Err(DecodeError::UnsupportedDtype(dtype));
    }
    let dims = Dims::new(height as usize, width as usize, channels as usize);
    if height == 0 || width == 0 || channels == 0 {
        return Err(TensorError::ZeroDim(dims).into());
    }

    let payload = &bytes[HEADER_LEN..];
    let expected = 4 * height as u128 * width as u128 * channels as u128;
    if expected != payload.len() as u128 {
        return Err(DecodeError::PayloadMismatch {
            height,
            width,
            channels,
            expected,
            actual: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FeatureTensor::new(dims, values)?)
}
