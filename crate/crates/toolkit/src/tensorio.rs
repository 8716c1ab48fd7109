//! `.mnt` tensor files on disk. The byte layout lives in [`mon_core::codec`].

use std::fs;
use std::path::Path;

use mon_core::{decode_tensor, encode_tensor, FeatureTensor};

use crate::error::{Error, Result};

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `tensor` to `path`, replacing any existing file.
pub fn write_tensor(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(tensor)).map_err(|e| Error::io(path, e))
}
