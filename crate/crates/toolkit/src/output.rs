use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Tracks files and directories written by one command. Unless
/// [`OutputGuard::commit`] is called, dropping the guard deletes them, so a
/// failed command leaves no partial outputs behind.
#[derive(Debug, Default)]
pub struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates `dir` and any missing parents; only directories created here
    /// are removed on rollback.
    pub fn create_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        // innermost first, so rollback can remove them in order
        self.dirs.extend(missing);
        Ok(())
    }

    pub fn track(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    pub fn write(&mut self, path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = path.as_ref();
        self.track(path);
        fs::write(path, contents).map_err(|e| Error::io(path, e))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in &self.dirs {
            let _ = fs::remove_dir(d);
        }
    }
}
