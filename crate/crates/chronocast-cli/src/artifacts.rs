//! Artifact plumbing shared by all commands.

use std::path::{Path, PathBuf};

use chronocast::{Error, Result};
use serde::Serialize;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Ensures the output directory exists and returns the path of one artifact
/// inside it.
pub fn artifact_path(out_dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    Ok(out_dir.join(name))
}

/// Writes text exactly as given (callers keep content deterministic).
pub fn write_text(out_dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = artifact_path(out_dir, name)?;
    std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(out_dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    write_text(out_dir, name, &json)
}
