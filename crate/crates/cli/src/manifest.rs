//! Machine-readable run manifests, one per subcommand.
//!
//! Paths are relative to the output directory and nothing time- or
//! host-dependent is recorded, so identical runs give identical manifests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::{io_err, Result};

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    /// Digest of the effective configuration (after flag overrides).
    pub config_sha256: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `path` relative to `base` with `/` separators, or the path as given when
/// it lies elsewhere.
pub fn display_path(base: &Path, path: &Path) -> String {
    let Ok(rel) = path.strip_prefix(base) else {
        return path.to_string_lossy().into_owned();
    };
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

pub fn file_entry(out_dir: &Path, path: &Path) -> Result<FileEntry> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(FileEntry { path: display_path(out_dir, path), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
}

pub fn entries(out_dir: &Path, paths: &[PathBuf]) -> Result<Vec<FileEntry>> {
    let mut out: Vec<FileEntry> = paths.iter().map(|p| file_entry(out_dir, p)).collect::<Result<_>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out.dedup_by(|a, b| a.path == b.path);
    Ok(out)
}

impl RunManifest {
    pub fn path(out_dir: &Path, command: &str) -> PathBuf {
        out_dir.join(MANIFEST_DIR).join(format!("{command}.json"))
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = RunManifest::path(out_dir, &self.command);
        let dir = path.parent().expect("manifest has a parent");
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read(path).map_err(io_err(path))?;
        serde_json::from_slice(&text).map_err(|e| crate::CliError::Missing(format!("{}: {e}", path.display())))
    }
}
