use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Written beside a command's outputs as `manifests/<command>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub systems: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Files under `path` (or `path` itself), sorted.
fn expand(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_dir() {
        let mut out = Vec::new();
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| CliError::io(path, err)))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            out.extend(expand(&e)?);
        }
        Ok(out)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

/// Digests with paths shown relative to `root` when they live under it.
pub fn digests(root: &Path, paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        for f in expand(p)? {
            let shown = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            out.push(FileDigest {
                path: shown,
                sha256: sha256_file(&f)?,
            });
        }
    }
    Ok(out)
}

impl Manifest {
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let dir = out_dir.join("manifests");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let path = dir.join(format!("{}.json", self.command));
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
