//! `manifest.json`: every artifact under the output directory with its
//! SHA-256, plus the config hash. Timing logs are listed but not hashed, so
//! two runs of the same config produce the same manifest.

use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::formats::write_json;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    /// `None` for volatile artifacts.
    pub sha256: Option<String>,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Epoch logs carry wall-clock seconds.
pub fn is_volatile(rel: &str) -> bool {
    rel.starts_with("logs/") && rel.ends_with("_epochs.csv")
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<ArtifactEntry>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect(root, &path, out)?;
            continue;
        }
        let rel: Vec<String> = path
            .strip_prefix(root)?
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let rel = rel.join("/");
        if rel == MANIFEST {
            continue;
        }
        let bytes = std::fs::read(&path)?;
        out.push(ArtifactEntry {
            sha256: (!is_volatile(&rel)).then(|| hex(&Sha256::digest(&bytes))),
            path: rel,
            bytes: bytes.len() as u64,
        });
    }
    Ok(())
}

pub fn build_manifest(output: &Path, config_hash: &str, seed: u64) -> Result<Manifest> {
    let mut artifacts = Vec::new();
    collect(output, output, &mut artifacts)?;
    Ok(Manifest { config_hash: config_hash.into(), seed, artifacts })
}

pub fn write_manifest(output: &Path, config_hash: &str, seed: u64) -> Result<Manifest> {
    let manifest = build_manifest(output, config_hash, seed)?;
    write_json(&output.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
