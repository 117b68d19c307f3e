use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fvr::TemplateSource;
use crate::imgcore::io::write_atomic;

/// One captured finger-vein frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub source: TemplateSource,
    /// Image path relative to the manifest directory.
    pub path: String,
    /// Set when template extraction did not find exactly four fingers.
    #[serde(default)]
    pub excluded: bool,
    /// Number of fingers actually present, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingers_present: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    /// Absolute image path of `entry` for a manifest stored in `root`.
    pub fn image_path(root: &Path, entry: &ManifestEntry) -> PathBuf {
        root.join(&entry.path)
    }

    /// Distinct subject ids in ascending order.
    pub fn subjects(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.entries.iter().map(|e| e.source.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}
