//! Run configuration: TOML file, `key=value` overrides and the config hash.

use std::fs;
use std::path::{Path, PathBuf};

use handvein::capsync::FrameClassifier;
use handvein::evalharness::EvalConfig;
use handvein::fvr::FvrConfig;
use handvein::stereo::SgmParams;
use handvein::synthgen::DatasetParams;
use handvein::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "HANDVEIN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset root holding `manifest.json`; `<out>/dataset` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { dataset: None, calibration: None, out: PathBuf::from("out") }
    }
}

/// Light geometry for photometric stereo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsConfig {
    /// Explicit light directions; overrides the corner-bank layout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lights: Option<Vec<[f64; 3]>>,
    /// Corner banks at `(±w/2, ±h/2, distance)` mm, in frame order
    /// top-left, top-right, bottom-left, bottom-right.
    pub bank_width: f64,
    pub bank_height: f64,
    pub distance: f64,
    /// Also integrate the normals into a relative depth map.
    pub integrate: bool,
}

impl Default for PsConfig {
    fn default() -> Self {
        PsConfig { lights: None, bank_width: 100.0, bank_height: 80.0, distance: 120.0, integrate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: DatasetParams,
    pub sync: FrameClassifier,
    pub stereo: SgmParams,
    pub ps: PsConfig,
    pub fvr: FvrConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Reads `file` (or the file named by [`CONFIG_ENV`]) and applies
    /// `overrides` in order; later entries win.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let env_file = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let mut table = match file.map(Path::to_path_buf).or(env_file) {
            Some(path) => {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                text.parse::<toml::Table>().map_err(|e| config_error(&format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, raw) = item.split_once('=').ok_or_else(|| config_error(&format!("override {item:?} is not key=value")))?;
            set_dotted(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        toml::Value::Table(table).try_into::<RunConfig>().map_err(|e| config_error(&e.to_string()))
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths.dataset.clone().unwrap_or_else(|| self.paths.out.join("dataset"))
    }

    pub fn out_dir(&self, sub: &str) -> PathBuf {
        self.paths.out.join(sub)
    }

    /// SHA-256 over the canonical JSON of everything except the output
    /// directory, so relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.hashed_value().to_string().as_bytes()))
    }

    /// Every hashed leaf as a `dotted.key=value` pair, in key order.
    pub fn flattened(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        flatten("", &self.hashed_value(), &mut out);
        out
    }

    fn hashed_value(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(paths) = value.get_mut("paths").and_then(|p| p.as_object_mut()) {
            paths.remove("out");
        }
        value
    }
}

fn config_error(msg: &str) -> Error {
    Error::Config(msg.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_error(&format!("malformed key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let slot = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = slot.as_table_mut().ok_or_else(|| config_error(&format!("{key}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
