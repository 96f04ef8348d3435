//! Output directory handling: hashed writes, per-stage stamps for caching,
//! and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::error::{CliError, CliResult};

pub const STAMP_FILE: &str = "stage.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to a stage's outputs; a rerun with the same key and
/// unchanged files is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStamp {
    pub stage: String,
    pub key: String,
    /// Paths relative to the output root, with their SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl StageStamp {
    /// Combined hash of the outputs, used as an input to downstream keys.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(&self.outputs).expect("map serializes").as_bytes())
    }
}

/// Collects a stage's outputs under `root/<stage>/`.
pub struct StageWriter {
    root: PathBuf,
    stage: &'static str,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn new(root: &Path, stage: &'static str) -> CliResult<Self> {
        let dir = root.join(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(CliError::io(&dir))?;
        }
        std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        Ok(StageWriter { root: root.to_path_buf(), stage, outputs: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let rel = format!("{}/{}", self.stage, name);
        let path = self.root.join(&rel);
        std::fs::write(&path, bytes.as_ref()).map_err(CliError::io(&path))?;
        self.outputs.insert(rel, sha256_hex(bytes.as_ref()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self, key: String) -> CliResult<StageStamp> {
        let stamp = StageStamp { stage: self.stage.into(), key, outputs: self.outputs };
        let path = self.root.join(self.stage).join(STAMP_FILE);
        let text = serde_json::to_string_pretty(&stamp).expect("stamp serializes") + "\n";
        std::fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(stamp)
    }
}

pub fn read_stamp(root: &Path, stage: &str) -> Option<StageStamp> {
    let text = std::fs::read_to_string(root.join(stage).join(STAMP_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

/// The stamp, if it matches `key` and every recorded file is intact.
pub fn valid_stamp(root: &Path, stage: &str, key: &str) -> Option<StageStamp> {
    let stamp = read_stamp(root, stage)?;
    if stamp.key != key {
        return None;
    }
    for (rel, hash) in &stamp.outputs {
        let bytes = std::fs::read(root.join(rel)).ok()?;
        if &sha256_hex(&bytes) != hash {
            return None;
        }
    }
    Some(stamp)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(root: &Path, rel: &str, stage: &'static str) -> CliResult<T> {
    let path = root.join(rel);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Upstream { stage, message: format!("{}: {e}", path.display()) })?;
    serde_json::from_str(&text).map_err(|e| CliError::Upstream { stage, message: format!("{}: {e}", path.display()) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub key: String,
    pub cached: bool,
    pub seconds: f64,
}

/// Emitted with every run. `manifest_hash` covers everything except the
/// timings, so identical config, data and seed give identical hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub data_hash: String,
    pub seed: u64,
    pub defaults: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    pub outputs: BTreeMap<String, String>,
    pub manifest_hash: String,
}

impl RunManifest {
    pub fn seal(&mut self) {
        #[derive(Serialize)]
        struct Hashed<'a> {
            tool: &'a str,
            version: &'a str,
            config_hash: &'a str,
            data_hash: &'a str,
            seed: u64,
            defaults: &'a BTreeMap<String, String>,
            stage_keys: Vec<(&'a str, &'a str)>,
            outputs: &'a BTreeMap<String, String>,
        }
        let h = Hashed {
            tool: &self.tool,
            version: &self.version,
            config_hash: &self.config_hash,
            data_hash: &self.data_hash,
            seed: self.seed,
            defaults: &self.defaults,
            stage_keys: self.stages.iter().map(|s| (s.stage.as_str(), s.key.as_str())).collect(),
            outputs: &self.outputs,
        };
        self.manifest_hash = sha256_hex(serde_json::to_string(&h).expect("manifest serializes").as_bytes());
    }

    pub fn write(&self, root: &Path) -> CliResult<()> {
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(CliError::io(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamps_detect_key_changes_and_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut w = StageWriter::new(root, "dea").unwrap();
        w.write("a.csv", "x,y\n1,2\n").unwrap();
        w.write_json("b.json", &vec![1.5, 2.5]).unwrap();
        let stamp = w.finish("k1".into()).unwrap();
        assert_eq!(stamp.outputs.len(), 2);
        assert_eq!(valid_stamp(root, "dea", "k1"), Some(stamp.clone()));
        assert_eq!(valid_stamp(root, "dea", "k2"), None);
        std::fs::write(root.join("dea/a.csv"), "x,y\n1,3\n").unwrap();
        assert_eq!(valid_stamp(root, "dea", "k1"), None);
        // A new writer clears stale files.
        let w = StageWriter::new(root, "dea").unwrap();
        assert!(!root.join("dea/a.csv").exists());
        assert!(w.finish("k3".into()).unwrap().outputs.is_empty());
    }

    #[test]
    fn manifest_hash_ignores_timings() {
        let mut m = RunManifest {
            tool: "effx".into(),
            version: "0".into(),
            command: "dea".into(),
            config_hash: "c".into(),
            data_hash: "d".into(),
            seed: 1,
            defaults: BTreeMap::new(),
            stages: vec![StageTiming { stage: "dea".into(), key: "k".into(), cached: false, seconds: 1.0 }],
            outputs: BTreeMap::new(),
            manifest_hash: String::new(),
        };
        m.seal();
        let h = m.manifest_hash.clone();
        m.stages[0].seconds = 7.0;
        m.stages[0].cached = true;
        m.seal();
        assert_eq!(m.manifest_hash, h);
        m.seed = 2;
        m.seal();
        assert_ne!(m.manifest_hash, h);
    }
}
