use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::CliError;

/// Record of one command invocation, written as `manifest.json` next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub seed_offsets: BTreeMap<String, u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
}

/// Canonical JSON (object keys sorted, no whitespace) of `config` and its digest.
pub fn config_digest<T: Serialize>(config: &T) -> Result<(String, serde_json::Value), CliError> {
    let value = canonical(serde_json::to_value(config).map_err(t2rec::error::Error::from)?);
    let text = serde_json::to_string(&value).map_err(t2rec::error::Error::from)?;
    Ok((hex::encode(Sha256::digest(text.as_bytes())), value))
}

fn canonical(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

pub fn offset_table() -> BTreeMap<String, u64> {
    use t2rec::harness::seed_offsets::*;
    [
        ("data", DATA),
        ("split", SPLIT),
        ("validation", VALIDATION),
        ("init", INIT),
        ("train", TRAIN),
        ("folds", FOLDS),
        ("baseline", BASELINE),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn versions() -> BTreeMap<String, String> {
    [
        ("t2rec", env!("CARGO_PKG_VERSION").to_string()),
        (
            "model_bundle_format",
            t2rec::twotower::BUNDLE_FORMAT_VERSION.to_string(),
        ),
        ("mlp_format", t2rec::nn::MLP_FORMAT_VERSION.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Output directory that writes files atomically and remembers their names.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes through a temporary file in the same directory, then renames it into place.
    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> t2rec::error::Result<()>,
    {
        let target = self.dir.join(name);
        let io_err = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", target.display()));
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(io_err)?;
        {
            let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
            fill(&mut buf)?;
            buf.flush().map_err(io_err)?;
        }
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(&target).map_err(|e| io_err(e.error))?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish<T: Serialize>(
        mut self,
        command: &str,
        config: &T,
        seeds: BTreeMap<String, u64>,
        started: u128,
    ) -> Result<RunManifest, CliError> {
        let (config_digest, config) = config_digest(config)?;
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest,
            config,
            seeds,
            seed_offsets: offset_table(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            outputs: self.written.clone(),
            versions: versions(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(t2rec::error::Error::from)?;
        self.write_str("manifest.json", &text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a: serde_json::Value =
            serde_json::from_str(r#"{"b": 1, "a": {"y": 2, "x": [3, {"q": 1, "p": 0}]}}"#).unwrap();
        let b: serde_json::Value =
            serde_json::from_str(r#"{"a": {"x": [3, {"p": 0, "q": 1}], "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(config_digest(&a).unwrap().0, config_digest(&b).unwrap().0);
        let c: serde_json::Value = serde_json::from_str(r#"{"a": 1}"#).unwrap();
        assert_ne!(config_digest(&a).unwrap().0, config_digest(&c).unwrap().0);
        assert_eq!(config_digest(&a).unwrap().0.len(), 64);
    }

    #[test]
    fn atomic_write_leaves_only_targets() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_str("a.txt", "hello").unwrap();
        out.write_str("a.txt", "again").unwrap();
        let m = out
            .finish("test", &serde_json::json!({"k": 1}), BTreeMap::new(), 0)
            .unwrap();
        assert_eq!(m.outputs, vec!["a.txt"]);
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, vec!["a.txt", "manifest.json"]);
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "again");
    }
}
