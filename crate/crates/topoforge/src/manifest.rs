//! Per-stage output manifests: seeds, input digests, effective
//! configuration, and counters, so every artifact is reproducible and
//! auditable. Field order is fixed; reruns with identical inputs differ
//! only in the `created_unix` timestamp.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct PipelineManifest {
    pub stage: String,
    pub tool_version: String,
    pub created_unix: u64,
    pub seeds: BTreeMap<String, u64>,
    pub input_digests: BTreeMap<String, String>,
    pub effective_config: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

impl PipelineManifest {
    pub fn new(stage: &str) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        PipelineManifest {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            seeds: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            effective_config: BTreeMap::new(),
            counters: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.effective_config
            .insert(key.to_string(), value.to_string());
        self
    }

    pub fn counter(&mut self, key: &str, value: u64) -> &mut Self {
        self.counters.insert(key.to_string(), value);
        self
    }

    pub fn add_counter(&mut self, key: &str, delta: u64) -> &mut Self {
        *self.counters.entry(key.to_string()).or_insert(0) += delta;
        self
    }

    pub fn digest_input(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        let digest = sha256_file(path)?;
        self.input_digests
            .insert(path.display().to_string(), digest);
        Ok(self)
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Write `manifest.json` into `dir`.
    pub fn write_into(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.json"), self.to_json() + "\n")
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Strip the volatile timestamp line so reruns can be compared
/// byte-for-byte.
pub fn without_timestamp(manifest_json: &str) -> String {
    manifest_json
        .lines()
        .filter(|line| !line.trim_start().starts_with("\"created_unix\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_json_is_stable_except_timestamp() {
        let build = || {
            let mut m = PipelineManifest::new("test");
            m.seed("root", 42)
                .config("min", 12)
                .config("max", 250)
                .counter("warnings", 3)
                .output("as1.edges");
            m
        };
        let a = build();
        let mut b = build();
        b.created_unix = a.created_unix + 100;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(without_timestamp(&a.to_json()), without_timestamp(&b.to_json()));
    }

    #[test]
    fn sha256_matches_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
