//! Content-addressed artifact registry.
//!
//! Every artifact a phase produces is registered under a stable key with its
//! relative path and SHA-256 checksum. A later run (or phase) treats an
//! artifact as valid only when the file exists and its checksum matches,
//! which makes interrupted runs safely resumable: valid artifacts are
//! reused, anything else is recomputed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the artifact root, with `/` separators.
    pub path: String,
    pub sha256: String,
}

/// The registry, persisted as `manifest.json` in the artifact root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunManifest {
    entries: BTreeMap<String, ManifestEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn checksum(content: &[u8]) -> String {
    hex(&Sha256::digest(content))
}

impl RunManifest {
    /// Load the manifest from an artifact root; absent file means empty.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| Error::io(root.display().to_string(), e))?;
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(MANIFEST_FILE, e))?;
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn entry(&self, key: &str) -> Option<&ManifestEntry> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// True when the key is registered, the file exists, and its checksum
    /// matches. Invalid or missing artifacts must be recomputed.
    pub fn is_current(&self, root: &Path, key: &str) -> bool {
        let Some(entry) = self.entries.get(key) else {
            return false;
        };
        let path = root.join(&entry.path);
        match fs::read(&path) {
            Ok(bytes) => checksum(&bytes) == entry.sha256,
            Err(_) => false,
        }
    }

    /// Write an artifact file (creating parent directories) and register it.
    pub fn write_text(&mut self, root: &Path, key: &str, rel_path: &str, content: &str) -> Result<()> {
        let path = root.join(rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.entries.insert(
            key.to_string(),
            ManifestEntry {
                path: rel_path.to_string(),
                sha256: checksum(content.as_bytes()),
            },
        );
        Ok(())
    }

    /// Read a registered artifact, verifying its checksum. A missing or
    /// stale artifact is reported as the gap the caller must re-produce.
    pub fn read_text(&self, root: &Path, key: &str) -> Result<String> {
        let entry = self.entries.get(key).ok_or_else(|| Error::MissingArtifact {
            key: key.to_string(),
        })?;
        let path = root.join(&entry.path);
        let bytes = fs::read(&path).map_err(|_| Error::MissingArtifact {
            key: key.to_string(),
        })?;
        if checksum(&bytes) != entry.sha256 {
            return Err(Error::MissingArtifact {
                key: key.to_string(),
            });
        }
        String::from_utf8(bytes).map_err(|e| Error::arg(format!("artifact {key} is not utf-8: {e}")))
    }

    /// Absolute path of a registered artifact (no checksum verification).
    pub fn path_of(&self, root: &Path, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(|e| root.join(&e.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_validity() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut manifest = RunManifest::default();
        manifest
            .write_text(root, "suite/weak", "suites/weak.json", "{\"a\":1}")
            .unwrap();
        assert!(manifest.is_current(root, "suite/weak"));
        assert!(!manifest.is_current(root, "suite/strong"));
        manifest.save(root).unwrap();

        let reloaded = RunManifest::load(root).unwrap();
        assert_eq!(reloaded, manifest);
        assert_eq!(reloaded.read_text(root, "suite/weak").unwrap(), "{\"a\":1}");
    }

    #[test]
    fn tampering_invalidates_an_entry() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut manifest = RunManifest::default();
        manifest
            .write_text(root, "report/json", "report.json", "original")
            .unwrap();
        fs::write(root.join("report.json"), "tampered").unwrap();
        assert!(!manifest.is_current(root, "report/json"));
        assert!(matches!(
            manifest.read_text(root, "report/json"),
            Err(Error::MissingArtifact { .. })
        ));

        fs::remove_file(root.join("report.json")).unwrap();
        assert!(!manifest.is_current(root, "report/json"));
    }

    #[test]
    fn missing_manifest_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::load(dir.path()).unwrap();
        assert_eq!(manifest, RunManifest::default());
        assert!(matches!(
            manifest.read_text(dir.path(), "anything"),
            Err(Error::MissingArtifact { .. })
        ));
    }
}
