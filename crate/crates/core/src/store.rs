//! On-disk artifact store. Every stage writes under one root and records
//! the hash of the inputs and configuration it ran with in `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::ingest::PlayerId;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a serializable value, chained onto `parent`.
pub fn config_hash<T: Serialize>(stage: &str, parent: &str, value: &T) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(parent.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(value)?);
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StageRecord {
    pub hash: String,
    /// Files written by the stage, relative to the store root.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Manifest {
    pub format_version: u32,
    pub stages: BTreeMap<String, StageRecord>,
    /// Free-form counts and settings worth showing without opening artifacts.
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            stages: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }
}

/// Sidecar of an embedding matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EmbeddingIndex {
    pub timestamp: usize,
    pub dims: usize,
    pub ids: Vec<PlayerId>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    /// Opens an existing store; fails if there is no manifest.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let s = Store::new(root);
        if !s.exists(MANIFEST) {
            return Err(Error::MissingStage { stage: "ingest" });
        }
        Ok(s)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn manifest(&self) -> Result<Manifest> {
        if !self.exists(MANIFEST) {
            return Ok(Manifest::default());
        }
        self.read_json(MANIFEST)
    }

    pub fn save_manifest(&self, m: &Manifest) -> Result<()> {
        self.write_json(MANIFEST, m)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let path = self.path(rel);
        let f = fs::File::open(&path)?;
        serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::CorruptArtifact {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Writes through a temporary file so readers never see half a file.
    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn write_embedding(&self, rel_stem: &str, space: &EmbeddingSpace) -> Result<()> {
        let mut buf = BufWriter::new(Vec::new());
        space.write_f32(&mut buf)?;
        buf.flush()?;
        let bytes = buf.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write_bytes(&format!("{rel_stem}.bin"), &bytes)?;
        self.write_json(
            &format!("{rel_stem}.json"),
            &EmbeddingIndex {
                timestamp: space.timestamp,
                dims: space.dims,
                ids: space.ids.clone(),
            },
        )
    }

    pub fn read_embedding(&self, rel_stem: &str) -> Result<EmbeddingSpace> {
        let idx: EmbeddingIndex = self.read_json(&format!("{rel_stem}.json"))?;
        let f = fs::File::open(self.path(&format!("{rel_stem}.bin")))?;
        EmbeddingSpace::read_f32(BufReader::new(f), idx.timestamp, idx.dims, idx.ids)
    }

    /// Whether `stage` last ran with `hash` and all its outputs are present.
    pub fn is_fresh(&self, stage: &str, hash: &str) -> Result<bool> {
        let m = self.manifest()?;
        Ok(m.stages.get(stage).is_some_and(|r| r.hash == hash && r.outputs.iter().all(|o| self.exists(o))))
    }

    pub fn stage_hash(&self, stage: &'static str) -> Result<String> {
        self.manifest()?.stages.get(stage).map(|r| r.hash.clone()).ok_or(Error::MissingStage { stage })
    }

    /// Records a finished stage and drops the records of `downstream`
    /// stages, whose outputs were derived from the previous run.
    pub fn record_stage(&self, stage: &str, hash: String, outputs: Vec<String>, downstream: &[&str]) -> Result<()> {
        let mut m = self.manifest()?;
        m.stages.insert(stage.to_owned(), StageRecord { hash, outputs });
        for d in downstream {
            m.stages.remove(*d);
        }
        self.save_manifest(&m)
    }

    pub fn set_summary(&self, key: &str, value: serde_json::Value) -> Result<()> {
        let mut m = self.manifest()?;
        m.summary.insert(key.to_owned(), value);
        self.save_manifest(&m)
    }

    /// Every file under the root with its SHA-256, keyed by relative path.
    pub fn digest(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(&self.root).expect("under root").to_string_lossy().replace('\\', "/");
                    out.insert(rel, sha256_hex(&fs::read(&p)?));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_parent_and_value() {
        let a = config_hash("s", "p", &1).unwrap();
        assert_eq!(a, config_hash("s", "p", &1).unwrap());
        assert_ne!(a, config_hash("s", "q", &1).unwrap());
        assert_ne!(a, config_hash("s", "p", &2).unwrap());
        assert_ne!(a, config_hash("t", "p", &1).unwrap());
    }

    #[test]
    fn embedding_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::new(dir.path());
        let e = EmbeddingSpace::new(2, 2, vec!["a".into(), "b".into()], vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        s.write_embedding("embeddings/2", &e).unwrap();
        assert_eq!(s.read_embedding("embeddings/2").unwrap(), e);
    }

    #[test]
    fn stage_records() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::new(dir.path());
        assert!(matches!(s.stage_hash("ingest"), Err(Error::MissingStage { stage: "ingest" })));
        s.write_json("a.json", &1).unwrap();
        s.record_stage("ingest", "h1".into(), vec!["a.json".into()], &[]).unwrap();
        s.record_stage("metrics", "h2".into(), vec![], &[]).unwrap();
        assert!(s.is_fresh("ingest", "h1").unwrap());
        assert!(!s.is_fresh("ingest", "h0").unwrap());
        s.record_stage("ingest", "h3".into(), vec!["a.json".into()], &["metrics"]).unwrap();
        assert!(s.stage_hash("metrics").is_err());
        fs::remove_file(s.path("a.json")).unwrap();
        assert!(!s.is_fresh("ingest", "h3").unwrap());
    }
}
