//! Replay archive: newline-delimited JSON transport records keyed by
//! `(prompt_digest, sample_index)`.
//!
//! New records are appended to the file as they arrive. [`Archive::compact`]
//! rewrites the file sorted by key so a recorded archive diffs cleanly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportRecord {
    pub prompt_digest: String,
    pub sample_index: u32,
    pub response_text: String,
    pub latency_ms: u64,
    pub model_id: String,
}

type Key = (String, u32);

#[derive(Debug)]
pub struct Archive {
    path: PathBuf,
    records: RwLock<BTreeMap<Key, TransportRecord>>,
    appender: Mutex<Option<File>>,
    added: Mutex<usize>,
}

impl Archive {
    /// Loads the archive at `path`; a missing file is an empty archive.
    /// Two records with one key are a data error.
    pub fn open(path: &Path) -> Result<Self> {
        let mut records = BTreeMap::new();
        if path.exists() {
            let f = File::open(path).map_err(BenchError::io(path))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(BenchError::io(path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: TransportRecord = serde_json::from_str(&line)
                    .map_err(|e| BenchError::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
                let key = (rec.prompt_digest.clone(), rec.sample_index);
                if records.insert(key, rec).is_some() {
                    return Err(BenchError::Data(format!("{}:{}: duplicate archive key", path.display(), n + 1)));
                }
            }
        }
        Ok(Self { path: path.to_path_buf(), records: RwLock::new(records), appender: Mutex::new(None), added: Mutex::new(0) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("archive lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str, index: u32) -> Option<TransportRecord> {
        self.records.read().expect("archive lock").get(&(digest.to_string(), index)).cloned()
    }

    /// Stores and appends a record. An existing key keeps its first record,
    /// so replays stay stable.
    pub fn record(&self, rec: TransportRecord) -> Result<()> {
        let key = (rec.prompt_digest.clone(), rec.sample_index);
        {
            let mut map = self.records.write().expect("archive lock");
            if let Some(old) = map.get(&key) {
                if old.response_text != rec.response_text {
                    log::warn!("archive already holds {} #{}; keeping the stored response", key.0, key.1);
                }
                return Ok(());
            }
            map.insert(key, rec.clone());
        }
        let mut guard = self.appender.lock().expect("archive lock");
        if guard.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
            }
            let f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(BenchError::io(&self.path))?;
            *guard = Some(f);
        }
        let line = serde_json::to_string(&rec).expect("records serialize");
        let f = guard.as_mut().expect("opened above");
        writeln!(f, "{line}").map_err(BenchError::io(&self.path))?;
        *self.added.lock().expect("archive lock") += 1;
        Ok(())
    }

    /// Distinct model ids across the stored records.
    pub fn model_ids(&self) -> std::collections::BTreeSet<String> {
        self.records.read().expect("archive lock").values().map(|r| r.model_id.clone()).collect()
    }

    /// Records appended since opening.
    pub fn added(&self) -> usize {
        *self.added.lock().expect("archive lock")
    }

    /// Rewrites the file in key order.
    pub fn compact(&self) -> Result<()> {
        let mut guard = self.appender.lock().expect("archive lock");
        *guard = None;
        let map = self.records.read().expect("archive lock");
        let mut out = String::new();
        for rec in map.values() {
            out.push_str(&serde_json::to_string(rec).expect("records serialize"));
            out.push('\n');
        }
        let tmp = self.path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, out).map_err(BenchError::io(&tmp))?;
        std::fs::rename(&tmp, &self.path).map_err(BenchError::io(&self.path))
    }
}

/// Hex sha256 of a file, or `None` when it does not exist.
pub fn file_digest(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(path).map_err(BenchError::io(path))?;
    Ok(Some(hex::encode(Sha256::digest(&bytes))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d: &str, i: u32, text: &str) -> TransportRecord {
        TransportRecord {
            prompt_digest: d.into(),
            sample_index: i,
            response_text: text.into(),
            latency_ms: 0,
            model_id: "m".into(),
        }
    }

    #[test]
    fn append_reload_compact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let a = Archive::open(&path).unwrap();
        assert!(a.is_empty());
        a.record(rec("bb", 1, "two")).unwrap();
        a.record(rec("aa", 0, "one")).unwrap();
        a.record(rec("aa", 0, "ignored")).unwrap();
        assert_eq!(a.added(), 2);
        let b = Archive::open(&path).unwrap();
        assert_eq!(b.get("aa", 0).unwrap().response_text, "one");
        a.compact().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("\"aa\"").unwrap() < text.find("\"bb\"").unwrap());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let line = serde_json::to_string(&rec("aa", 0, "x")).unwrap();
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        assert!(matches!(Archive::open(&path), Err(BenchError::Data(_))));
    }
}
