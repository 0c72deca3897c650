//! Append-only run ledger: one JSON line per completed stage with the
//! effective configuration, digests of inputs and outputs, wall time and
//! request counts.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::archive::file_digest;
use crate::config::RunConfig;
use crate::error::{BenchError, Result};

pub const LEDGER_FILE: &str = "ledger.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub run_id: String,
    pub model_id: String,
    pub finished_at: String,
    pub elapsed_ms: u64,
    pub ci_budget_ms: u64,
    pub within_budget: bool,
    /// Path to sha256, `null` for files that do not exist.
    pub inputs: BTreeMap<String, Option<String>>,
    pub outputs: BTreeMap<String, Option<String>>,
    pub budget: serde_json::Value,
    pub config: String,
}

/// Entries of `<out_dir>/ledger.jsonl`, oldest first.
pub fn read_ledger(out_dir: &Path) -> Result<Vec<LedgerEntry>> {
    let path = out_dir.join(LEDGER_FILE);
    let text = std::fs::read_to_string(&path).map_err(BenchError::io(&path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| BenchError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Collects one stage's entry.
pub struct StageLog<'a> {
    stage: &'static str,
    cfg: &'a RunConfig,
    started: Instant,
    inputs: Vec<&'a Path>,
}

impl<'a> StageLog<'a> {
    pub fn start(stage: &'static str, cfg: &'a RunConfig, inputs: Vec<&'a Path>) -> Self {
        Self { stage, cfg, started: Instant::now(), inputs }
    }

    fn digests(paths: &[&Path]) -> Result<BTreeMap<String, Option<String>>> {
        paths.iter().map(|p| Ok((p.display().to_string(), file_digest(p)?))).collect()
    }

    /// Appends the entry to `<out_dir>/ledger.jsonl`.
    pub fn finish(self, outputs: &[&Path], budget: serde_json::Value) -> Result<LedgerEntry> {
        let elapsed_ms = self.started.elapsed().as_millis() as u64;
        let ci_budget_ms = self.cfg.ci_budget_s * 1000;
        let entry = LedgerEntry {
            stage: self.stage.to_string(),
            run_id: self.cfg.run_id(),
            model_id: self.cfg.model_id().to_string(),
            finished_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            elapsed_ms,
            ci_budget_ms,
            within_budget: elapsed_ms <= ci_budget_ms,
            inputs: Self::digests(&self.inputs)?,
            outputs: Self::digests(outputs)?,
            budget,
            config: self.cfg.to_toml(),
        };
        let dir = &self.cfg.paths.out_dir;
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        let path = dir.join(LEDGER_FILE);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(BenchError::io(&path))?;
        writeln!(f, "{}", serde_json::to_string(&entry).expect("ledger entries serialize")).map_err(BenchError::io(&path))?;
        Ok(entry)
    }
}
