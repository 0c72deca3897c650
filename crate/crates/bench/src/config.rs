//! Run configuration: one TOML file, with command-line overrides applied on
//! top. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use aisbench_core::compress::{CompressionConfig, DEFAULT_EPSILON_M};
use aisbench_core::oracle::SegmentationConfig;
use aisbench_core::prompt::DEFAULT_MAX_CONTEXT_TOKENS;
use aisbench_core::scoring::MatchPolicy;
use aisbench_core::semantics::DEFAULT_BUFFER_M;
use aisbench_core::Method;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const DEFAULT_SIZES: [usize; 6] = [5, 10, 25, 50, 75, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub raw_ais: PathBuf,
    pub emissions: PathBuf,
    pub ports: PathBuf,
    pub zones: PathBuf,
    pub queries: PathBuf,
    pub expert_labels: PathBuf,
    /// Vessel role manifest written by `synth`; only `label-experts` reads it.
    #[serde(default)]
    pub fleet: Option<PathBuf>,
    pub archive: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub samples: u32,
    pub max_context_tokens: usize,
    /// Attempts per sample before the sample is recorded as failed.
    pub retry_budget: u32,
    pub parallelism: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { temperature: 0.5, samples: 5, max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS, retry_budget: 3, parallelism: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationToml {
    pub moving_sog_kn: f64,
    pub anchorage_sog_kn: f64,
    pub anchorage_min_minutes: u16,
    pub port_radius_m: f64,
    pub collision_m: f64,
    pub collision_sog_kn: f64,
    pub min_visit_minutes: u16,
    pub visit_merge_gap_minutes: u16,
}

impl Default for SegmentationToml {
    fn default() -> Self {
        let d = SegmentationConfig::default();
        Self {
            moving_sog_kn: d.moving_sog_kn,
            anchorage_sog_kn: d.anchorage_sog_kn,
            anchorage_min_minutes: d.anchorage_min_minutes,
            port_radius_m: d.port_radius_m,
            collision_m: d.collision_m,
            collision_sog_kn: d.collision_sog_kn,
            min_visit_minutes: d.min_visit_minutes,
            visit_merge_gap_minutes: d.visit_merge_gap_minutes,
        }
    }
}

impl SegmentationToml {
    /// The proximity threshold is part of Q15's wording and not configurable.
    pub fn to_core(self) -> SegmentationConfig {
        SegmentationConfig {
            moving_sog_kn: self.moving_sog_kn,
            anchorage_sog_kn: self.anchorage_sog_kn,
            anchorage_min_minutes: self.anchorage_min_minutes,
            port_radius_m: self.port_radius_m,
            collision_m: self.collision_m,
            collision_sog_kn: self.collision_sog_kn,
            min_visit_minutes: self.min_visit_minutes,
            visit_merge_gap_minutes: self.visit_merge_gap_minutes,
            ..SegmentationConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    Live,
    Replay,
    /// Oracle-backed simulated model, used to record the shipped archive.
    Scripted,
}

impl std::str::FromStr for TransportMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(Self::Live),
            "replay" => Ok(Self::Replay),
            "scripted" => Ok(Self::Scripted),
            other => Err(format!("unknown transport {other:?} (live, replay, scripted)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub mode: TransportMode,
    pub model: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    /// `sqlite::memory:` or `sqlite://<path>`.
    pub url: String,
    pub statement_timeout_ms: u64,
    pub row_cap: usize,
    pub byte_cap: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { url: "sqlite::memory:".into(), statement_timeout_ms: 5000, row_cap: 200, byte_cap: 16 * 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_probes")]
    pub probes_per_query: usize,
    #[serde(default = "default_probes")]
    pub probe_pool_size: usize,
    /// Timestamp layout of the raw AIS file, as a chrono format string.
    #[serde(default = "default_timestamp_format")]
    pub timestamp_format: String,
    #[serde(default)]
    pub columns: crate::ingest::ColumnMap,
    pub paths: Paths,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub segmentation: SegmentationToml,
    #[serde(default = "default_epsilon")]
    pub compression_epsilon_m: f64,
    #[serde(default = "default_buffer")]
    pub semantic_buffer_m: f64,
    pub transport: TransportConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_set_threshold")]
    pub set_threshold: f64,
    #[serde(default = "default_location_radius")]
    pub location_radius_m: f64,
    /// Wall-time allowance per stage; the ledger records each stage against it.
    #[serde(default = "default_ci_budget")]
    pub ci_budget_s: u64,
}

fn default_sizes() -> Vec<usize> {
    DEFAULT_SIZES.to_vec()
}
fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.slug().to_string()).collect()
}
fn default_probes() -> usize {
    aisbench_core::catalog::DEFAULT_PROBES_PER_QUERY
}
fn default_timestamp_format() -> String {
    "%d/%m/%Y %H:%M:%S".into()
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON_M
}
fn default_buffer() -> f64 {
    DEFAULT_BUFFER_M
}
fn default_set_threshold() -> f64 {
    MatchPolicy::default().set_threshold
}
fn default_ci_budget() -> u64 {
    600
}
fn default_location_radius() -> f64 {
    MatchPolicy::default().location_radius_m
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sizes: Option<Vec<usize>>,
    pub methods: Option<Vec<String>>,
    pub transport: Option<TransportMode>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [
            &mut p.raw_ais,
            &mut p.emissions,
            &mut p.ports,
            &mut p.zones,
            &mut p.queries,
            &mut p.expert_labels,
            &mut p.archive,
            &mut p.out_dir,
        ] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(f) = p.fleet.as_mut().filter(|f| f.is_relative()) {
            *f = base.join(&*f);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.sizes {
            self.sizes = s.clone();
        }
        if let Some(m) = &o.methods {
            self.methods = m.clone();
        }
        if let Some(t) = o.transport {
            self.transport.mode = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.paths.out_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a nonempty list of positive counts".into());
        }
        self.method_list()?;
        let s = &self.sampling;
        if !(0.0..=2.0).contains(&s.temperature) {
            return bad(format!("temperature {} outside [0, 2]", s.temperature));
        }
        if s.samples == 0 || s.retry_budget == 0 || s.parallelism == 0 {
            return bad("samples, retry_budget and parallelism must be at least 1".into());
        }
        self.segmentation.to_core().validate().map_err(|e| BenchError::Config(e.into()))?;
        if CompressionConfig::new(self.compression_epsilon_m).is_none() {
            return bad(format!("compression epsilon {} must be positive", self.compression_epsilon_m));
        }
        if !(self.semantic_buffer_m >= 0.0) {
            return bad("semantic buffer must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.set_threshold) || !(self.location_radius_m > 0.0) {
            return bad("set_threshold must be in [0, 1] and location_radius_m positive".into());
        }
        if self.probes_per_query == 0 || self.probe_pool_size == 0 {
            return bad("probe counts must be positive".into());
        }
        if self.transport.mode == TransportMode::Live {
            if self.transport.credential_env.is_none() || self.transport.endpoint.is_none() {
                return bad("live transport needs transport.endpoint and transport.credential_env".into());
            }
        }
        if self.model_id().trim().is_empty() {
            return bad("transport.model must be set".into());
        }
        if !self.backend.url.starts_with("sqlite:") {
            return bad(format!("backend url {:?}: only sqlite backends are built in", self.backend.url));
        }
        Ok(())
    }

    pub fn method_list(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for m in &self.methods {
            let m: Method = m.parse().map_err(|_| BenchError::Config(format!("unknown method {m:?}")))?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(BenchError::Config("no methods selected".into()));
        }
        out.sort();
        Ok(out)
    }

    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn model_id(&self) -> &str {
        &self.transport.model
    }

    pub fn compression(&self) -> CompressionConfig {
        CompressionConfig::new(self.compression_epsilon_m).expect("validated")
    }

    pub fn match_policy(&self) -> MatchPolicy {
        MatchPolicy { set_threshold: self.set_threshold, location_radius_m: self.location_radius_m }
    }

    /// Identifier for report rows: a digest of every setting that changes
    /// scores, and nothing that depends on where files live.
    pub fn run_id(&self) -> String {
        let key = format!(
            "{}|{}|{:?}|{:?}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.model_id(),
            self.seed,
            self.sorted_sizes(),
            self.method_list().unwrap_or_default(),
            self.probes_per_query,
            self.probe_pool_size,
            self.sampling.samples,
            self.sampling.temperature,
            self.compression_epsilon_m,
            self.semantic_buffer_m,
            self.set_threshold,
            self.location_radius_m,
        );
        hex::encode(&Sha256::digest(key.as_bytes())[..6])
    }

    /// The effective configuration, as echoed into the run ledger.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[paths]
raw_ais = "raw.csv"
emissions = "em.csv"
ports = "ports.csv"
zones = "zones.csv"
queries = "queries.csv"
expert_labels = "labels.csv"
archive = "archive.jsonl"
out_dir = "out"
[transport]
mode = "replay"
model = "test-model"
"#;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("config.toml");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load(&write(dir.path(), MINIMAL), &Overrides::default()).unwrap();
        assert_eq!(cfg.sizes, DEFAULT_SIZES);
        assert_eq!(cfg.method_list().unwrap(), Method::ALL);
        assert_eq!(cfg.sampling.temperature, 0.5);
        assert_eq!(cfg.sampling.samples, 5);
        assert_eq!(cfg.paths.raw_ais, dir.path().join("raw.csv"));
    }

    #[test]
    fn flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { sizes: Some(vec![5]), seed: Some(9), ..Default::default() };
        let cfg = RunConfig::load(&write(dir.path(), MINIMAL), &o).unwrap();
        assert_eq!((cfg.sizes.clone(), cfg.seed), (vec![5], 9));
    }

    #[test]
    fn live_needs_credential_name() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { transport: Some(TransportMode::Live), ..Default::default() };
        let err = RunConfig::load(&write(dir.path(), MINIMAL), &o).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn run_id_ignores_paths() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunConfig::load(&write(dir.path(), MINIMAL), &Overrides::default()).unwrap();
        let o = Overrides { out_dir: Some("/elsewhere".into()), ..Default::default() };
        let b = RunConfig::load(&write(dir.path(), MINIMAL), &o).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        let o = Overrides { seed: Some(8), ..Default::default() };
        let c = RunConfig::load(&write(dir.path(), MINIMAL), &o).unwrap();
        assert_ne!(a.run_id(), c.run_id());
    }
}
