//! The command-line stages. Each reads the artifacts of the stages before it
//! from the output directory, writes its own, and appends a ledger entry.
//!
//! ```text
//! <out>/normalized/{dynamic,static,ports}.csv   ingest
//! <out>/ingest_report.json                     ingest
//! <out>/ground_truth.csv                       ground-truth
//! <out>/runs/{responses.jsonl,answers.csv}     run
//! <out>/scores.csv                             score
//! <out>/report/*.csv                           report
//! <out>/ledger.jsonl                           every stage
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use aisbench_core::prompt::{build_prompt, PromptData};
use aisbench_core::semantics::SemanticConfig;
use aisbench_core::{Catalog, DatasetBundle, Method, Mmsi};
use serde_json::json;

use crate::archive::Archive;
use crate::catalog_file::load_catalog;
use crate::config::{RunConfig, TransportMode};
use crate::error::{BenchError, Result};
use crate::ingest;
use crate::labels::{self, ExpertLabel};
use crate::ledger::StageLog;
use crate::report;
use crate::run::{self, Channel, RunInputs};
use crate::scripted::{ScriptedTransport, SCRIPTED_MODEL};
use crate::study::{self, Design};
use crate::synth::{self, Role};
use crate::transport::{LiveTransport, ReplayTransport, ReqwestPost, Transport};

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Self { out: cfg.paths.out_dir.clone() }
    }
    pub fn normalized(&self) -> PathBuf {
        self.out.join("normalized")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.out.join("ingest_report.json")
    }
    pub fn ground_truth(&self) -> PathBuf {
        self.out.join(study::GROUND_TRUTH_FILE)
    }
    pub fn runs(&self) -> PathBuf {
        self.out.join("runs")
    }
    pub fn responses(&self) -> PathBuf {
        self.runs().join(run::RESPONSES_FILE)
    }
    pub fn answers(&self) -> PathBuf {
        self.runs().join(run::ANSWERS_FILE)
    }
    pub fn scores(&self) -> PathBuf {
        self.out.join(report::SCORES_FILE)
    }
    pub fn report(&self) -> PathBuf {
        self.out.join("report")
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    }
    std::fs::write(path, text).map_err(BenchError::io(path))
}

fn fleet_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.fleet.clone().unwrap_or_else(|| {
        cfg.paths.raw_ais.parent().unwrap_or(Path::new(".")).join(synth::FLEET_FILE)
    })
}

fn port_radius(cfg: &RunConfig) -> f64 {
    cfg.segmentation.port_radius_m
}

/// Writes the generated raw AIS, emissions and fleet files to the
/// configured input paths.
pub fn cmd_synth(cfg: &RunConfig) -> Result<String> {
    let log = StageLog::start("synth", cfg, vec![&cfg.paths.ports]);
    let ports = ingest::parse_ports(&cfg.paths.ports, port_radius(cfg))?;
    let fx = synth::generate(cfg.seed, &ports);
    let fleet = fleet_path(cfg);
    write(&cfg.paths.raw_ais, &fx.raw_csv)?;
    write(&cfg.paths.emissions, &fx.emissions_csv)?;
    write(&fleet, &synth::render_fleet(&fx.fleet))?;
    log.finish(&[&cfg.paths.raw_ais, &cfg.paths.emissions, &fleet], json!({ "vessels": fx.fleet.len() }))?;
    Ok(format!("generated {} vessels into {}", fx.fleet.len(), cfg.paths.raw_ais.display()))
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let log = StageLog::start("ingest", cfg, vec![&cfg.paths.raw_ais, &cfg.paths.emissions, &cfg.paths.ports]);
    let raw = ingest::parse_raw(&cfg.paths.raw_ais, &cfg.columns, &cfg.timestamp_format)?;
    if raw.mostly_dropped() {
        return Err(BenchError::Data(format!(
            "{}: {} of {} rows failed to parse; check the column names and timestamp_format",
            cfg.paths.raw_ais.display(),
            raw.dropped,
            raw.total
        )));
    }
    let emissions = ingest::parse_emissions(&cfg.paths.emissions)?;
    let ports = ingest::parse_ports(&cfg.paths.ports, port_radius(cfg))?;
    let (bundle, rep) = ingest::assemble(&raw, &emissions, ports);
    bundle.check().map_err(BenchError::data)?;
    if bundle.size() == 0 {
        return Err(BenchError::Data("no vessel has both positions and static data".into()));
    }
    ingest::write_normalized(&bundle, &layout.normalized())?;
    let summary = json!({
        "raw_rows": rep.raw_rows,
        "dropped_rows": rep.dropped_rows,
        "vessels": bundle.size(),
        "dynamic_rows": bundle.dynamic_row_count(),
        "unmatched_vessels": rep.unmatched_vessels.iter().map(|m| m.get()).collect::<Vec<_>>(),
        "static_conflicts": rep.conflicts.len(),
        "without_emissions": rep.without_emissions,
        "date": raw.date.map(|d| d.to_string()),
    });
    write(&layout.ingest_report(), &format!("{}\n", serde_json::to_string_pretty(&summary).expect("json")))?;
    let norm = layout.normalized();
    let outs = [norm.join(ingest::DYNAMIC_FILE), norm.join(ingest::STATIC_FILE), norm.join(ingest::PORTS_FILE)];
    log.finish(&[&outs[0], &outs[1], &outs[2], &layout.ingest_report()], summary)?;
    Ok(format!(
        "ingested {} vessels ({} position rows, {} raw rows dropped)",
        bundle.size(),
        bundle.dynamic_row_count(),
        rep.dropped_rows
    ))
}

fn load_full(cfg: &RunConfig) -> Result<DatasetBundle> {
    ingest::read_normalized(&Layout::new(cfg).normalized(), port_radius(cfg))
}

/// Catalog, full dataset, expert labels, labelled ferries and the design.
pub struct Study {
    pub catalog: Catalog,
    pub full: DatasetBundle,
    pub labels: Vec<ExpertLabel>,
    pub ferries: Vec<Mmsi>,
    pub design: Design,
}

pub fn load_study(cfg: &RunConfig) -> Result<Study> {
    let catalog = load_catalog(&cfg.paths.queries)?;
    let full = load_full(cfg)?;
    let labels = labels::read_labels(&cfg.paths.expert_labels, &catalog)?;
    labels::check_kinds(&labels, &catalog)?;
    if !labels.iter().any(|l| l.dataset_size == full.size()) {
        return Err(BenchError::Data(format!(
            "{} has no labels for the full dataset of {} vessels; run label-experts",
            cfg.paths.expert_labels.display(),
            full.size()
        )));
    }
    let ferries = labels::ferries_at(&labels, full.size());
    let design = Design::new(cfg, &catalog, &full, &ferries)?;
    Ok(Study { catalog, full, labels, ferries, design })
}

/// Labels the cluster and ferry queries from the fleet manifest, for the
/// full dataset and every configured size.
pub fn cmd_label_experts(cfg: &RunConfig) -> Result<String> {
    let fleet_file = fleet_path(cfg);
    let log = StageLog::start("label-experts", cfg, vec![&fleet_file, &cfg.paths.queries]);
    let catalog = load_catalog(&cfg.paths.queries)?;
    let full = load_full(cfg)?;
    let fleet = synth::parse_fleet(&fleet_file)?;
    let ferries: Vec<Mmsi> =
        fleet.iter().filter(|e| e.role == Role::Ferry && full.contains(e.mmsi)).map(|e| e.mmsi).collect();
    let design = Design::new(cfg, &catalog, &full, &ferries)?;
    let mut out = labels::label_subset(&fleet, &full.mmsis());
    for n in cfg.sorted_sizes() {
        if n != full.size() {
            out.extend(labels::label_subset(&fleet, &design.members(n)?));
        }
    }
    write(&cfg.paths.expert_labels, &labels::render_labels(&out)?)?;
    log.finish(&[&cfg.paths.expert_labels], json!({ "labels": out.len() }))?;
    Ok(format!("wrote {} expert labels to {}", out.len(), cfg.paths.expert_labels.display()))
}

pub fn cmd_ground_truth(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let log = StageLog::start("ground-truth", cfg, vec![&cfg.paths.queries, &cfg.paths.expert_labels]);
    let s = load_study(cfg)?;
    let (rows, short) = study::ground_truth(cfg, &s.catalog, &s.full, &s.design, &s.labels, &s.ferries)?;
    for sf in short.iter().filter(|s| s.dataset_size == cfg.sorted_sizes()[0]) {
        log::warn!(
            "{}: only {} of {} probe vessels are applicable",
            sf.shortfall.query,
            sf.shortfall.available,
            sf.shortfall.requested
        );
    }
    write(&layout.ground_truth(), &study::render_ground_truth(&rows)?)?;
    let shortfalls: Vec<_> = short
        .iter()
        .map(|s| json!({ "size": s.dataset_size, "query": s.shortfall.query.to_string(), "available": s.shortfall.available }))
        .collect();
    let pool: Vec<u32> = s.design.pool.iter().map(|m| m.get()).collect();
    log.finish(&[&layout.ground_truth()], json!({ "instances": rows.len(), "probe_pool": pool, "shortfalls": shortfalls }))?;
    Ok(format!("wrote {} ground-truth rows for sizes {:?}", rows.len(), cfg.sorted_sizes()))
}

fn semantic_config(cfg: &RunConfig) -> Result<SemanticConfig> {
    let zones = ingest::parse_zones(&cfg.paths.zones)?;
    SemanticConfig::new(zones, cfg.semantic_buffer_m).map_err(|e| BenchError::Config(format!("{}: {e}", cfg.paths.zones.display())))
}

/// Prompt sizes and request counts without contacting a model.
fn dry_run(cfg: &RunConfig, s: &Study, truths: &[study::TruthRow], semantic: &SemanticConfig) -> Result<String> {
    let mut out = String::from("method,dataset_size,instances,prompt_tokens,overflows,requests\n");
    let samples = cfg.sampling.samples as usize;
    for n in cfg.sorted_sizes() {
        let sub = s.design.subset(&s.full, n)?;
        let rows: Vec<_> = truths.iter().filter(|t| t.instance.dataset_size == n).collect();
        for m in cfg.method_list()? {
            let data = match m {
                Method::Zsa1 => PromptData::raw(&sub),
                Method::Zsa2 => PromptData::compressed(&sub, cfg.compression()),
                Method::Zsa3 => PromptData::semantic(&sub, semantic),
                Method::Nlidb => {
                    let card = crate::nlidb::schema_card(&sub);
                    let tokens = aisbench_core::prompt::estimate_tokens(card.chars().count());
                    out.push_str(&format!("{},{n},{},{tokens},0,{}\n", m.slug(), rows.len(), rows.len() * samples * 2));
                    continue;
                }
            };
            let mut tokens = 0;
            let mut overflows = 0;
            for r in &rows {
                match build_prompt(&data, &r.instance, cfg.sampling.max_context_tokens) {
                    Ok(p) => tokens = tokens.max(p.token_estimate),
                    Err(_) => overflows += 1,
                }
            }
            out.push_str(&format!(
                "{},{n},{},{tokens},{overflows},{}\n",
                m.slug(),
                rows.len(),
                (rows.len() - overflows) * samples
            ));
        }
    }
    Ok(out)
}

fn open_transport(cfg: &RunConfig) -> Result<(Box<dyn Transport>, Arc<Archive>)> {
    let t = &cfg.transport;
    let archive_path = &cfg.paths.archive;
    match t.mode {
        TransportMode::Replay => {
            if !archive_path.exists() {
                return Err(BenchError::MissingArtifact { path: archive_path.clone(), stage: "run --transport live" });
            }
            let archive = Arc::new(Archive::open(archive_path)?);
            let models = archive.model_ids();
            if models.iter().any(|m| m != cfg.model_id()) {
                return Err(BenchError::Config(format!(
                    "archive {} was recorded with {:?} but transport.model is {:?}",
                    archive_path.display(),
                    models,
                    cfg.model_id()
                )));
            }
            Ok((Box::new(ReplayTransport::new(archive.clone(), cfg.model_id())), archive))
        }
        TransportMode::Scripted => {
            if cfg.model_id() != SCRIPTED_MODEL {
                return Err(BenchError::Config(format!("the scripted transport requires transport.model = {SCRIPTED_MODEL:?}")));
            }
            Ok((Box::new(ScriptedTransport::new(cfg.seed)), Arc::new(Archive::open(archive_path)?)))
        }
        TransportMode::Live => {
            let var = t.credential_env.as_deref().expect("validated");
            let key = std::env::var(var)
                .map_err(|_| BenchError::Config(format!("environment variable {var} with the API key is not set")))?;
            let endpoint = t.endpoint.clone().expect("validated");
            let live = LiveTransport::new(
                ReqwestPost::new()?,
                endpoint,
                key,
                cfg.model_id().to_string(),
                Duration::from_secs(t.timeout_s),
            );
            Ok((Box::new(live), Arc::new(Archive::open(archive_path)?)))
        }
    }
}

pub fn cmd_run(cfg: &RunConfig, dry: bool) -> Result<String> {
    let layout = Layout::new(cfg);
    let gt = layout.ground_truth();
    let log = StageLog::start("run", cfg, vec![&gt, &cfg.paths.zones, &cfg.paths.archive]);
    let s = load_study(cfg)?;
    let truths = study::read_ground_truth(&gt, &s.catalog)?;
    let semantic = semantic_config(cfg)?;
    if dry {
        return dry_run(cfg, &s, &truths, &semantic);
    }
    let (transport, archive) = open_transport(cfg)?;
    let inputs =
        RunInputs { cfg, catalog: &s.catalog, full: &s.full, design: &s.design, truths: &truths, semantic: &semantic };
    let channel = Channel {
        transport: transport.as_ref(),
        archive: Some(archive.as_ref()),
        scripted: cfg.transport.mode == TransportMode::Scripted,
    };
    let result = run::run_grid(&inputs, &channel);
    if archive.added() > 0 {
        archive.compact()?;
    }
    let (logs, answers, stats) = result?;
    write(&layout.responses(), &run::render_responses(&logs))?;
    write(&layout.answers(), &run::render_answers(&answers)?)?;
    let mut budget = serde_json::to_value(stats).expect("stats serialize");
    budget["archive_records_added"] = json!(archive.added());
    log.finish(&[&layout.responses(), &layout.answers()], budget)?;
    Ok(format!(
        "answered {} probes with {} requests ({} failed samples, {} context overflows)",
        stats.instances, stats.requests, stats.failed_samples, stats.context_overflows
    ))
}

pub fn cmd_score(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let (gt, answers_path) = (layout.ground_truth(), layout.answers());
    let log = StageLog::start("score", cfg, vec![&gt, &answers_path]);
    let catalog = load_catalog(&cfg.paths.queries)?;
    let truths = study::read_ground_truth(&gt, &catalog)?;
    let answers = run::read_answers(&answers_path)?;
    let lines = report::score(&catalog, &truths, &answers, &cfg.match_policy())?;
    write(&layout.scores(), &report::render_scores(&lines)?)?;
    let correct = lines.iter().filter(|l| l.correct).count();
    log.finish(&[&layout.scores()], json!({ "probes": lines.len(), "correct": correct }))?;
    Ok(format!("scored {} probes, {correct} correct", lines.len()))
}

/// Writes the report files; fails with the gap count when the grid has
/// holes, after writing `gaps.csv`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let scores = layout.scores();
    let log = StageLog::start("report", cfg, vec![&scores]);
    let catalog = load_catalog(&cfg.paths.queries)?;
    let lines = report::read_scores(&scores)?;
    let table = report::build_table(&catalog, &lines, &cfg.method_list()?, &cfg.sorted_sizes());
    let dir = layout.report();
    let files = report::render_report(&table, &cfg.run_id());
    let paths: Vec<PathBuf> = files.iter().map(|(name, _)| dir.join(name)).collect();
    for ((_, body), path) in files.iter().zip(&paths) {
        write(path, body)?;
    }
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    log.finish(&refs, json!({ "gaps": table.gaps.len() }))?;
    if !table.is_complete() {
        return Err(BenchError::IncompleteGrid(table.gaps.len()));
    }
    Ok(format!("wrote {} report files to {}", files.len(), dir.display()))
}

/// ingest, ground-truth, run, score and report in sequence.
pub fn cmd_all(cfg: &RunConfig) -> Result<String> {
    let mut out = Vec::new();
    out.push(cmd_ingest(cfg)?);
    out.push(cmd_ground_truth(cfg)?);
    out.push(cmd_run(cfg, false)?);
    out.push(cmd_score(cfg)?);
    out.push(cmd_report(cfg)?);
    Ok(out.join("\n"))
}
