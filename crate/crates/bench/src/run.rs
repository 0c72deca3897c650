//! The run stage: every (method, size, probe instance) through the
//! transport, with per-sample parsing and self-consistency aggregation.
//!
//! Sizes run one after another; instances within a size run on a worker
//! pool of `sampling.parallelism` threads. Output order is the plan order,
//! whatever order the workers finish in.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aisbench_core::answer::canonical_text;
use aisbench_core::catalog::Params;
use aisbench_core::consistency::{aggregate, parse_answer};
use aisbench_core::prompt::{answer_instruction, build_prompt, PromptData, PromptError};
use aisbench_core::semantics::SemanticConfig;
use aisbench_core::{AnswerKind, AnswerValue, Catalog, DatasetBundle, Method, Mmsi, QueryId, QueryInstance};
use rayon::prelude::*;
use serde::Serialize;

use crate::archive::Archive;
use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::nlidb::{self, Backend, Limits, SqlExchange};
use crate::scripted::{Alternates, ScriptCase, Stage};
use crate::study::{Design, TruthRow};
use crate::transport::{request, sample, text_digest, ChatRequest, PrefixDigest, PromptBody, Transport};

pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const ANSWERS_FILE: &str = "answers.csv";
pub const ANSWERS_HEADER: [&str; 10] =
    ["method", "dataset_size", "query_id", "bindings", "answer_kind", "answer_payload", "parseable", "tie", "flagged", "note"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SqlLog {
    pub statement: Option<String>,
    pub status: String,
    pub regenerated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleLog {
    pub index: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub parsed: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<SqlLog>,
}

/// One line of `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseLog {
    pub method: String,
    pub dataset_size: usize,
    pub instance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<usize>,
    pub samples: Vec<SampleLog>,
    pub answer: String,
    pub note: String,
}

/// One line of `answers.csv`: the aggregated answer for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerRow {
    pub method: Method,
    pub dataset_size: usize,
    pub query: QueryId,
    pub bindings: Params,
    pub kind: AnswerKind,
    pub value: AnswerValue,
    pub parseable: usize,
    pub tie: bool,
    /// Every sample failed or the vote tied; scored as given.
    pub flagged: bool,
    pub note: String,
}

impl AnswerRow {
    pub fn key(&self) -> String {
        if self.bindings.is_empty() {
            self.query.to_string()
        } else {
            format!("{}[{}]", self.query, self.bindings)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub instances: usize,
    pub requests: usize,
    pub failed_samples: usize,
    pub context_overflows: usize,
    pub sql_executions: usize,
}

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    failed: AtomicUsize,
    overflows: AtomicUsize,
    executions: AtomicUsize,
}

pub struct RunInputs<'a> {
    pub cfg: &'a RunConfig,
    pub catalog: &'a Catalog,
    pub full: &'a DatasetBundle,
    pub design: &'a Design,
    pub truths: &'a [TruthRow],
    pub semantic: &'a SemanticConfig,
}

/// Where responses come from, and whether cases for the scripted model are
/// attached to requests.
pub struct Channel<'a> {
    pub transport: &'a dyn Transport,
    pub archive: Option<&'a Archive>,
    pub scripted: bool,
}

/// Values a scripted wrong answer may use, all different from the truth and
/// from the vessel the question names.
pub fn alternates(sub: &DatasetBundle, truth: &AnswerValue, inst: &QueryInstance) -> Alternates {
    let truth_text: Vec<String> = match truth {
        AnswerValue::Text(t) => vec![canonical_text(t)],
        AnswerValue::EntitySet(items) => items.iter().map(|s| canonical_text(s)).collect(),
        _ => Vec::new(),
    };
    let differs = |s: &str| !truth_text.contains(&canonical_text(s));
    Alternates {
        name: sub.statics.iter().filter_map(|s| s.name.as_deref()).find(|n| differs(n)).map(str::to_string),
        mmsi: sub.mmsis().into_iter().find(|&m| Some(m) != inst.mmsi() && differs(&m.to_string())),
        port: sub.ports.iter().map(|p| p.name.as_str()).find(|n| differs(n)).map(str::to_string),
    }
}

struct Job<'a> {
    method: Method,
    row: &'a TruthRow,
    case: Option<ScriptCase>,
}

impl Job<'_> {
    fn inst(&self) -> &QueryInstance {
        &self.row.instance
    }

    fn bound(&self) -> Vec<Mmsi> {
        self.inst().mmsi().into_iter().collect()
    }

    fn with_stage(&self, stage: Stage) -> Option<ScriptCase> {
        self.case.clone().map(|c| ScriptCase { stage, ..c })
    }

    fn parse(&self, text: &str) -> AnswerValue {
        let spec = &self.inst().spec;
        parse_answer(text, spec.kind, &spec.unit, &self.bound())
    }

    fn finish(&self, digest: Option<String>, tokens: Option<usize>, samples: Vec<SampleLog>, parsed: Vec<AnswerValue>, note: String) -> (ResponseLog, AnswerRow) {
        let inst = self.inst();
        let agg = aggregate(&parsed, inst.spec.kind);
        let log = ResponseLog {
            method: self.method.slug().to_string(),
            dataset_size: inst.dataset_size,
            instance: inst.key(),
            prompt_digest: digest,
            prompt_tokens: tokens,
            samples,
            answer: agg.value.payload(),
            note: note.clone(),
        };
        let row = AnswerRow {
            method: self.method,
            dataset_size: inst.dataset_size,
            query: inst.id(),
            bindings: inst.bindings.clone(),
            kind: inst.spec.kind,
            flagged: agg.parseable == 0 || agg.tie,
            value: agg.value,
            parseable: agg.parseable,
            tie: agg.tie,
            note,
        };
        (log, row)
    }
}

struct SizeRun<'a> {
    inputs: &'a RunInputs<'a>,
    channel: &'a Channel<'a>,
    counters: &'a Counters,
}

impl SizeRun<'_> {
    fn cfg(&self) -> &RunConfig {
        self.inputs.cfg
    }

    fn call(&self, req: &ChatRequest<'_>) -> Result<Result<String, String>> {
        self.counters.requests.fetch_add(1, Ordering::Relaxed);
        let (text, _) = request(self.channel.transport, self.channel.archive, req, self.cfg().sampling.retry_budget)?;
        if text.is_err() {
            self.counters.failed.fetch_add(1, Ordering::Relaxed);
        }
        Ok(text)
    }

    fn zero_shot(&self, job: &Job<'_>, data: &PromptData, prefix: &PrefixDigest) -> Result<(ResponseLog, AnswerRow)> {
        let s = &self.cfg().sampling;
        let prompt = match build_prompt(data, job.inst(), s.max_context_tokens) {
            Ok(p) => p,
            Err(e @ PromptError::ContextOverflow { .. }) => {
                self.counters.overflows.fetch_add(1, Ordering::Relaxed);
                return Ok(job.finish(None, None, Vec::new(), Vec::new(), e.to_string()));
            }
            Err(e) => return Err(BenchError::Data(e.to_string())),
        };
        let digest = prefix.finish(&prompt);
        let req = ChatRequest {
            body: PromptBody::Zsa(&prompt),
            digest: &digest,
            sample_index: 0,
            temperature: s.temperature,
            case: job.case.as_ref(),
        };
        self.counters.requests.fetch_add(s.samples as usize, Ordering::Relaxed);
        let results = sample(self.channel.transport, self.channel.archive, req, s.samples, s.retry_budget)?;
        let mut logs = Vec::new();
        let mut parsed = Vec::new();
        for r in results {
            let value = match &r.text {
                Ok(t) => job.parse(t),
                Err(_) => {
                    self.counters.failed.fetch_add(1, Ordering::Relaxed);
                    AnswerValue::Unparseable
                }
            };
            logs.push(SampleLog {
                index: r.index,
                response: r.text.as_ref().ok().cloned(),
                error: r.text.err(),
                parsed: value.payload(),
                sql: None,
            });
            parsed.push(value);
        }
        Ok(job.finish(Some(digest), Some(prompt.token_estimate), logs, parsed, String::new()))
    }

    fn execute(&self, backend: &Backend, cache: &Mutex<HashMap<String, SqlExchange>>, sql: Option<String>) -> SqlExchange {
        let Some(sql) = sql else {
            return SqlExchange {
                sql: String::new(),
                status: nlidb::ExecStatus::Error("the response contained no SQL statement".into()),
                columns: Vec::new(),
                first_row: None,
                rendered: String::new(),
                row_count: 0,
                truncated: false,
            };
        };
        if let Some(hit) = cache.lock().expect("cache lock").get(&sql) {
            return hit.clone();
        }
        self.counters.executions.fetch_add(1, Ordering::Relaxed);
        let ex = backend.execute(&sql, rayon::current_thread_index().unwrap_or(0));
        cache.lock().expect("cache lock").insert(sql, ex.clone());
        ex
    }

    /// Generate, execute, regenerate once on failure, then interpret; once
    /// per self-consistency sample.
    fn nlidb(&self, job: &Job<'_>, backend: &Backend, card: &str, cache: &Mutex<HashMap<String, SqlExchange>>) -> Result<(ResponseLog, AnswerRow)> {
        let s = &self.cfg().sampling;
        let inst = job.inst();
        let generation = nlidb::generation_prompt(card, &inst.question);
        let gen_digest = text_digest(&generation);
        let instruction = answer_instruction(inst.spec.kind, &inst.spec.unit);
        let mut logs = Vec::new();
        let mut parsed = Vec::new();
        for index in 0..s.samples {
            let ask = |body: &str, digest: &str, stage: Stage| -> Result<Result<String, String>> {
                let case = job.with_stage(stage);
                let req = ChatRequest {
                    body: PromptBody::Text(body),
                    digest,
                    sample_index: index,
                    temperature: s.temperature,
                    case: case.as_ref(),
                };
                self.call(&req)
            };
            let failed = |e: String, sql: Option<SqlLog>| SampleLog { index, response: None, error: Some(e), parsed: AnswerValue::Unparseable.payload(), sql };

            let first = match ask(&generation, &gen_digest, Stage::SqlGenerate)? {
                Ok(t) => t,
                Err(e) => {
                    logs.push(failed(e, None));
                    parsed.push(AnswerValue::Unparseable);
                    continue;
                }
            };
            let mut ex = self.execute(backend, cache, nlidb::extract_sql(&first));
            let mut regenerated = false;
            if let Some(err) = ex.error().map(str::to_string) {
                regenerated = true;
                let retry = nlidb::regeneration_prompt(card, &inst.question, &ex.sql, &err);
                match ask(&retry, &text_digest(&retry), Stage::SqlRegenerate)? {
                    Ok(t) => ex = self.execute(backend, cache, nlidb::extract_sql(&t)),
                    Err(e) => log::debug!("regeneration for {} failed: {e}", inst.key()),
                }
            }
            let sql_log = SqlLog {
                statement: (!ex.sql.is_empty()).then(|| ex.sql.clone()),
                status: ex.error().map_or_else(|| "ok".to_string(), str::to_string),
                regenerated,
            };
            let interpretation = nlidb::interpretation_prompt(&inst.question, &ex, &instruction);
            let stage = Stage::Interpret { row: ex.first_row.clone(), error: ex.error().map(str::to_string) };
            match ask(&interpretation, &text_digest(&interpretation), stage)? {
                Ok(text) => {
                    let value = job.parse(&text);
                    logs.push(SampleLog { index, response: Some(text), error: None, parsed: value.payload(), sql: Some(sql_log) });
                    parsed.push(value);
                }
                Err(e) => {
                    logs.push(failed(e, Some(sql_log)));
                    parsed.push(AnswerValue::Unparseable);
                }
            }
        }
        Ok(job.finish(Some(gen_digest), None, logs, parsed, String::new()))
    }

    fn size(&self, n: usize, methods: &[Method]) -> Result<Vec<(ResponseLog, AnswerRow)>> {
        let inputs = self.inputs;
        let cfg = inputs.cfg;
        let sub = inputs.design.subset(inputs.full, n)?;
        let rows: Vec<&TruthRow> = inputs.truths.iter().filter(|r| r.instance.dataset_size == n).collect();
        if rows.is_empty() {
            return Err(BenchError::Data(format!("ground truth has no instances for size {n}; rerun ground-truth")));
        }
        for r in &rows {
            if let Some(m) = r.instance.mmsi().filter(|&m| !sub.contains(m)) {
                return Err(BenchError::Data(format!(
                    "ground truth probes vessel {m} which is not in the size-{n} subset; rerun ground-truth"
                )));
            }
        }
        let mut out = Vec::new();
        for &method in methods {
            let jobs: Vec<Job<'_>> = rows
                .iter()
                .map(|row| Job {
                    method,
                    row,
                    case: self.channel.scripted.then(|| ScriptCase {
                        method,
                        size: n,
                        key: row.instance.key(),
                        kind: row.instance.spec.kind,
                        unit: row.instance.spec.unit.clone(),
                        truth: row.truth.value.clone(),
                        stage: Stage::Answer,
                        reference_sql: nlidb::reference_sql(row.instance.id(), &row.instance.bindings),
                        alternates: alternates(&sub, &row.truth.value, &row.instance),
                    }),
                })
                .collect();
            log::info!("size {n}: {} with {} probes", method.label(), jobs.len());
            let results: Vec<(ResponseLog, AnswerRow)> = if method == Method::Nlidb {
                let limits = Limits {
                    timeout: std::time::Duration::from_millis(cfg.backend.statement_timeout_ms),
                    row_cap: cfg.backend.row_cap,
                    byte_cap: cfg.backend.byte_cap,
                };
                let backend = Backend::load(&sub, limits, cfg.sampling.parallelism)?;
                let card = nlidb::schema_card(&sub);
                let cache = Mutex::new(HashMap::new());
                jobs.par_iter().map(|j| self.nlidb(j, &backend, &card, &cache)).collect::<Result<_>>()?
            } else {
                let data = match method {
                    Method::Zsa1 => PromptData::raw(&sub),
                    Method::Zsa2 => PromptData::compressed(&sub, cfg.compression()),
                    _ => PromptData::semantic(&sub, inputs.semantic),
                };
                let prefix = PrefixDigest::new(&data);
                jobs.par_iter().map(|j| self.zero_shot(j, &data, &prefix)).collect::<Result<_>>()?
            };
            out.extend(results);
        }
        Ok(out)
    }
}

/// Runs the whole grid. Results are ordered by size, method, then plan order.
pub fn run_grid(inputs: &RunInputs<'_>, channel: &Channel<'_>) -> Result<(Vec<ResponseLog>, Vec<AnswerRow>, RunStats)> {
    let cfg = inputs.cfg;
    let methods = cfg.method_list()?;
    let counters = Counters::default();
    let runner = SizeRun { inputs, channel, counters: &counters };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sampling.parallelism)
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    let mut logs = Vec::new();
    let mut answers = Vec::new();
    for n in cfg.sorted_sizes() {
        for (l, a) in pool.install(|| runner.size(n, &methods))? {
            logs.push(l);
            answers.push(a);
        }
    }
    let stats = RunStats {
        instances: answers.len(),
        requests: counters.requests.load(Ordering::Relaxed),
        failed_samples: counters.failed.load(Ordering::Relaxed),
        context_overflows: counters.overflows.load(Ordering::Relaxed),
        sql_executions: counters.executions.load(Ordering::Relaxed),
    };
    Ok((logs, answers, stats))
}

pub fn render_responses(logs: &[ResponseLog]) -> String {
    let mut out = String::new();
    for l in logs {
        out.push_str(&serde_json::to_string(l).expect("logs serialize"));
        out.push('\n');
    }
    out
}

pub fn render_answers(rows: &[AnswerRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ANSWERS_HEADER).map_err(BenchError::data)?;
    for r in rows {
        w.write_record([
            r.method.slug().to_string(),
            r.dataset_size.to_string(),
            r.query.to_string(),
            r.bindings.to_string(),
            r.kind.as_str().to_string(),
            r.value.payload(),
            r.parseable.to_string(),
            r.tie.to_string(),
            r.flagged.to_string(),
            r.note.clone(),
        ])
        .map_err(BenchError::data)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(BenchError::data)?).expect("csv output is UTF-8"))
}

pub fn read_answers(path: &Path) -> Result<Vec<AnswerRow>> {
    if !path.exists() {
        return Err(BenchError::MissingArtifact { path: path.to_path_buf(), stage: "run" });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().collect::<Vec<_>>() != ANSWERS_HEADER {
        return Err(BenchError::Data(format!("{}: expected header {}", path.display(), ANSWERS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}:{}: {e}", path.display(), line + 2)))?;
        let bad = |what: &str| BenchError::Data(format!("{}:{}: bad {what}", path.display(), line + 2));
        let kind: AnswerKind = rec[4].parse().map_err(|_| bad("answer kind"))?;
        out.push(AnswerRow {
            method: rec[0].parse().map_err(|_| bad("method"))?,
            dataset_size: rec[1].parse().map_err(|_| bad("dataset size"))?,
            query: rec[2].parse().map_err(|_| bad("query id"))?,
            bindings: rec[3].parse().map_err(|_| bad("bindings"))?,
            kind,
            value: AnswerValue::from_payload(kind, &rec[5]).ok_or_else(|| bad("answer payload"))?,
            parseable: rec[6].parse().map_err(|_| bad("parseable count"))?,
            tie: rec[7].parse().map_err(|_| bad("tie flag"))?,
            flagged: rec[8].parse().map_err(|_| bad("flagged"))?,
            note: rec[9].to_string(),
        });
    }
    Ok(out)
}
