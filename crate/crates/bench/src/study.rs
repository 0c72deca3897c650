//! The study design: which vessels are probed, which vessels make up each
//! dataset size, and the ground truth for every probe instance.
//!
//! A small probe pool is chosen once from the full dataset and pinned into
//! every subset, so each size asks the same questions about the same ships
//! and only the surrounding traffic grows.

use std::collections::BTreeMap;
use std::path::Path;

use aisbench_core::catalog::{instantiate, probe_plan, probe_pool, Params, ProbeShortfall, Requirement};
use aisbench_core::oracle::OracleContext;
use aisbench_core::prepare::{restrict, selection_order};
use aisbench_core::{Answer, AnswerKind, AnswerValue, Catalog, DatasetBundle, Mmsi, QueryId, QueryInstance};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::labels::{labels_at, ExpertLabel};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const GROUND_TRUTH_HEADER: [&str; 6] =
    ["query_id", "dataset_size", "bindings", "answer_kind", "answer_payload", "tolerance"];

/// Everything a probe vessel may be asked about: each parameterized spec's
/// applicability, plus a leg requirement for every route named in a
/// dataset-level spec so route questions have a defined answer at every size.
pub fn pool_needs(catalog: &Catalog) -> Vec<Vec<Requirement>> {
    let mut needs: Vec<Vec<Requirement>> = Vec::new();
    for spec in catalog.specs() {
        if spec.is_parameterized() {
            needs.push(spec.applicability.0.clone());
        } else if let (Some(from), Some(to)) = (spec.params.get("from"), spec.params.get("to")) {
            needs.push(vec![Requirement::Leg { from: from.into(), to: to.into() }]);
        }
    }
    needs.retain(|n| !n.is_empty());
    needs.sort();
    needs.dedup();
    needs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    /// Probe vessels, pinned into every subset.
    pub pool: Vec<Mmsi>,
    /// Selection order over the full dataset; the size-n subset is the first n.
    pub order: Vec<Mmsi>,
}

impl Design {
    /// `ferries` are the labelled ferries of the full dataset.
    pub fn new(cfg: &RunConfig, catalog: &Catalog, full: &DatasetBundle, ferries: &[Mmsi]) -> Result<Self> {
        let ctx = OracleContext::new(full, cfg.segmentation.to_core(), BTreeMap::new(), ferries.to_vec());
        let pool = probe_pool(&full.mmsis(), &pool_needs(catalog), cfg.probe_pool_size, cfg.seed, |need, m| {
            need.iter().all(|r| ctx.satisfies(r, m))
        });
        let order = selection_order(full, &pool, cfg.seed).map_err(BenchError::data)?;
        let design = Self { pool, order };
        for n in cfg.sorted_sizes() {
            design.members(n)?;
        }
        Ok(design)
    }

    /// Sorted members of the size-n subset.
    pub fn members(&self, n: usize) -> Result<Vec<Mmsi>> {
        if n > self.order.len() {
            return Err(BenchError::Config(format!("dataset size {n} exceeds the {} vessels ingested", self.order.len())));
        }
        if n < self.pool.len() {
            return Err(BenchError::Config(format!(
                "dataset size {n} is smaller than the probe pool of {}; lower probe_pool_size",
                self.pool.len()
            )));
        }
        let mut keep = self.order[..n].to_vec();
        keep.sort();
        Ok(keep)
    }

    pub fn subset(&self, full: &DatasetBundle, n: usize) -> Result<DatasetBundle> {
        Ok(restrict(full, &self.members(n)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub instance: QueryInstance,
    pub truth: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeShortfall {
    pub dataset_size: usize,
    pub shortfall: ProbeShortfall,
}

/// Probe instances and oracle answers for one subset.
pub fn truths_for_size(
    cfg: &RunConfig,
    catalog: &Catalog,
    design: &Design,
    sub: &DatasetBundle,
    labels: &[ExpertLabel],
    ferries: &[Mmsi],
) -> Result<(Vec<TruthRow>, Vec<ProbeShortfall>)> {
    let n = sub.size();
    let ctx = OracleContext::new(sub, cfg.segmentation.to_core(), labels_at(labels, n), ferries.to_vec());
    let (plan, short) = probe_plan(catalog, &design.pool, cfg.probes_per_query, cfg.seed, n, |s, m| ctx.applicable(s, m));
    let rows = plan
        .into_iter()
        .map(|instance| {
            let truth = ctx.answer(&instance).map_err(|e| {
                BenchError::Data(format!("{e} (size {n}); check the expert labels cover every size"))
            })?;
            Ok(TruthRow { instance, truth })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, short))
}

/// Ground truth over every configured size.
pub fn ground_truth(
    cfg: &RunConfig,
    catalog: &Catalog,
    full: &DatasetBundle,
    design: &Design,
    labels: &[ExpertLabel],
    ferries: &[Mmsi],
) -> Result<(Vec<TruthRow>, Vec<SizeShortfall>)> {
    let per_size = cfg
        .sorted_sizes()
        .into_par_iter()
        .map(|n| {
            let sub = design.subset(full, n)?;
            truths_for_size(cfg, catalog, design, &sub, labels, ferries)
                .map(|(rows, short)| (n, rows, short))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut shortfalls = Vec::new();
    for (n, r, s) in per_size {
        rows.extend(r);
        shortfalls.extend(s.into_iter().map(|shortfall| SizeShortfall { dataset_size: n, shortfall }));
    }
    Ok((rows, shortfalls))
}

pub fn render_ground_truth(rows: &[TruthRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GROUND_TRUTH_HEADER).map_err(BenchError::data)?;
    for r in rows {
        let i = &r.instance;
        w.write_record([
            i.id().to_string(),
            i.dataset_size.to_string(),
            i.bindings.to_string(),
            i.spec.kind.as_str().to_string(),
            r.truth.value.payload(),
            r.truth.tolerance.to_string(),
        ])
        .map_err(BenchError::data)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(BenchError::data)?).expect("csv output is UTF-8"))
}

/// Reads `ground_truth.csv` back into instances of `catalog`.
pub fn read_ground_truth(path: &Path, catalog: &Catalog) -> Result<Vec<TruthRow>> {
    if !path.exists() {
        return Err(BenchError::MissingArtifact { path: path.to_path_buf(), stage: "ground-truth" });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().collect::<Vec<_>>() != GROUND_TRUTH_HEADER {
        return Err(BenchError::Data(format!("{}: expected header {}", path.display(), GROUND_TRUTH_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let at = || format!("{}:{}", path.display(), line + 2);
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", at())))?;
        let bad = |what: &str| BenchError::Data(format!("{}: bad {what}", at()));
        let id: QueryId = rec[0].parse().map_err(|_| bad("query id"))?;
        let n: usize = rec[1].parse().map_err(|_| bad("dataset size"))?;
        let bindings: Params = rec[2].parse().map_err(|_| bad("bindings"))?;
        let kind: AnswerKind = rec[3].parse().map_err(|_| bad("answer kind"))?;
        let spec = catalog.get(id);
        if spec.kind != kind {
            return Err(BenchError::Data(format!("{}: {id} is a {} query in the catalog", at(), spec.kind.as_str())));
        }
        let value = AnswerValue::from_payload(kind, &rec[4]).ok_or_else(|| bad("answer payload"))?;
        let tolerance: f64 = rec[5].parse().map_err(|_| bad("tolerance"))?;
        let instance = instantiate(spec, bindings, n).map_err(BenchError::data)?;
        out.push(TruthRow { instance, truth: Answer::new(value, tolerance) });
    }
    Ok(out)
}
