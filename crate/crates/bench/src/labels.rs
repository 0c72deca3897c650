//! Expert labels for the queries the oracle cannot compute: one row per
//! (query, dataset size) with the answer payload and a note on how it was
//! decided.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use aisbench_core::{AnswerValue, Catalog, Mmsi, QueryId};

use crate::error::{BenchError, Result};
use crate::synth::{FleetEntry, Role};

pub const LABELS_HEADER: [&str; 4] = ["query_id", "dataset_size", "answer_payload", "annotator_note"];

/// Convoy query: member groups need two vessels present to count as a cluster.
pub const CLUSTER_QUERY: QueryId = QueryId::new(16).expect("valid id");
pub const FERRY_QUERY: QueryId = QueryId::new(17).expect("valid id");

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertLabel {
    pub query: QueryId,
    pub dataset_size: usize,
    pub value: AnswerValue,
    pub note: String,
}

/// Labels for one subset, derived from the fleet manifest.
pub fn label_subset(fleet: &[FleetEntry], subset: &[Mmsi]) -> Vec<ExpertLabel> {
    let present: BTreeSet<Mmsi> = subset.iter().copied().collect();
    let n = present.len();
    let mut groups: BTreeMap<&str, Vec<Mmsi>> = BTreeMap::new();
    for e in fleet.iter().filter(|e| e.role == Role::Convoy && present.contains(&e.mmsi)) {
        groups.entry(e.group.as_deref().unwrap_or("")).or_default().push(e.mmsi);
    }
    let clustered: Vec<String> =
        groups.values().filter(|g| g.len() >= 2).flatten().map(Mmsi::to_string).collect();
    let ferries: Vec<String> =
        fleet.iter().filter(|e| e.role == Role::Ferry && present.contains(&e.mmsi)).map(|e| e.mmsi.to_string()).collect();
    vec![
        ExpertLabel {
            query: CLUSTER_QUERY,
            dataset_size: n,
            value: AnswerValue::entity_set(clustered),
            note: "convoy groups with at least two members in the subset".into(),
        },
        ExpertLabel {
            query: FERRY_QUERY,
            dataset_size: n,
            value: AnswerValue::entity_set(ferries),
            note: "scheduled shuttle between two fixed terminals".into(),
        },
    ]
}

pub fn render_labels(labels: &[ExpertLabel]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LABELS_HEADER).map_err(BenchError::data)?;
    let mut sorted: Vec<&ExpertLabel> = labels.iter().collect();
    sorted.sort_by_key(|l| (l.dataset_size, l.query));
    for l in sorted {
        w.write_record([l.query.to_string(), l.dataset_size.to_string(), l.value.payload(), l.note.clone()])
            .map_err(BenchError::data)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(BenchError::data)?).expect("csv output is UTF-8"))
}

/// Reads the label file; payloads are parsed with the catalog's answer kind.
pub fn read_labels(path: &Path, catalog: &Catalog) -> Result<Vec<ExpertLabel>> {
    if !path.exists() {
        return Err(BenchError::MissingArtifact { path: path.to_path_buf(), stage: "label-experts" });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().collect::<Vec<_>>() != LABELS_HEADER {
        return Err(BenchError::Data(format!("{}: expected header {}", path.display(), LABELS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let at = || format!("{}:{}", path.display(), i + 2);
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", at())))?;
        let query: QueryId = rec[0].parse().map_err(|_| BenchError::Data(format!("{}: bad query id {:?}", at(), &rec[0])))?;
        let dataset_size: usize =
            rec[1].parse().map_err(|_| BenchError::Data(format!("{}: bad dataset size {:?}", at(), &rec[1])))?;
        let kind = catalog.get(query).kind;
        let value = AnswerValue::from_payload(kind, &rec[2])
            .ok_or_else(|| BenchError::Data(format!("{}: payload {:?} is not a {}", at(), &rec[2], kind.as_str())))?;
        out.push(ExpertLabel { query, dataset_size, value, note: rec[3].to_string() });
    }
    Ok(out)
}

/// Labels for one dataset size, keyed by query.
pub fn labels_at(labels: &[ExpertLabel], size: usize) -> BTreeMap<QueryId, AnswerValue> {
    labels.iter().filter(|l| l.dataset_size == size).map(|l| (l.query, l.value.clone())).collect()
}

/// Vessels labelled as ferries at `size`.
pub fn ferries_at(labels: &[ExpertLabel], size: usize) -> Vec<Mmsi> {
    match labels_at(labels, size).get(&FERRY_QUERY) {
        Some(AnswerValue::EntitySet(ids)) => ids.iter().filter_map(|s| Mmsi::parse(s)).collect(),
        _ => Vec::new(),
    }
}

/// Kind check used when labels are written by hand.
pub fn check_kinds(labels: &[ExpertLabel], catalog: &Catalog) -> Result<()> {
    for l in labels {
        let want = catalog.get(l.query).kind;
        if l.value.kind().is_some_and(|k| k != want) {
            return Err(BenchError::Data(format!("label for {} at size {} is not a {}", l.query, l.dataset_size, want.as_str())));
        }
    }
    Ok(())
}
