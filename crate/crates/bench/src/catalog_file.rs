//! `queries.csv`: the on-disk form of the query catalog.
//!
//! Columns are `id,category,template,answer_kind,unit,oracle_mode,
//! applicability,params,tolerance`. An empty tolerance means the scoring
//! default.

use std::path::Path;

use aisbench_core::catalog::{Applicability, Params};
use aisbench_core::scoring::DEFAULT_NUMERIC_TOLERANCE;
use aisbench_core::{Catalog, QuerySpec};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    id: String,
    category: String,
    template: String,
    answer_kind: String,
    unit: String,
    oracle_mode: String,
    applicability: String,
    params: String,
    tolerance: Option<f64>,
}

fn to_spec(r: Row) -> Result<QuerySpec, String> {
    let field = |name: &str, v: &str| format!("{}: bad {name} {v:?}", r.id);
    Ok(QuerySpec {
        id: r.id.parse().map_err(|_| field("id", &r.id))?,
        category: r.category.parse().map_err(|_| field("category", &r.category))?,
        template: r.template.trim().to_string(),
        kind: r.answer_kind.parse().map_err(|_| field("answer_kind", &r.answer_kind))?,
        unit: r.unit.trim().to_string(),
        oracle_mode: r.oracle_mode.parse().map_err(|_| field("oracle_mode", &r.oracle_mode))?,
        applicability: r.applicability.parse::<Applicability>().map_err(|_| field("applicability", &r.applicability))?,
        params: r.params.parse::<Params>().map_err(|_| field("params", &r.params))?,
        tolerance: r.tolerance.unwrap_or(DEFAULT_NUMERIC_TOLERANCE),
    })
}

pub fn parse_catalog(text: &str) -> Result<Catalog, String> {
    let mut specs = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<Row>() {
        specs.push(to_spec(row.map_err(|e| e.to_string())?)?);
    }
    Catalog::new(specs).map_err(|e| e.to_string())
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("cannot read catalog {}: {e}", path.display())))?;
    parse_catalog(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

pub fn render_catalog(catalog: &Catalog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in catalog.specs() {
        w.serialize(Row {
            id: s.id.to_string(),
            category: s.category.as_str().into(),
            template: s.template.clone(),
            answer_kind: s.kind.as_str().into(),
            unit: s.unit.clone(),
            oracle_mode: s.oracle_mode.as_str().into(),
            applicability: s.applicability.to_string(),
            params: s.params.to_string(),
            tolerance: Some(s.tolerance),
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
