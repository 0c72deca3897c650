//! Score and report stages. Scoring joins aggregated answers to the ground
//! truth per probe; the report recomputes every mean from `scores.csv`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use aisbench_core::scoring::{match_answer, MatchPolicy, ProbeOutcome, ReportTable, ScoreRow};
use aisbench_core::{Catalog, Category, Method, QueryId};

use crate::error::{BenchError, Result};
use crate::run::AnswerRow;
use crate::study::TruthRow;

pub const SCORES_FILE: &str = "scores.csv";
pub const SCORES_HEADER: [&str; 7] = ["method", "dataset_size", "query_id", "category", "instance", "correct", "flagged"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreLine {
    pub method: Method,
    pub dataset_size: usize,
    pub query: QueryId,
    pub category: Category,
    pub instance: String,
    pub correct: bool,
    pub flagged: bool,
}

/// One line per answered probe. An answer without a matching ground-truth
/// row means the run is stale.
pub fn score(catalog: &Catalog, truths: &[TruthRow], answers: &[AnswerRow], policy: &MatchPolicy) -> Result<Vec<ScoreLine>> {
    let index: HashMap<(usize, String), &TruthRow> =
        truths.iter().map(|t| ((t.instance.dataset_size, t.instance.key()), t)).collect();
    answers
        .iter()
        .map(|a| {
            let key = a.key();
            let truth = index.get(&(a.dataset_size, key.clone())).ok_or_else(|| {
                BenchError::Data(format!("answer for {key} at size {} has no ground truth; rerun run", a.dataset_size))
            })?;
            Ok(ScoreLine {
                method: a.method,
                dataset_size: a.dataset_size,
                query: a.query,
                category: catalog.get(a.query).category,
                instance: key,
                correct: match_answer(&a.value, &truth.truth, policy),
                flagged: a.flagged,
            })
        })
        .collect()
}

pub fn render_scores(lines: &[ScoreLine]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCORES_HEADER).map_err(BenchError::data)?;
    for l in lines {
        w.write_record([
            l.method.slug(),
            &l.dataset_size.to_string(),
            &l.query.to_string(),
            l.category.as_str(),
            &l.instance,
            if l.correct { "1" } else { "0" },
            if l.flagged { "1" } else { "0" },
        ])
        .map_err(BenchError::data)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(BenchError::data)?).expect("csv output is UTF-8"))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreLine>> {
    if !path.exists() {
        return Err(BenchError::MissingArtifact { path: path.to_path_buf(), stage: "score" });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().collect::<Vec<_>>() != SCORES_HEADER {
        return Err(BenchError::Data(format!("{}: expected header {}", path.display(), SCORES_HEADER.join(","))));
    }
    let flag = |s: &str| match s {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}:{}: {e}", path.display(), line + 2)))?;
        let bad = |what: &str| BenchError::Data(format!("{}:{}: bad {what}", path.display(), line + 2));
        out.push(ScoreLine {
            method: rec[0].parse().map_err(|_| bad("method"))?,
            dataset_size: rec[1].parse().map_err(|_| bad("dataset size"))?,
            query: rec[2].parse().map_err(|_| bad("query id"))?,
            category: rec[3].parse().map_err(|_| bad("category"))?,
            instance: rec[4].to_string(),
            correct: flag(&rec[5]).ok_or_else(|| bad("correct flag"))?,
            flagged: flag(&rec[6]).ok_or_else(|| bad("flagged"))?,
        });
    }
    Ok(out)
}

/// Groups probe lines into per-query rows.
pub fn score_rows(lines: &[ScoreLine]) -> Vec<ScoreRow> {
    let mut grouped: BTreeMap<(Method, usize, QueryId), ScoreRow> = BTreeMap::new();
    for l in lines {
        grouped
            .entry((l.method, l.dataset_size, l.query))
            .or_insert_with(|| ScoreRow {
                method: l.method,
                query: l.query,
                category: l.category,
                dataset_size: l.dataset_size,
                outcomes: Vec::new(),
            })
            .outcomes
            .push(ProbeOutcome { instance: l.instance.clone(), correct: l.correct, flagged: l.flagged });
    }
    grouped.into_values().collect()
}

/// Report files by name, in writing order.
pub fn render_report(table: &ReportTable, run_id: &str) -> Vec<(String, String)> {
    let mut files = vec![("all.csv".to_string(), table.render_all(run_id))];
    for cat in Category::ALL {
        files.push((format!("{}.csv", cat.report_stem()), table.render_category(cat)));
    }
    for &m in &table.methods {
        files.push((format!("radar_{}.csv", m.slug()), table.render_radar(m)));
    }
    files.push(("gaps.csv".to_string(), table.render_gaps()));
    files
}

pub fn build_table(catalog: &Catalog, lines: &[ScoreLine], methods: &[Method], sizes: &[usize]) -> ReportTable {
    ReportTable::build(catalog, &score_rows(lines), methods, sizes)
}
