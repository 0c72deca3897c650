//! A simulated model that answers from the ground truth, used to record the
//! shipped replay archive.
//!
//! Whether an instance is answered correctly is a hash of the seed, the
//! method and the instance key, compared against a per-method accuracy that
//! falls with dataset size. The hash does not involve the size, so an
//! instance answered correctly at some size is answered correctly at every
//! smaller size. Wrong answers are fabricated near-misses, and the NLIDB
//! path really executes its SQL: the scripted interpreter only reads the
//! result rows back.

use aisbench_core::scoring::absolute_floor;
use aisbench_core::{AnswerKind, AnswerValue, GeoPoint, Method, Mmsi};
use sha2::{Digest, Sha256};

use crate::transport::{ChatRequest, Transport, TransportError};

pub const SCRIPTED_MODEL: &str = "scripted-oracle";

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Answer,
    SqlGenerate,
    SqlRegenerate,
    /// First result row (NULL cells as `None`), or the execution error.
    Interpret { row: Option<Vec<Option<String>>>, error: Option<String> },
}

/// Values a wrong answer may borrow from the subset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alternates {
    pub name: Option<String>,
    pub mmsi: Option<Mmsi>,
    pub port: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptCase {
    pub method: Method,
    pub size: usize,
    pub key: String,
    pub kind: AnswerKind,
    pub unit: String,
    pub truth: AnswerValue,
    pub stage: Stage,
    pub reference_sql: Option<String>,
    pub alternates: Alternates,
}

/// Accuracy by method and dataset size, linear between the sweep sizes.
pub fn accuracy(method: Method, size: usize) -> f64 {
    const SIZES: [f64; 6] = [5.0, 10.0, 25.0, 50.0, 75.0, 100.0];
    let table: [f64; 6] = match method {
        Method::Zsa1 => [0.85, 0.75, 0.60, 0.45, 0.38, 0.32],
        Method::Zsa2 => [0.60, 0.55, 0.50, 0.42, 0.36, 0.30],
        Method::Zsa3 | Method::Nlidb => [0.55, 0.50, 0.45, 0.40, 0.35, 0.30],
    };
    let n = size as f64;
    if n <= SIZES[0] {
        return table[0];
    }
    for i in 1..SIZES.len() {
        if n <= SIZES[i] {
            let r = (n - SIZES[i - 1]) / (SIZES[i] - SIZES[i - 1]);
            return table[i - 1] + (table[i] - table[i - 1]) * r;
        }
    }
    table[5] * SIZES[5] / n
}

pub struct ScriptedTransport {
    seed: u64,
}

impl ScriptedTransport {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn draw(&self, method: Method, key: &str) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(method.slug().as_bytes());
        h.update(key.as_bytes());
        let d = h.finalize();
        let v = u64::from_le_bytes(d[..8].try_into().expect("eight bytes"));
        (v >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn correct(&self, case: &ScriptCase) -> bool {
        if case.key.starts_with("Q12") {
            return true;
        }
        if case.key.starts_with("Q16") {
            return false;
        }
        self.draw(case.method, &case.key) < accuracy(case.method, case.size)
    }
}

const REFUSAL: &str = "I cannot determine this from the data provided.";

fn unit_word(unit: &str) -> &str {
    match unit {
        "min" => " minutes",
        "kn" => " knots",
        "t" => " tonnes",
        "count" | "" => "",
        "km" => " km",
        "km/h" => " km/h",
        "kg" => " kg",
        "kg/nm" => " kg/nm",
        "m3" => " m3",
        _ => "",
    }
}

fn integral(unit: &str) -> bool {
    matches!(unit, "count" | "")
}

fn render_number(v: f64, unit: &str) -> String {
    if integral(unit) {
        format!("The answer is {}.", v.round() as i64)
    } else {
        format!("The answer is {v:.3}{}.", unit_word(unit))
    }
}

fn render(value: &AnswerValue, unit: &str) -> String {
    match value {
        AnswerValue::Numeric { value, .. } => render_number(*value, unit),
        AnswerValue::Text(t) => match unit {
            "mmsi" => format!("It is ship {t}."),
            "port" => format!("The most visited port is \"{t}\"."),
            _ => format!("The ship's name is \"{t}\"."),
        },
        AnswerValue::EntitySet(items) if items.is_empty() => "None of the ships.".into(),
        AnswerValue::EntitySet(items) => format!("The ships are: {}.", items.join(", ")),
        AnswerValue::Boolean(true) => "Yes, it could.".into(),
        AnswerValue::Boolean(false) => "No, it could not.".into(),
        AnswerValue::Location(p) => format!("The last known position is {:.5}N, {:.5}E.", p.lat, p.lon),
        AnswerValue::Unknown | AnswerValue::Unparseable => REFUSAL.into(),
    }
}

/// A wrong value near the truth; `far` gives the outlier used inside
/// otherwise correct sample sets.
fn wrong(case: &ScriptCase, far: bool) -> AnswerValue {
    let alt_mmsi = || case.alternates.mmsi.map_or_else(|| "219999999".to_string(), |m| m.to_string());
    match (&case.truth, case.kind) {
        (AnswerValue::Numeric { value, unit }, _) => {
            let v = if far { value * 3.0 + 50.0 } else { value * 1.6 + 3.0 * absolute_floor(unit) + 7.0 };
            AnswerValue::numeric(if integral(unit) { v.round() } else { v }, unit)
        }
        (AnswerValue::Text(_), _) | (_, AnswerKind::Text) => AnswerValue::Text(match case.unit.as_str() {
            "mmsi" => alt_mmsi(),
            "port" => case.alternates.port.clone().unwrap_or_else(|| "Esbjerg".into()),
            _ => case.alternates.name.clone().unwrap_or_else(|| "NORDIC SPIRIT".into()),
        }),
        (AnswerValue::EntitySet(items), _) => match items.split_first() {
            Some((_, rest)) if !far => AnswerValue::EntitySet(rest.to_vec()),
            _ => AnswerValue::entity_set(items.iter().cloned().chain([alt_mmsi()])),
        },
        (_, AnswerKind::EntitySet) => AnswerValue::entity_set([alt_mmsi()]),
        (AnswerValue::Boolean(b), _) => AnswerValue::Boolean(!b),
        (_, AnswerKind::Boolean) => AnswerValue::Boolean(true),
        (AnswerValue::Location(p), _) => {
            AnswerValue::Location(GeoPoint { lat: p.lat + if far { 0.2 } else { 0.05 }, lon: p.lon })
        }
        (_, AnswerKind::Location) => AnswerValue::Location(GeoPoint { lat: 56.0, lon: 10.0 }),
        (_, AnswerKind::Numeric) => AnswerValue::numeric(3.0 * absolute_floor(&case.unit) + 7.0, &case.unit),
    }
}

/// Sample `i` of a self-consistency set. Correct sets hold the truth four
/// times out of five; wrong sets hold one near-miss three times.
fn respond(case: &ScriptCase, correct: bool, i: u32) -> String {
    let known = !matches!(case.truth, AnswerValue::Unknown | AnswerValue::Unparseable);
    match (correct, known, i % 5) {
        (true, true, 2) => render(&wrong(case, true), &case.unit),
        (true, true, _) => render(&case.truth, &case.unit),
        (true, false, _) => REFUSAL.into(),
        (false, true, 1) => render(&case.truth, &case.unit),
        (false, _, 3) => REFUSAL.into(),
        (false, _, _) => render(&wrong(case, false), &case.unit),
    }
}

fn fence(sql: &str) -> String {
    format!("Here is the query:\n```sql\n{sql}\n```")
}

/// SQL from the first result row, phrased for the answer kind.
fn interpret(case: &ScriptCase, row: &Option<Vec<Option<String>>>, error: &Option<String>) -> String {
    if error.is_some() {
        return format!("{REFUSAL} The query failed.");
    }
    let cells: Vec<&str> = row.iter().flatten().filter_map(|c| c.as_deref()).collect();
    let all_null = row.as_ref().is_none_or(|r| r.iter().all(Option::is_none));
    if all_null {
        return if case.kind == AnswerKind::EntitySet { "None of the ships.".into() } else { REFUSAL.into() };
    }
    match case.kind {
        AnswerKind::Numeric => {
            let v: Option<f64> = cells.first().and_then(|c| c.parse().ok());
            v.map_or_else(|| REFUSAL.into(), |v| format!("The result is {v}{}.", unit_word(&case.unit)))
        }
        AnswerKind::Location if cells.len() >= 2 => format!("The last known position is {}N, {}E.", cells[0], cells[1]),
        AnswerKind::Location => REFUSAL.into(),
        AnswerKind::EntitySet => {
            let ids: Vec<&str> = cells.iter().flat_map(|c| c.split(',')).map(str::trim).collect();
            format!("The ships are: {}.", ids.join(", "))
        }
        AnswerKind::Boolean => match cells[0].to_lowercase().as_str() {
            "yes" | "true" | "1" => "Yes, it could.".into(),
            _ => "No, it could not.".into(),
        },
        AnswerKind::Text => render(&AnswerValue::Text(cells[0].to_string()), &case.unit),
    }
}

impl Transport for ScriptedTransport {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<String, TransportError> {
        let case = req.case.ok_or_else(|| TransportError::Fatal("scripted transport needs a script case".into()))?;
        let qid = case.key.split('[').next().unwrap_or(&case.key);
        Ok(match &case.stage {
            Stage::SqlGenerate => match &case.reference_sql {
                Some(sql) => fence(sql),
                None => fence(&format!("SELECT answer FROM query_results WHERE query_id = '{qid}'")),
            },
            Stage::SqlRegenerate => fence(&format!("SELECT result FROM answers WHERE id = '{qid}'")),
            Stage::Interpret { row, error } => interpret(case, row, error),
            Stage::Answer => respond(case, self.correct(case), req.sample_index),
        })
    }

    fn model_id(&self) -> &str {
        SCRIPTED_MODEL
    }

    fn records(&self) -> bool {
        true
    }
}
