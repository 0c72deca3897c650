//! Typed answers shared by the oracle, the response parser and the scorer.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::catalog::AnswerKind;
use crate::geo::GeoPoint;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum AnswerValue {
    Numeric { value: f64, unit: String },
    Text(String),
    /// Sorted, deduplicated identifiers (MMSIs or port names).
    EntitySet(Vec<String>),
    Boolean(bool),
    Location(GeoPoint),
    /// Ground truth that the data cannot determine, e.g. a missing emission
    /// figure.
    Unknown,
    /// A response the parser could not read, or a refusal.
    Unparseable,
}

impl AnswerValue {
    pub fn entity_set<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = items.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        AnswerValue::EntitySet(v)
    }

    pub fn numeric(value: f64, unit: &str) -> Self {
        AnswerValue::Numeric { value, unit: unit.to_string() }
    }

    pub fn kind(&self) -> Option<AnswerKind> {
        Some(match self {
            AnswerValue::Numeric { .. } => AnswerKind::Numeric,
            AnswerValue::Text(_) => AnswerKind::Text,
            AnswerValue::EntitySet(_) => AnswerKind::EntitySet,
            AnswerValue::Boolean(_) => AnswerKind::Boolean,
            AnswerValue::Location(_) => AnswerKind::Location,
            AnswerValue::Unknown | AnswerValue::Unparseable => return None,
        })
    }

    pub fn is_parseable(&self) -> bool {
        !matches!(self, AnswerValue::Unparseable)
    }

    /// Key under which two answers count as the same vote.
    pub fn canonical_key(&self) -> String {
        match self {
            AnswerValue::Numeric { value, unit } => format!("n:{}:{}", value, unit),
            AnswerValue::Text(t) => format!("t:{}", canonical_text(t)),
            AnswerValue::EntitySet(items) => {
                let mut v: Vec<String> = items.iter().map(|s| canonical_text(s)).collect();
                v.sort();
                v.dedup();
                format!("s:{}", v.join(";"))
            }
            AnswerValue::Boolean(b) => format!("b:{b}"),
            // Rounded to about 100 m so near-identical fixes vote together.
            AnswerValue::Location(p) => {
                format!("l:{}:{}", math::round(p.lat * 1000.0) as i64, math::round(p.lon * 1000.0) as i64)
            }
            AnswerValue::Unknown => "unknown".to_string(),
            AnswerValue::Unparseable => "unparseable".to_string(),
        }
    }

    /// Text form used in `ground_truth.csv` and run outputs.
    pub fn payload(&self) -> String {
        match self {
            AnswerValue::Numeric { value, unit } if unit.is_empty() => format!("{value}"),
            AnswerValue::Numeric { value, unit } => format!("{value} {unit}"),
            AnswerValue::Text(t) => t.clone(),
            AnswerValue::EntitySet(items) => items.join(";"),
            AnswerValue::Boolean(true) => "yes".to_string(),
            AnswerValue::Boolean(false) => "no".to_string(),
            AnswerValue::Location(p) => format!("{},{}", p.lat, p.lon),
            AnswerValue::Unknown => "unknown".to_string(),
            AnswerValue::Unparseable => "unparseable".to_string(),
        }
    }

    /// Inverse of [`payload`](Self::payload) for a known kind.
    pub fn from_payload(kind: AnswerKind, text: &str) -> Option<Self> {
        match text {
            "unknown" => return Some(AnswerValue::Unknown),
            "unparseable" => return Some(AnswerValue::Unparseable),
            _ => {}
        }
        Some(match kind {
            AnswerKind::Numeric => {
                let (num, unit) = text.split_once(' ').unwrap_or((text, ""));
                AnswerValue::Numeric { value: num.parse().ok()?, unit: unit.to_string() }
            }
            AnswerKind::Text => AnswerValue::Text(text.to_string()),
            AnswerKind::EntitySet if text.is_empty() => AnswerValue::EntitySet(Vec::new()),
            AnswerKind::EntitySet => AnswerValue::entity_set(text.split(';')),
            AnswerKind::Boolean => match text {
                "yes" => AnswerValue::Boolean(true),
                "no" => AnswerValue::Boolean(false),
                _ => return None,
            },
            AnswerKind::Location => {
                let (lat, lon) = text.split_once(',')?;
                AnswerValue::Location(GeoPoint::new(lat.parse().ok()?, lon.parse().ok()?)?)
            }
        })
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.payload())
    }
}

/// Lowercase, trimmed, inner whitespace collapsed, trailing period and
/// surrounding quotes dropped.
pub fn canonical_text(s: &str) -> String {
    let t = s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '*' | '`' | '.'));
    let mut out = String::with_capacity(t.len());
    for word in t.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// An answer with its matching tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub value: AnswerValue,
    /// Relative tolerance for numeric matching, in [0, 1].
    pub tolerance: f64,
}

impl Answer {
    pub fn new(value: AnswerValue, tolerance: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&tolerance));
        Self { value, tolerance }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn payload_round_trips() {
        let cases = [
            (AnswerKind::Numeric, AnswerValue::numeric(42.5, "km")),
            (AnswerKind::Numeric, AnswerValue::numeric(5.0, "")),
            (AnswerKind::Text, AnswerValue::Text("Aarhus".into())),
            (AnswerKind::EntitySet, AnswerValue::entity_set(["219000002", "219000001"])),
            (AnswerKind::EntitySet, AnswerValue::EntitySet(vec![])),
            (AnswerKind::Boolean, AnswerValue::Boolean(false)),
            (AnswerKind::Location, AnswerValue::Location(GeoPoint { lat: 55.6, lon: 10.2 })),
            (AnswerKind::Numeric, AnswerValue::Unknown),
        ];
        for (kind, v) in cases {
            assert_eq!(AnswerValue::from_payload(kind, &v.payload()), Some(v.clone()), "{v:?}");
        }
    }

    #[test]
    fn canonical_text_folds_case_and_noise() {
        assert_eq!(canonical_text("  \"Aarhus\". "), "aarhus");
        assert_eq!(canonical_text("NORD   STAR"), "nord star");
        assert_eq!(AnswerValue::Text("Aarhus".into()).canonical_key(), AnswerValue::Text("aarhus".into()).canonical_key());
    }
}
