//! Reading typed answers out of free-text model responses, and
//! self-consistency aggregation over samples.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::answer::AnswerValue;
use crate::catalog::AnswerKind;
use crate::geo::GeoPoint;
use crate::model::Mmsi;

const REFUSALS: &[&str] = &[
    "cannot determine",
    "can't determine",
    "cannot be determined",
    "unable to",
    "i cannot",
    "i can't",
    "not possible to determine",
    "insufficient",
    "not enough information",
    "no way to know",
];

pub fn is_refusal(text: &str) -> bool {
    let lower = text.to_lowercase();
    REFUSALS.iter().any(|r| lower.contains(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Km,
    M,
    Nm,
    Mi,
    Min,
    H,
    Kn,
    Kmh,
    T,
    Kg,
    KgPerNm,
    M3,
    Count,
}

impl Unit {
    fn from_catalog(unit: &str) -> Option<Unit> {
        Some(match unit {
            "km" => Unit::Km,
            "min" => Unit::Min,
            "kn" => Unit::Kn,
            "km/h" => Unit::Kmh,
            "t" => Unit::T,
            "kg" => Unit::Kg,
            "kg/nm" => Unit::KgPerNm,
            "m3" => Unit::M3,
            "count" => Unit::Count,
            _ => return None,
        })
    }

    fn dimension(self) -> u8 {
        match self {
            Unit::Km | Unit::M | Unit::Nm | Unit::Mi => 0,
            Unit::Min | Unit::H => 1,
            Unit::Kn | Unit::Kmh => 2,
            Unit::T | Unit::Kg => 3,
            Unit::KgPerNm => 4,
            Unit::M3 => 5,
            Unit::Count => 6,
        }
    }

    /// Value of one unit in the dimension's base (km, min, km/h, kg, ...).
    fn scale(self) -> f64 {
        match self {
            Unit::Km => 1.0,
            Unit::M => 0.001,
            Unit::Nm => 1.852,
            Unit::Mi => 1.609344,
            Unit::Min => 1.0,
            Unit::H => 60.0,
            Unit::Kn => 1.852,
            Unit::Kmh => 1.0,
            Unit::T => 1000.0,
            Unit::Kg => 1.0,
            Unit::KgPerNm | Unit::M3 | Unit::Count => 1.0,
        }
    }

    fn convert(value: f64, from: Unit, to: Unit) -> Option<f64> {
        (from.dimension() == to.dimension()).then(|| value * from.scale() / to.scale())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '/' || c == '³'
}

/// Unit spelled right after a number.
fn unit_after(rest: &str) -> Option<Unit> {
    let t = rest.trim_start_matches([' ', '\u{a0}']);
    let word: String = t.chars().take_while(|&c| is_word_char(c)).collect();
    let lower = word.to_lowercase();
    let after = t[word.len()..].trim_start().to_lowercase();
    let per_hour = after.starts_with("per hour") || after.starts_with("an hour");
    let per_nm = after.starts_with("per nautical mile") || after.starts_with("per nm");
    Some(match lower.as_str() {
        "km/h" | "kmh" | "kph" | "km/hr" => Unit::Kmh,
        "km" | "kilometers" | "kilometres" | "kilometer" | "kilometre" if per_hour => Unit::Kmh,
        "km" | "kilometers" | "kilometres" | "kilometer" | "kilometre" => Unit::Km,
        "m" | "meters" | "metres" | "meter" | "metre" => Unit::M,
        "nm" | "nmi" | "nautical" => Unit::Nm,
        "mi" | "miles" | "mile" => Unit::Mi,
        "min" | "mins" | "minutes" | "minute" => Unit::Min,
        "h" | "hr" | "hrs" | "hours" | "hour" => Unit::H,
        "kn" | "knots" | "knot" | "kt" | "kts" => Unit::Kn,
        "kg/nm" | "kg/nmi" => Unit::KgPerNm,
        "kg" | "kilograms" | "kilogram" if per_nm => Unit::KgPerNm,
        "kg" | "kilograms" | "kilogram" => Unit::Kg,
        "t" | "tonnes" | "tons" | "tonne" | "ton" | "metric" => Unit::T,
        "m3" | "m³" | "cubic" => Unit::M3,
        "ships" | "ship" | "vessels" | "vessel" | "trips" | "trip" | "round" | "times" => Unit::Count,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NumberToken {
    value: f64,
    start: usize,
    end: usize,
    integer_digits: usize,
    is_integer: bool,
}

/// Decimal numbers in order of appearance. Commas followed by exactly three
/// digits are read as thousands separators. Digits glued to a letter (as
/// in "Q15") or to a colon (clock times) are skipped.
fn numbers(text: &str) -> Vec<NumberToken> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if !b[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let mut start = i;
        let glued = i > 0
            && (b[i - 1].is_ascii_alphabetic()
                || b[i - 1] == b'_'
                || (b[i - 1] == b':' && i > 1 && b[i - 2].is_ascii_digit()));
        let mut digits = String::new();
        let mut integer_digits = 0;
        let mut group = 0;
        while i < b.len() {
            if b[i].is_ascii_digit() {
                digits.push(b[i] as char);
                integer_digits += 1;
                group += 1;
                i += 1;
            } else if b[i] == b','
                && (1..=3).contains(&group)
                && b.get(i + 1..i + 4).is_some_and(|s| s.iter().all(u8::is_ascii_digit))
                && !b.get(i + 4).is_some_and(u8::is_ascii_digit)
            {
                group = 0;
                i += 1;
            } else {
                break;
            }
        }
        let mut is_integer = true;
        if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
            is_integer = false;
            digits.push('.');
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                digits.push(b[i] as char);
                i += 1;
            }
        }
        if start > 0 && b[start - 1] == b'-' && !(start > 1 && b[start - 2].is_ascii_alphanumeric()) {
            start -= 1;
            digits.insert(0, '-');
        }
        let clock = i < b.len() && b[i] == b':' && b.get(i + 1).is_some_and(u8::is_ascii_digit);
        if glued || clock {
            continue;
        }
        if let Ok(value) = digits.parse::<f64>() {
            out.push(NumberToken { value, start, end: i, integer_digits, is_integer });
        }
    }
    out
}

/// Nine-digit identifiers not embedded in longer digit runs.
fn mmsi_tokens(text: &str) -> Vec<Mmsi> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i - s == 9 {
                if let Some(m) = Mmsi::parse(&text[s..i]) {
                    out.push(m);
                }
            }
        } else {
            i += 1;
        }
    }
    out
}

fn parse_numeric(text: &str, unit: &str, bound: &[Mmsi]) -> AnswerValue {
    let expected = Unit::from_catalog(unit);
    let mut explicit: Option<f64> = None;
    let mut bare: Option<f64> = None;
    for tok in numbers(text) {
        if tok.is_integer && tok.integer_digits >= 9 {
            if !unit.is_empty() || bound.iter().any(|m| f64::from(m.get()) == tok.value) {
                continue;
            }
        }
        match (unit_after(&text[tok.end..]), expected) {
            (Some(u), Some(e)) => {
                if let Some(v) = Unit::convert(tok.value, u, e) {
                    explicit = Some(v);
                }
            }
            (Some(Unit::Count), None) | (None, _) => bare = Some(tok.value),
            (Some(_), None) => {}
        }
    }
    match explicit.or(bare) {
        Some(v) => AnswerValue::numeric(v, unit),
        None => AnswerValue::Unparseable,
    }
}

fn hemisphere_after(rest: &str) -> Option<char> {
    let t = rest.trim_start_matches(|c: char| c == ' ' || c == '°' || c == '\u{a0}');
    let c = t.chars().next()?;
    let next = t.chars().nth(1);
    let standalone = next.map_or(true, |n| !n.is_alphabetic());
    matches!(c, 'N' | 'S' | 'E' | 'W' | 'n' | 's' | 'e' | 'w').then_some(c.to_ascii_uppercase()).filter(|_| standalone)
}

fn parse_location(text: &str) -> AnswerValue {
    let toks: Vec<NumberToken> = numbers(text).into_iter().filter(|t| !(t.is_integer && t.integer_digits >= 9)).collect();
    let (mut lat, mut lon) = (None, None);
    for t in &toks {
        match hemisphere_after(&text[t.end..]) {
            Some('N') => lat = Some(t.value),
            Some('S') => lat = Some(-t.value),
            Some('E') => lon = Some(t.value),
            Some('W') => lon = Some(-t.value),
            _ => {}
        }
    }
    if lat.is_none() || lon.is_none() {
        let lower = text.to_lowercase();
        let labelled = |labels: &[&str]| {
            labels
                .iter()
                .filter_map(|l| lower.rfind(l).map(|p| p + l.len()))
                .max()
                .and_then(|p| toks.iter().find(|t| t.start >= p).map(|t| t.value))
        };
        lat = lat.or_else(|| labelled(&["latitude", "lat"]));
        lon = lon.or_else(|| labelled(&["longitude", "lon"]));
    }
    if lat.is_none() || lon.is_none() {
        if toks.len() >= 2 {
            lat = Some(toks[toks.len() - 2].value);
            lon = Some(toks[toks.len() - 1].value);
        }
    }
    match (lat, lon) {
        (Some(la), Some(lo)) => GeoPoint::new(la, lo).map_or(AnswerValue::Unparseable, AnswerValue::Location),
        _ => AnswerValue::Unparseable,
    }
}

fn parse_entity_set(text: &str, bound: &[Mmsi]) -> AnswerValue {
    let ids: Vec<String> = mmsi_tokens(text).into_iter().filter(|m| !bound.contains(m)).map(|m| m.to_string()).collect();
    if !ids.is_empty() {
        return AnswerValue::entity_set(ids);
    }
    let lower = text.to_lowercase();
    let empty_markers = ["none", "no ships", "no other", "no vessels", "no ship", "no vessel", "nobody", "empty"];
    if lower.trim() == "no" || empty_markers.iter().any(|m| lower.contains(m)) {
        AnswerValue::EntitySet(Vec::new())
    } else {
        AnswerValue::Unparseable
    }
}

fn parse_boolean(text: &str) -> AnswerValue {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric() && c != '\'').filter(|w| !w.is_empty()).collect();
    for (i, w) in words.iter().enumerate() {
        let negated = words.get(i + 1) == Some(&"not");
        match *w {
            "yes" | "true" => return AnswerValue::Boolean(true),
            "could" | "can" if !negated => return AnswerValue::Boolean(true),
            "could" | "can" => return AnswerValue::Boolean(false),
            "no" | "false" | "cannot" | "can't" | "couldn't" | "not" => return AnswerValue::Boolean(false),
            _ => {}
        }
    }
    AnswerValue::Unparseable
}

fn clean_text(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c == '"' || c == '*' || c == '`' || c == '\'')
        .trim_end_matches(['.', '!'])
        .trim()
        .to_string()
}

fn parse_text(text: &str, unit: &str, bound: &[Mmsi]) -> AnswerValue {
    if unit == "mmsi" {
        return mmsi_tokens(text)
            .into_iter()
            .filter(|m| !bound.contains(m))
            .last()
            .map_or(AnswerValue::Unparseable, |m| AnswerValue::Text(m.to_string()));
    }
    let line = text.trim().lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
    let quoted = ['"', '*'].iter().find_map(|&q| {
        let parts: Vec<&str> = line.split(q).collect();
        (parts.len() >= 3).then(|| parts[parts.len() - 2]).filter(|s| !s.trim().is_empty())
    });
    let candidate = quoted
        .map(str::to_string)
        .or_else(|| line.rfind(" is ").map(|p| line[p + 4..].to_string()))
        .or_else(|| line.rfind(':').map(|p| line[p + 1..].to_string()))
        .unwrap_or_else(|| line.to_string());
    let cleaned = clean_text(&candidate);
    if cleaned.is_empty() || cleaned.len() > 80 {
        AnswerValue::Unparseable
    } else {
        AnswerValue::Text(cleaned)
    }
}

/// Typed reading of one response. `bound` lists the MMSIs named in the
/// question, which are never taken as the answer.
pub fn parse_answer(text: &str, kind: AnswerKind, unit: &str, bound: &[Mmsi]) -> AnswerValue {
    if text.trim().is_empty() || is_refusal(text) {
        return AnswerValue::Unparseable;
    }
    match kind {
        AnswerKind::Numeric => parse_numeric(text, unit, bound),
        AnswerKind::Location => parse_location(text),
        AnswerKind::EntitySet => parse_entity_set(text, bound),
        AnswerKind::Boolean => parse_boolean(text),
        AnswerKind::Text => parse_text(text, unit, bound),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub value: AnswerValue,
    /// More than one payload shared the top vote count.
    pub tie: bool,
    pub parseable: usize,
}

/// Median of numeric samples (mean of the middle pair for even counts), or
/// the most frequent canonical payload for other kinds with ties going to
/// the earliest sample. Unparseable samples are ignored.
pub fn aggregate(samples: &[AnswerValue], kind: AnswerKind) -> Aggregate {
    let parsed: Vec<&AnswerValue> = samples.iter().filter(|a| a.is_parseable()).collect();
    if parsed.is_empty() {
        return Aggregate { value: AnswerValue::Unparseable, tie: false, parseable: 0 };
    }
    if kind == AnswerKind::Numeric {
        let mut values: Vec<f64> = Vec::new();
        let mut unit = String::new();
        for a in &parsed {
            if let AnswerValue::Numeric { value, unit: u } = a {
                values.push(*value);
                unit = u.clone();
            }
        }
        if values.is_empty() {
            return Aggregate { value: AnswerValue::Unparseable, tie: false, parseable: 0 };
        }
        let n = values.len();
        values.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 };
        return Aggregate { value: AnswerValue::Numeric { value: median, unit }, tie: false, parseable: n };
    }
    let keys: Vec<String> = parsed.iter().map(|a| a.canonical_key()).collect();
    let mut best = 0;
    let mut best_count = 0;
    let mut tie = false;
    for (i, k) in keys.iter().enumerate() {
        if keys[..i].contains(k) {
            continue;
        }
        let count = keys.iter().filter(|x| *x == k).count();
        if count > best_count {
            best = i;
            best_count = count;
            tie = false;
        } else if count == best_count {
            tie = true;
        }
    }
    Aggregate { value: parsed[best].clone(), tie, parseable: parsed.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn num(text: &str, unit: &str) -> AnswerValue {
        parse_answer(text, AnswerKind::Numeric, unit, &[])
    }

    fn m(n: u32) -> Mmsi {
        Mmsi::new(n).unwrap()
    }

    #[test]
    fn numeric_with_unit() {
        assert_eq!(num("The total is 42.5 km", "km"), AnswerValue::numeric(42.5, "km"));
        assert_eq!(num("It traveled 42,500 m in total.", "km"), AnswerValue::numeric(42.5, "km"));
        assert_eq!(num("About 1.5 hours", "min"), AnswerValue::numeric(90.0, "min"));
        assert_eq!(num("18.52 km/h", "kn"), AnswerValue::numeric(10.0, "kn"));
        assert_eq!(num("10 knots", "km/h"), AnswerValue::numeric(18.52, "km/h"));
        assert_eq!(num("2.5 tonnes", "kg"), AnswerValue::numeric(2500.0, "kg"));
        assert_eq!(num("12,345.5 t", "t"), AnswerValue::numeric(12345.5, "t"));
        assert_eq!(num("20 kilometers per hour", "km/h"), AnswerValue::numeric(20.0, "km/h"));
    }

    #[test]
    fn numeric_prefers_explicit_unit_and_skips_ids() {
        let bound = [m(219000001)];
        let t = "Ship 219000001 traveled 42.5 km over 3 legs";
        assert_eq!(parse_answer(t, AnswerKind::Numeric, "km", &bound), AnswerValue::numeric(42.5, "km"));
        assert_eq!(num("Between 12:30 and 14:00 it made 4 trips", "count"), AnswerValue::numeric(4.0, "count"));
        assert_eq!(num("There are 5 ships in the dataset.", "count"), AnswerValue::numeric(5.0, "count"));
    }

    #[test]
    fn unitless_keeps_long_ids_but_not_bound_mmsi() {
        let bound = [m(219000001)];
        let t = "The IMO number of ship 219000001 is 9123456.";
        assert_eq!(parse_answer(t, AnswerKind::Numeric, "", &bound), AnswerValue::numeric(9123456.0, ""));
    }

    #[test]
    fn refusals_are_unparseable() {
        assert_eq!(num("I cannot determine this", "km"), AnswerValue::Unparseable);
        assert_eq!(num("no numbers here", "km"), AnswerValue::Unparseable);
        assert_eq!(parse_answer("", AnswerKind::Text, "name", &[]), AnswerValue::Unparseable);
    }

    #[test]
    fn location_forms() {
        let p = |lat, lon| AnswerValue::Location(GeoPoint { lat, lon });
        assert_eq!(parse_answer("around 55.6N, 10.2E", AnswerKind::Location, "", &[]), p(55.6, 10.2));
        assert_eq!(parse_answer("57.72° N, 10.58° E", AnswerKind::Location, "", &[]), p(57.72, 10.58));
        assert_eq!(parse_answer("latitude 56.1, longitude 10.25", AnswerKind::Location, "", &[]), p(56.1, 10.25));
        assert_eq!(parse_answer("Last seen at (56.15, 10.22).", AnswerKind::Location, "", &[]), p(56.15, 10.22));
        assert_eq!(parse_answer("at 12.0W", AnswerKind::Location, "", &[]), AnswerValue::Unparseable);
    }

    #[test]
    fn entity_sets() {
        let bound = [m(219000001)];
        let t = "Ship 219000001 came close to 219000007 and 219000003.";
        assert_eq!(parse_answer(t, AnswerKind::EntitySet, "", &bound), AnswerValue::entity_set(["219000003", "219000007"]));
        assert_eq!(parse_answer("None.", AnswerKind::EntitySet, "", &bound), AnswerValue::EntitySet(vec![]));
        assert_eq!(parse_answer("Several ships.", AnswerKind::EntitySet, "", &bound), AnswerValue::Unparseable);
    }

    #[test]
    fn booleans() {
        let b = |t| parse_answer(t, AnswerKind::Boolean, "", &[]);
        assert_eq!(b("Yes, it could."), AnswerValue::Boolean(true));
        assert_eq!(b("No."), AnswerValue::Boolean(false));
        assert_eq!(b("The ship could not pass."), AnswerValue::Boolean(false));
        assert_eq!(b("It could pass through."), AnswerValue::Boolean(true));
        assert_eq!(b("Maybe"), AnswerValue::Unparseable);
    }

    #[test]
    fn text_forms() {
        let t = |s| parse_answer(s, AnswerKind::Text, "port", &[]);
        assert_eq!(t("The most visited port is Aarhus."), AnswerValue::Text("Aarhus".into()));
        assert_eq!(t("Aarhus"), AnswerValue::Text("Aarhus".into()));
        assert_eq!(t("Answer: \"Frederikshavn\""), AnswerValue::Text("Frederikshavn".into()));
        assert_eq!(t("Port: Skagen"), AnswerValue::Text("Skagen".into()));
        let ship = parse_answer("Ship 219000004 (NORD) is the one.", AnswerKind::Text, "mmsi", &[]);
        assert_eq!(ship, AnswerValue::Text("219000004".into()));
    }

    #[test]
    fn aggregate_examples() {
        let n = |v| AnswerValue::numeric(v, "km");
        let a = aggregate(&[n(12.1), n(13.0), n(12.4)], AnswerKind::Numeric);
        assert_eq!(a.value, n(12.4));
        let t = |s: &str| AnswerValue::Text(s.into());
        let a = aggregate(&[t("Aarhus"), t("Skagen"), t("aarhus")], AnswerKind::Text);
        assert_eq!(a.value, t("Aarhus"));
        assert!(!a.tie);
        let a = aggregate(&[t("A"), t("B")], AnswerKind::Text);
        assert_eq!(a.value, t("A"));
        assert!(a.tie);
        let a = aggregate(&[AnswerValue::Unparseable, n(3.0), n(5.0)], AnswerKind::Numeric);
        assert_eq!(a.value, n(4.0));
        assert_eq!(a.parseable, 2);
        let a = aggregate(&[AnswerValue::Unparseable], AnswerKind::Text);
        assert_eq!(a.value, AnswerValue::Unparseable);
    }
}
