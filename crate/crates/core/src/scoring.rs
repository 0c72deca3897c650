//! Answer matching, per-query scores and the report tables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use crate::answer::{canonical_text, Answer, AnswerValue};
use crate::catalog::{Catalog, Category, QueryId};
use crate::geo::great_circle_distance;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Zsa1,
    Zsa2,
    Zsa3,
    Nlidb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Zsa1, Method::Zsa2, Method::Zsa3, Method::Nlidb];

    pub fn slug(self) -> &'static str {
        match self {
            Method::Zsa1 => "zsa1",
            Method::Zsa2 => "zsa2",
            Method::Zsa3 => "zsa3",
            Method::Nlidb => "nlidb",
        }
    }

    /// Name used in the `model` column of the report files.
    pub fn label(self) -> &'static str {
        match self {
            Method::Zsa1 => "Raw",
            Method::Zsa2 => "Compressed",
            Method::Zsa3 => "Semantic",
            Method::Nlidb => "PostGIS",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.slug() == t || m.label().to_lowercase() == t)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

pub const DEFAULT_NUMERIC_TOLERANCE: f64 = 0.05;

/// Smallest magnitude the relative tolerance is applied to, per unit, so a
/// truth of zero still admits a small absolute error.
pub fn absolute_floor(unit: &str) -> f64 {
    match unit {
        "km" | "kn" | "km/h" | "t" | "kg" | "kg/nm" | "m3" | "count" => 1.0,
        "min" => 20.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPolicy {
    /// Minimum Jaccard index for entity sets.
    pub set_threshold: f64,
    pub location_radius_m: f64,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self { set_threshold: 1.0, location_radius_m: 1000.0 }
    }
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let ca: Vec<String> = a.iter().map(|s| canonical_text(s)).collect();
    let cb: Vec<String> = b.iter().map(|s| canonical_text(s)).collect();
    let inter = ca.iter().filter(|x| cb.contains(x)).count();
    let union = ca.len() + cb.iter().filter(|x| !ca.contains(x)).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Whether a predicted value counts as correct against the truth. A truth
/// the data cannot determine is matched only by a non-answer.
pub fn match_answer(predicted: &AnswerValue, truth: &Answer, policy: &MatchPolicy) -> bool {
    use AnswerValue::*;
    match (predicted, &truth.value) {
        (Unparseable | Unknown, Unknown) => true,
        (Unparseable, _) | (_, Unparseable) => false,
        (Numeric { value: p, unit: pu }, Numeric { value: t, unit: tu }) => {
            pu == tu
                && p.is_finite()
                && math::abs(p - t) <= truth.tolerance * math::abs(*t).max(absolute_floor(tu)) + 1e-9 * math::abs(*t)
        }
        (Text(p), Text(t)) => canonical_text(p) == canonical_text(t),
        (EntitySet(p), EntitySet(t)) => jaccard(p, t) >= policy.set_threshold,
        (Boolean(p), Boolean(t)) => p == t,
        (Location(p), Location(t)) => great_circle_distance(*p, *t) <= policy.location_radius_m,
        _ => false,
    }
}

/// Mean of 0/1 outcomes; `None` for an empty list.
pub fn score_query(outcomes: &[bool]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    Some(outcomes.iter().filter(|&&o| o).count() as f64 / outcomes.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    /// Instance key, e.g. `Q1[MMSI=219000001]`.
    pub instance: String,
    pub correct: bool,
    /// Every sample failed, or the vote was tied.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub method: Method,
    pub query: QueryId,
    pub category: Category,
    pub dataset_size: usize,
    pub outcomes: Vec<ProbeOutcome>,
}

impl ScoreRow {
    pub fn score(&self) -> f64 {
        let o: Vec<bool> = self.outcomes.iter().map(|o| o.correct).collect();
        score_query(&o).unwrap_or(0.0)
    }
}

/// A (method, size, query) cell with no score row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Gap {
    pub method: Method,
    pub dataset_size: usize,
    pub query: QueryId,
}

/// Means per (method, size), per category and per query, recomputed from
/// the score rows alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub per_query: BTreeMap<(Method, usize, QueryId), f64>,
    categories: Vec<(QueryId, Category)>,
    pub gaps: Vec<Gap>,
}

impl ReportTable {
    pub fn build(catalog: &Catalog, rows: &[ScoreRow], methods: &[Method], sizes: &[usize]) -> Self {
        let mut methods = methods.to_vec();
        methods.sort();
        methods.dedup();
        let mut sizes = sizes.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        let mut per_query = BTreeMap::new();
        for r in rows {
            per_query.insert((r.method, r.dataset_size, r.query), r.score());
        }
        let mut gaps = Vec::new();
        for &m in &methods {
            for &n in &sizes {
                for s in catalog.specs() {
                    if !per_query.contains_key(&(m, n, s.id)) {
                        gaps.push(Gap { method: m, dataset_size: n, query: s.id });
                    }
                }
            }
        }
        let categories = catalog.specs().iter().map(|s| (s.id, s.category)).collect();
        Self { methods, sizes, per_query, categories, gaps }
    }

    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }

    fn mean_over(&self, m: Method, n: usize, filter: impl Fn(Category) -> bool) -> Option<f64> {
        let scores: Vec<f64> = self
            .categories
            .iter()
            .filter(|(_, c)| filter(*c))
            .filter_map(|(q, _)| self.per_query.get(&(m, n, *q)).copied())
            .collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }

    /// Mean over all queries present for the cell.
    pub fn overall(&self, m: Method, n: usize) -> Option<f64> {
        self.mean_over(m, n, |_| true)
    }

    pub fn category(&self, m: Method, n: usize, cat: Category) -> Option<f64> {
        self.mean_over(m, n, |c| c == cat)
    }

    /// `all.csv`: one row per method and size.
    pub fn render_all(&self, run_id: &str) -> String {
        let mut out = String::from("dataset_size,run_id,score,model\n");
        for &m in &self.methods {
            for &n in &self.sizes {
                if let Some(s) = self.overall(m, n) {
                    let _ = writeln!(out, "{n},{run_id},{s:.6},{}", m.label());
                }
            }
        }
        out
    }

    pub fn render_category(&self, cat: Category) -> String {
        let mut out = String::from("category,dataset_size,score,model\n");
        for &m in &self.methods {
            for &n in &self.sizes {
                if let Some(s) = self.category(m, n, cat) {
                    let _ = writeln!(out, "{},{n},{s:.6},{}", cat.report_stem(), m.label());
                }
            }
        }
        out
    }

    /// Per-query scores for one method.
    pub fn render_radar(&self, m: Method) -> String {
        let mut out = String::from("query_id,dataset_size,score\n");
        for (q, _) in &self.categories {
            for &n in &self.sizes {
                if let Some(s) = self.per_query.get(&(m, n, *q)) {
                    let _ = writeln!(out, "{q},{n},{s:.6}");
                }
            }
        }
        out
    }

    pub fn render_gaps(&self) -> String {
        let mut out = String::from("model,dataset_size,query_id\n");
        for g in &self.gaps {
            let _ = writeln!(out, "{},{},{}", g.method.label(), g.dataset_size, g.query);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{AnswerKind, Applicability, OracleMode, Params, QuerySpec, CATEGORY_SIZES};
    use crate::geo::GeoPoint;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn truth(v: AnswerValue) -> Answer {
        Answer::new(v, DEFAULT_NUMERIC_TOLERANCE)
    }

    fn km(v: f64) -> AnswerValue {
        AnswerValue::numeric(v, "km")
    }

    #[test]
    fn numeric_rules() {
        let p = MatchPolicy::default();
        assert!(match_answer(&km(42.5), &truth(km(42.5)), &p));
        assert!(match_answer(&km(44.6), &truth(km(42.5)), &p));
        assert!(!match_answer(&km(44.7), &truth(km(42.5)), &p));
        assert!(match_answer(&km(0.04), &truth(km(0.0)), &p));
        assert!(!match_answer(&AnswerValue::numeric(42.5, "min"), &truth(km(42.5)), &p));
        let exact = Answer::new(AnswerValue::numeric(5.0, ""), 0.0);
        assert!(match_answer(&AnswerValue::numeric(5.0, ""), &exact, &p));
        assert!(!match_answer(&AnswerValue::numeric(6.0, ""), &exact, &p));
    }

    #[test]
    fn text_set_bool_location() {
        let p = MatchPolicy::default();
        assert!(match_answer(&AnswerValue::Text("aarhus".into()), &truth(AnswerValue::Text("Aarhus".into())), &p));
        let set = |v: &[&str]| AnswerValue::entity_set(v.iter().copied());
        assert!(match_answer(&set(&["b", "a"]), &truth(set(&["a", "b"])), &p));
        assert!(!match_answer(&set(&["a"]), &truth(set(&["a", "b"])), &p));
        assert!(match_answer(&set(&[]), &truth(set(&[])), &p));
        let loose = MatchPolicy { set_threshold: 0.5, ..p };
        assert!(match_answer(&set(&["a"]), &truth(set(&["a", "b"])), &loose));
        assert!(!match_answer(&AnswerValue::Boolean(true), &truth(AnswerValue::Boolean(false)), &p));
        let loc = |lat, lon| AnswerValue::Location(GeoPoint { lat, lon });
        assert!(match_answer(&loc(55.0, 10.0), &truth(loc(55.005, 10.0)), &p));
        assert!(!match_answer(&loc(55.0, 10.0), &truth(loc(55.02, 10.0)), &p));
        assert!(!match_answer(&AnswerValue::Unparseable, &truth(km(1.0)), &p));
        assert!(!match_answer(&AnswerValue::Text("1".into()), &truth(km(1.0)), &p));
        assert!(match_answer(&AnswerValue::Unparseable, &truth(AnswerValue::Unknown), &p));
        assert!(!match_answer(&km(1.0), &truth(AnswerValue::Unknown), &p));
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_query(&[true, true, true]), Some(1.0));
        assert_eq!(score_query(&[true, false, true, false, true]), Some(0.6));
        assert_eq!(score_query(&[false]), Some(0.0));
        assert_eq!(score_query(&[]), None);
    }

    fn catalog() -> Catalog {
        let mut specs = Vec::new();
        let mut id = 1u8;
        for (cat, n) in CATEGORY_SIZES {
            for _ in 0..n {
                specs.push(QuerySpec {
                    id: QueryId::new(id).unwrap(),
                    category: cat,
                    template: "q?".to_string(),
                    kind: AnswerKind::Numeric,
                    unit: String::new(),
                    oracle_mode: OracleMode::Computed,
                    applicability: Applicability::default(),
                    params: Params::default(),
                    tolerance: 0.05,
                });
                id += 1;
            }
        }
        Catalog::new(specs).unwrap()
    }

    fn rows(methods: &[Method], sizes: &[usize], c: &Catalog) -> Vec<ScoreRow> {
        let mut out = Vec::new();
        for &m in methods {
            for &n in sizes {
                for s in c.specs() {
                    let correct = (usize::from(s.id.get()) + n) % 3 != 0;
                    out.push(ScoreRow {
                        method: m,
                        query: s.id,
                        category: s.category,
                        dataset_size: n,
                        outcomes: vec![ProbeOutcome { instance: s.id.to_string(), correct, flagged: false }],
                    });
                }
            }
        }
        out
    }

    #[test]
    fn full_grid_shapes() {
        let c = catalog();
        let sizes = [5, 10, 25, 50, 75, 100];
        let t = ReportTable::build(&c, &rows(&Method::ALL, &sizes, &c), &Method::ALL, &sizes);
        assert!(t.is_complete());
        assert_eq!(t.render_all("run-1").lines().count(), 1 + 24);
        for cat in Category::ALL {
            assert_eq!(t.render_category(cat).lines().count(), 1 + 24);
        }
        assert_eq!(t.render_radar(Method::Zsa1).lines().count(), 1 + 27 * 6);
    }

    #[test]
    fn missing_cells_are_gaps() {
        let c = catalog();
        let mut r = rows(&[Method::Zsa1], &[5], &c);
        r.remove(3);
        let t = ReportTable::build(&c, &r, &[Method::Zsa1], &[5]);
        assert_eq!(t.gaps, vec![Gap { method: Method::Zsa1, dataset_size: 5, query: QueryId::new(4).unwrap() }]);
    }

    #[test]
    fn method_names() {
        assert_eq!("zsa2".parse::<Method>(), Ok(Method::Zsa2));
        assert_eq!("PostGIS".parse::<Method>(), Ok(Method::Nlidb));
        assert!("sql".parse::<Method>().is_err());
    }

    fn arb_value() -> impl Strategy<Value = AnswerValue> {
        prop_oneof![
            (-1e6f64..1e6, prop::sample::select(vec!["km", "min", "", "t"])).prop_map(|(v, u)| AnswerValue::numeric(v, u)),
            "[A-Za-z ]{1,12}".prop_map(AnswerValue::Text),
            prop::collection::vec("[0-9]{9}", 0..5).prop_map(AnswerValue::entity_set),
            any::<bool>().prop_map(AnswerValue::Boolean),
            (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(lat, lon)| AnswerValue::Location(GeoPoint { lat, lon })),
        ]
    }

    proptest! {
        #[test]
        fn match_is_reflexive(v in arb_value(), tol in 0.0f64..1.0) {
            prop_assert!(match_answer(&v, &Answer::new(v.clone(), tol), &MatchPolicy::default()));
        }

        #[test]
        fn score_in_unit_interval_and_order_free(mut o in prop::collection::vec(any::<bool>(), 1..30)) {
            let s = score_query(&o).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            o.reverse();
            prop_assert_eq!(score_query(&o).unwrap(), s);
        }
    }
}
