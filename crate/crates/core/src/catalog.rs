//! The 27-query registry, question rendering and probe planning.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::Mmsi;

pub const QUERY_COUNT: usize = 27;
pub const MMSI_PLACEHOLDER: &str = "[MMSI]";
pub const DEFAULT_PROBES_PER_QUERY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryId(u8);

impl QueryId {
    pub const fn new(n: u8) -> Option<Self> {
        if n >= 1 && n as usize <= QUERY_COUNT {
            Some(Self(n))
        } else {
            None
        }
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = QueryId> {
        (1..=QUERY_COUNT as u8).map(QueryId)
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

impl FromStr for QueryId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix('Q').or_else(|| t.strip_prefix('q')).unwrap_or(t);
        digits.parse::<u8>().ok().and_then(QueryId::new).ok_or_else(|| CatalogError::Field("id", s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Attribute,
    IndividualTrajectory,
    Interaction,
    DataFusion,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::Attribute, Category::IndividualTrajectory, Category::Interaction, Category::DataFusion];

    /// Name used in `queries.csv`.
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Attribute => "attribute",
            Category::IndividualTrajectory => "individual-trajectory",
            Category::Interaction => "interaction",
            Category::DataFusion => "data-fusion",
        }
    }

    /// Stem of the per-category report file.
    pub fn report_stem(self) -> &'static str {
        match self {
            Category::Attribute => "attribute",
            Category::IndividualTrajectory => "individual-trajectory",
            Category::Interaction => "ship-interaction",
            Category::DataFusion => "fusion",
        }
    }
}

impl FromStr for Category {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| CatalogError::Field("category", s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnswerKind {
    Numeric,
    Text,
    EntitySet,
    Boolean,
    Location,
}

impl AnswerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerKind::Numeric => "numeric",
            AnswerKind::Text => "text",
            AnswerKind::EntitySet => "entity_set",
            AnswerKind::Boolean => "boolean",
            AnswerKind::Location => "location",
        }
    }
}

impl FromStr for AnswerKind {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [AnswerKind::Numeric, AnswerKind::Text, AnswerKind::EntitySet, AnswerKind::Boolean, AnswerKind::Location]
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| CatalogError::Field("answer_kind", s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Computed,
    ExpertFixture,
}

impl OracleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMode::Computed => "computed",
            OracleMode::ExpertFixture => "expert-fixture",
        }
    }
}

impl FromStr for OracleMode {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "computed" => Ok(OracleMode::Computed),
            "expert-fixture" => Ok(OracleMode::ExpertFixture),
            _ => Err(CatalogError::Field("oracle_mode", s.to_string())),
        }
    }
}

/// A property a probe vessel must have for a query to be answerable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Requirement {
    Name,
    Imo,
    AnnualCo2,
    Co2Rate,
    Dimensions,
    BeamDraught,
    Moving,
    Ferry,
    Leg { from: String, to: String },
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Name => f.write_str("name"),
            Requirement::Imo => f.write_str("imo"),
            Requirement::AnnualCo2 => f.write_str("annual_co2"),
            Requirement::Co2Rate => f.write_str("co2_rate"),
            Requirement::Dimensions => f.write_str("dimensions"),
            Requirement::BeamDraught => f.write_str("beam_draught"),
            Requirement::Moving => f.write_str("moving"),
            Requirement::Ferry => f.write_str("ferry"),
            Requirement::Leg { from, to } => write!(f, "leg:{from}>{to}"),
        }
    }
}

impl FromStr for Requirement {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CatalogError::Field("applicability", s.to_string());
        Ok(match s.trim() {
            "name" => Requirement::Name,
            "imo" => Requirement::Imo,
            "annual_co2" => Requirement::AnnualCo2,
            "co2_rate" => Requirement::Co2Rate,
            "dimensions" => Requirement::Dimensions,
            "beam_draught" => Requirement::BeamDraught,
            "moving" => Requirement::Moving,
            "ferry" => Requirement::Ferry,
            other => {
                let (from, to) = other.strip_prefix("leg:").and_then(|r| r.split_once('>')).ok_or_else(bad)?;
                if from.trim().is_empty() || to.trim().is_empty() {
                    return Err(bad());
                }
                Requirement::Leg { from: from.trim().to_string(), to: to.trim().to_string() }
            }
        })
    }
}

/// All requirements must hold. Written `any` when empty, else `;`-joined.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Applicability(pub Vec<Requirement>);

impl fmt::Display for Applicability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("any");
        }
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Applicability {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "any" {
            return Ok(Self::default());
        }
        s.split(';').map(str::parse).collect::<Result<Vec<_>, _>>().map(Self)
    }
}

/// Ordered `key=value` pairs, written `k=v;k=v`.
#[derive(Debug, Clone, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct Params(pub Vec<(String, String)>);

impl Params {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for Params {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::default());
        }
        s.split(';')
            .map(|kv| {
                let (k, v) = kv.split_once('=').ok_or_else(|| CatalogError::Field("params", s.to_string()))?;
                Ok((k.trim().to_string(), v.trim().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub id: QueryId,
    pub category: Category,
    pub template: String,
    pub kind: AnswerKind,
    /// Empty for unitless answers.
    pub unit: String,
    pub oracle_mode: OracleMode,
    pub applicability: Applicability,
    /// Constants the oracle needs, such as fixed ports or time windows.
    pub params: Params,
    /// Relative tolerance for numeric answers.
    pub tolerance: f64,
}

impl QuerySpec {
    pub fn placeholders(&self) -> Vec<&'static str> {
        if self.template.contains(MMSI_PLACEHOLDER) {
            alloc::vec!["MMSI"]
        } else {
            Vec::new()
        }
    }

    pub fn is_parameterized(&self) -> bool {
        !self.placeholders().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("bad {0} value {1:?}")]
    Field(&'static str, String),
    #[error("expected {QUERY_COUNT} queries numbered Q1..Q27 in order, found {0}")]
    Numbering(String),
    #[error("category {0} has {1} queries, expected {2}")]
    CategorySize(&'static str, usize, usize),
    #[error("{0}: tolerance {1} outside [0, 1]")]
    Tolerance(QueryId, String),
    #[error("{query}: missing binding for placeholder {placeholder}")]
    MissingBinding { query: QueryId, placeholder: String },
    #[error("{0}: bound vessel {1} is not in the dataset")]
    UnknownVessel(QueryId, Mmsi),
}

/// Category sizes in query order.
pub const CATEGORY_SIZES: [(Category, usize); 4] = [
    (Category::Attribute, 7),
    (Category::IndividualTrajectory, 7),
    (Category::Interaction, 3),
    (Category::DataFusion, 10),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    specs: Vec<QuerySpec>,
}

impl Catalog {
    pub fn new(specs: Vec<QuerySpec>) -> Result<Self, CatalogError> {
        let ids: Vec<u8> = specs.iter().map(|s| s.id.get()).collect();
        if ids.len() != QUERY_COUNT || ids.iter().enumerate().any(|(i, &id)| id as usize != i + 1) {
            return Err(CatalogError::Numbering(format!("{ids:?}")));
        }
        let mut start = 0;
        for (cat, n) in CATEGORY_SIZES {
            let count = specs.iter().filter(|s| s.category == cat).count();
            let contiguous = specs[start..start + n.min(specs.len() - start)].iter().all(|s| s.category == cat);
            if count != n || !contiguous {
                return Err(CatalogError::CategorySize(cat.as_str(), count, n));
            }
            start += n;
        }
        for s in &specs {
            if !(0.0..=1.0).contains(&s.tolerance) {
                return Err(CatalogError::Tolerance(s.id, format!("{}", s.tolerance)));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[QuerySpec] {
        &self.specs
    }

    pub fn get(&self, id: QueryId) -> &QuerySpec {
        &self.specs[usize::from(id.get()) - 1]
    }

    pub fn in_category(&self, cat: Category) -> impl Iterator<Item = &QuerySpec> {
        self.specs.iter().filter(move |s| s.category == cat)
    }
}

/// Placeholder bindings, e.g. `MMSI=219000001`.
pub type Bindings = Params;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryInstance {
    pub spec: QuerySpec,
    pub bindings: Bindings,
    pub dataset_size: usize,
    pub question: String,
}

impl QueryInstance {
    pub fn id(&self) -> QueryId {
        self.spec.id
    }

    pub fn mmsi(&self) -> Option<Mmsi> {
        self.bindings.get("MMSI").and_then(Mmsi::parse)
    }

    pub fn with_dataset_size(&self, n: usize) -> Self {
        Self { dataset_size: n, ..self.clone() }
    }

    /// Stable key for ledgers and archives: `Q1[MMSI=219000001]`.
    pub fn key(&self) -> String {
        if self.bindings.is_empty() {
            self.spec.id.to_string()
        } else {
            format!("{}[{}]", self.spec.id, self.bindings)
        }
    }
}

/// Substitutes every placeholder. The rendered question is a pure function
/// of the template and bindings.
pub fn instantiate(spec: &QuerySpec, bindings: Bindings, dataset_size: usize) -> Result<QueryInstance, CatalogError> {
    let mut question = spec.template.clone();
    for ph in spec.placeholders() {
        let value = bindings
            .get(ph)
            .ok_or_else(|| CatalogError::MissingBinding { query: spec.id, placeholder: ph.to_string() })?;
        question = question.replace(&format!("[{ph}]"), value);
    }
    Ok(QueryInstance { spec: spec.clone(), bindings, dataset_size, question })
}

pub fn mmsi_binding(m: Mmsi) -> Bindings {
    Params(alloc::vec![(String::from("MMSI"), m.to_string())])
}

/// A parameterized query had fewer applicable vessels than requested probes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeShortfall {
    pub query: QueryId,
    pub requested: usize,
    pub available: usize,
}

fn spec_seed(seed: u64, id: QueryId) -> u64 {
    seed ^ (u64::from(id.get())).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One instance per non-parameterized spec and up to `k` distinct seeded
/// MMSI bindings per parameterized spec, drawn from the candidates that pass
/// `applicable`. Instances carry `dataset_size` as given.
pub fn probe_plan(
    catalog: &Catalog,
    candidates: &[Mmsi],
    k: usize,
    seed: u64,
    dataset_size: usize,
    mut applicable: impl FnMut(&QuerySpec, Mmsi) -> bool,
) -> (Vec<QueryInstance>, Vec<ProbeShortfall>) {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut plan = Vec::new();
    let mut short = Vec::new();
    for spec in catalog.specs() {
        if !spec.is_parameterized() {
            plan.push(instantiate(spec, Bindings::default(), dataset_size).expect("no placeholders"));
            continue;
        }
        let mut pool: Vec<Mmsi> = sorted.iter().copied().filter(|&m| applicable(spec, m)).collect();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(spec_seed(seed, spec.id)));
        if pool.len() < k {
            short.push(ProbeShortfall { query: spec.id, requested: k, available: pool.len() });
        }
        pool.truncate(k);
        pool.sort();
        for m in pool {
            plan.push(instantiate(spec, mmsi_binding(m), dataset_size).expect("MMSI bound"));
        }
    }
    (plan, short)
}

/// Picks `size` vessels to pin into every subset: first a greedy cover of
/// the distinct `needs` (typically each spec's full applicability), then a
/// seeded fill. Needs no candidate satisfies are skipped.
pub fn probe_pool<N: Ord + Clone>(
    candidates: &[Mmsi],
    needs: &[N],
    size: usize,
    seed: u64,
    mut satisfies: impl FnMut(&N, Mmsi) -> bool,
) -> Vec<Mmsi> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);

    let mut open: Vec<N> = needs.to_vec();
    open.sort();
    open.dedup();
    let mut table: BTreeMap<Mmsi, Vec<bool>> = BTreeMap::new();
    for &m in &sorted {
        table.insert(m, open.iter().map(|r| satisfies(r, m)).collect());
    }
    let mut covered = alloc::vec![false; open.len()];
    let mut pool: Vec<Mmsi> = Vec::new();
    while pool.len() < size {
        let gain = |m: &Mmsi| table[m].iter().zip(&covered).filter(|(s, c)| **s && !**c).count();
        let best = sorted.iter().filter(|m| !pool.contains(m)).max_by(|a, b| gain(a).cmp(&gain(b)).then(b.cmp(a)));
        match best {
            Some(&m) if gain(&m) > 0 => {
                for (c, s) in covered.iter_mut().zip(&table[&m]) {
                    *c |= *s;
                }
                pool.push(m);
            }
            _ => break,
        }
    }
    for &m in &sorted {
        if pool.len() >= size {
            break;
        }
        if !pool.contains(&m) {
            pool.push(m);
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn spec(id: u8, cat: Category, template: &str) -> QuerySpec {
        QuerySpec {
            id: QueryId::new(id).unwrap(),
            category: cat,
            template: template.to_string(),
            kind: AnswerKind::Numeric,
            unit: String::new(),
            oracle_mode: OracleMode::Computed,
            applicability: Applicability::default(),
            params: Params::default(),
            tolerance: 0.05,
        }
    }

    /// Same shape as the shipped registry: 16 parameterized, 11 not.
    fn catalog() -> Catalog {
        let parameterized = [1, 2, 3, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 18, 21, 24];
        let mut specs = Vec::new();
        let mut id = 1u8;
        for (cat, n) in CATEGORY_SIZES {
            for _ in 0..n {
                let t = if parameterized.contains(&id) { "Query about ship [MMSI]?" } else { "Query about all ships?" };
                specs.push(spec(id, cat, t));
                id += 1;
            }
        }
        Catalog::new(specs).unwrap()
    }

    fn mmsis(n: u32) -> Vec<Mmsi> {
        (0..n).map(|i| Mmsi::new(219000000 + i).unwrap()).collect()
    }

    #[test]
    fn renders_q4_verbatim() {
        let q4 = spec(4, Category::Attribute, "How many ships are in the dataset?");
        let inst = instantiate(&q4, Bindings::default(), 5).unwrap();
        assert_eq!(inst.question, "How many ships are in the dataset?");
        assert_eq!(inst.key(), "Q4");
    }

    #[test]
    fn substitutes_mmsi() {
        let q1 = spec(1, Category::Attribute, "What is the name of ship [MMSI]?");
        let inst = instantiate(&q1, mmsi_binding(Mmsi::new(219000001).unwrap()), 5).unwrap();
        assert!(inst.question.contains("219000001"));
        assert!(!inst.question.contains('['));
        assert_eq!(inst.key(), "Q1[MMSI=219000001]");
        assert_eq!(inst.mmsi(), Mmsi::new(219000001));
    }

    #[test]
    fn missing_binding_names_placeholder() {
        let q1 = spec(1, Category::Attribute, "What is the name of ship [MMSI]?");
        let err = instantiate(&q1, Bindings::default(), 5).unwrap_err();
        assert_eq!(err, CatalogError::MissingBinding { query: q1.id, placeholder: "MMSI".into() });
    }

    #[test]
    fn catalog_validates_shape() {
        let mut specs = catalog().specs().to_vec();
        specs[6].category = Category::IndividualTrajectory;
        assert!(matches!(Catalog::new(specs), Err(CatalogError::CategorySize(..))));
        let mut specs = catalog().specs().to_vec();
        specs.pop();
        assert!(matches!(Catalog::new(specs), Err(CatalogError::Numbering(_))));
    }

    #[test]
    fn full_plan_count() {
        let c = catalog();
        let (plan, short) = probe_plan(&c, &mmsis(40), 5, 9, 100, |_, _| true);
        assert_eq!(plan.len(), 16 * 5 + 11);
        assert!(short.is_empty());
    }

    #[test]
    fn plan_is_deterministic() {
        let c = catalog();
        let a = probe_plan(&c, &mmsis(40), 1, 3, 5, |_, _| true);
        let b = probe_plan(&c, &mmsis(40), 1, 3, 5, |_, _| true);
        assert_eq!(a, b);
    }

    #[test]
    fn plan_clamps_to_applicable() {
        let c = catalog();
        let ferries = [Mmsi::new(219000004).unwrap(), Mmsi::new(219000007).unwrap()];
        let q9 = QueryId::new(9).unwrap();
        let (plan, short) = probe_plan(&c, &mmsis(20), 3, 1, 20, |s, m| s.id != q9 || ferries.contains(&m));
        let q9_probes: Vec<Mmsi> = plan.iter().filter(|i| i.id() == q9).filter_map(|i| i.mmsi()).collect();
        assert_eq!(q9_probes, ferries);
        assert_eq!(short, vec![ProbeShortfall { query: q9, requested: 3, available: 2 }]);
    }

    #[test]
    fn pool_covers_requirements_first() {
        let all = mmsis(50);
        let ferry = Mmsi::new(219000031).unwrap();
        let leg = Mmsi::new(219000047).unwrap();
        let needs = [Requirement::Ferry, Requirement::Leg { from: "Aarhus".into(), to: "Skagen".into() }];
        let pool = probe_pool(&all, &needs, 5, 11, |r, m| match r {
            Requirement::Ferry => m == ferry,
            _ => m == leg,
        });
        assert_eq!(pool.len(), 5);
        assert!(pool.contains(&ferry) && pool.contains(&leg));
        assert_eq!(pool, probe_pool(&all, &needs, 5, 11, |r, m| match r {
            Requirement::Ferry => m == ferry,
            _ => m == leg,
        }));
    }

    #[test]
    fn text_forms_round_trip() {
        for s in ["any", "name", "co2_rate;leg:Aarhus>Skagen", "ferry"] {
            assert_eq!(s.parse::<Applicability>().unwrap().to_string(), s);
        }
        assert!("leg:Aarhus".parse::<Applicability>().is_err());
        let p: Params = "from=Skagen;to=Aarhus".parse().unwrap();
        assert_eq!(p.get("to"), Some("Aarhus"));
        assert_eq!(p.to_string(), "from=Skagen;to=Aarhus");
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
        assert_eq!("Q27".parse::<QueryId>().unwrap().get(), 27);
        assert!("Q28".parse::<QueryId>().is_err());
    }
}
