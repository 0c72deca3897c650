//! Pure ingest stages: resampling, static-table construction and seeded
//! subsetting. Parsing and file formats live in the std crate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{DatasetBundle, EmissionsRow, Imo, Mmsi, ShipStatic, TimeOfDay, TrackPoint, Trajectory, RawAisRow};

pub const RESAMPLE_PERIOD_MINUTES: u16 = 5;

/// Keeps the first observation in each `period_minutes` bucket per vessel,
/// labelled with the bucket start. Rows without SOG are skipped. Output is
/// sorted by MMSI.
pub fn resample(rows: &[RawAisRow], period_minutes: u16) -> Vec<Trajectory> {
    assert!(period_minutes > 0, "resample period must be positive");
    let period_s = u32::from(period_minutes) * 60;
    let mut order: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].sog.is_some()).collect();
    order.sort_by_key(|&i| (rows[i].mmsi, rows[i].second_of_day));

    let mut out: Vec<Trajectory> = Vec::new();
    for i in order {
        let row = &rows[i];
        let bucket = row.second_of_day / period_s;
        // second_of_day < 86_400, so the bucket start always fits in a day.
        let time = TimeOfDay::from_minutes((bucket * period_s / 60) as u16).expect("bucket inside the day");
        let point = TrackPoint::new(time, row.position, row.sog.unwrap_or(0.0));
        match out.last_mut() {
            Some(t) if t.mmsi == row.mmsi => {
                if t.points.last().map_or(true, |p| p.time < time) {
                    t.points.push(point);
                }
            }
            _ => out.push(Trajectory::new(row.mmsi, alloc::vec![point])),
        }
    }
    out
}

/// A static attribute that had more than one distinct non-empty value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticConflict {
    pub mmsi: Mmsi,
    pub field: &'static str,
    pub distinct_values: usize,
}

/// Most frequent value; ties go to the value seen first.
struct Modal<K> {
    counts: Vec<(K, usize)>,
}

impl<K: PartialEq> Modal<K> {
    fn new() -> Self {
        Self { counts: Vec::new() }
    }

    fn push(&mut self, value: K) {
        match self.counts.iter_mut().find(|(k, _)| *k == value) {
            Some((_, n)) => *n += 1,
            None => self.counts.push((value, 1)),
        }
    }

    fn into_mode(self) -> (Option<K>, usize) {
        let distinct = self.counts.len();
        let mut best: Option<(K, usize)> = None;
        for (k, n) in self.counts {
            if best.as_ref().map_or(true, |(_, b)| n > *b) {
                best = Some((k, n));
            }
        }
        (best.map(|(k, _)| k), distinct)
    }
}

#[derive(Default)]
struct StaticAccumulator {
    name: Option<Modal<String>>,
    imo: Option<Modal<Imo>>,
    length: Option<Modal<u64>>,
    breadth: Option<Modal<u64>>,
    draught: Option<Modal<u64>>,
    ship_type: Option<Modal<String>>,
}

fn push<K: PartialEq>(slot: &mut Option<Modal<K>>, value: Option<K>) {
    if let Some(v) = value {
        slot.get_or_insert_with(Modal::new).push(v);
    }
}

fn finish<K: PartialEq>(
    slot: Option<Modal<K>>,
    mmsi: Mmsi,
    field: &'static str,
    conflicts: &mut Vec<StaticConflict>,
) -> Option<K> {
    let (mode, distinct) = slot?.into_mode();
    if distinct > 1 {
        conflicts.push(StaticConflict { mmsi, field, distinct_values: distinct });
    }
    mode
}

fn non_empty(s: &Option<String>) -> Option<String> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(String::from)
}

/// One static row per vessel from the modal non-empty AIS values, joined by
/// IMO with the emissions table. Vessels without an emissions match keep
/// empty CO2 fields.
pub fn build_static(rows: &[RawAisRow], emissions: &[EmissionsRow]) -> (Vec<ShipStatic>, Vec<StaticConflict>) {
    let mut acc: BTreeMap<Mmsi, StaticAccumulator> = BTreeMap::new();
    for row in rows {
        let a = acc.entry(row.mmsi).or_default();
        push(&mut a.name, non_empty(&row.name));
        push(&mut a.imo, row.imo);
        push(&mut a.length, row.length.filter(|v| *v > 0.0).map(f64::to_bits));
        push(&mut a.breadth, row.breadth.filter(|v| *v > 0.0).map(f64::to_bits));
        push(&mut a.draught, row.draught.filter(|v| *v > 0.0).map(f64::to_bits));
        push(&mut a.ship_type, non_empty(&row.ship_type));
    }

    let mut conflicts = Vec::new();
    let mut out = Vec::with_capacity(acc.len());
    for (mmsi, a) in acc {
        let mut s = ShipStatic::new(mmsi);
        s.name = finish(a.name, mmsi, "name", &mut conflicts);
        s.imo = finish(a.imo, mmsi, "imo", &mut conflicts);
        s.length = finish(a.length, mmsi, "length", &mut conflicts).map(f64::from_bits);
        s.breadth = finish(a.breadth, mmsi, "breadth", &mut conflicts).map(f64::from_bits);
        s.draught = finish(a.draught, mmsi, "draught", &mut conflicts).map(f64::from_bits);
        s.ship_type = finish(a.ship_type, mmsi, "ship_type", &mut conflicts);
        if let Some(e) = s.imo.and_then(|imo| emissions.iter().find(|e| e.imo == imo)) {
            s.annual_co2_t = e.annual_co2_t;
            s.co2_per_nm_kg = e.co2_per_nm_kg;
            s.annual_distance_nm = e.annual_distance_nm;
        }
        out.push(s);
    }
    (out, conflicts)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubsetError {
    #[error("subset size {n} exceeds the {available} vessels available")]
    TooLarge { n: usize, available: usize },
    #[error("subset size {n} is smaller than the {pinned} pinned probe vessels")]
    TooSmall { n: usize, pinned: usize },
    #[error("pinned vessel {0} is not in the dataset")]
    UnknownPinned(Mmsi),
}

/// Selection order for subsets: pinned vessels first, then the remaining
/// vessels in a seeded permutation. Taking any prefix of length n gives the
/// size-n subset, so subsets for one seed are nested.
pub fn selection_order(bundle: &DatasetBundle, pinned: &[Mmsi], seed: u64) -> Result<Vec<Mmsi>, SubsetError> {
    let mut order: Vec<Mmsi> = Vec::with_capacity(bundle.size());
    for &m in pinned {
        if !bundle.contains(m) {
            return Err(SubsetError::UnknownPinned(m));
        }
        if !order.contains(&m) {
            order.push(m);
        }
    }
    let mut rest: Vec<Mmsi> = bundle.mmsis().into_iter().filter(|m| !order.contains(m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest.shuffle(&mut rng);
    order.extend(rest);
    Ok(order)
}

/// The size-n subset: the first n vessels of [`selection_order`].
pub fn subset(bundle: &DatasetBundle, n: usize, pinned: &[Mmsi], seed: u64) -> Result<DatasetBundle, SubsetError> {
    let order = selection_order(bundle, pinned, seed)?;
    let pinned_count = order.iter().take_while(|m| pinned.contains(m)).count();
    if n > bundle.size() {
        return Err(SubsetError::TooLarge { n, available: bundle.size() });
    }
    if n < pinned_count {
        return Err(SubsetError::TooSmall { n, pinned: pinned_count });
    }
    let mut keep: Vec<Mmsi> = order[..n].to_vec();
    keep.sort();
    Ok(restrict(bundle, &keep))
}

/// Keeps only the listed vessels; `keep` must be sorted.
pub fn restrict(bundle: &DatasetBundle, keep: &[Mmsi]) -> DatasetBundle {
    DatasetBundle {
        trajectories: bundle
            .trajectories
            .iter()
            .filter(|t| keep.binary_search(&t.mmsi).is_ok())
            .cloned()
            .collect(),
        statics: bundle.statics.iter().filter(|s| keep.binary_search(&s.mmsi).is_ok()).cloned().collect(),
        ports: bundle.ports.clone(),
    }
}
