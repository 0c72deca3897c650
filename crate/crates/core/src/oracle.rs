//! Ground-truth answers computed directly from a dataset subset.
//!
//! Ties in argmax/argmin queries go to the smaller MMSI, or to the first port
//! in name order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::answer::{Answer, AnswerValue};
use crate::catalog::{OracleMode, QueryId, QueryInstance, QuerySpec, Requirement};
use crate::geo::{for_common_buckets, great_circle_distance, pairwise_min_distance, trajectory_length};
use crate::model::{DatasetBundle, Mmsi, Port, TimeOfDay, TrackPoint, KMH_PER_KNOT, METERS_PER_NAUTICAL_MILE};

/// Published Suez Canal limits for loaded transit.
pub const SUEZ_MAX_BEAM_M: f64 = 77.5;
pub const SUEZ_MAX_DRAUGHT_M: f64 = 20.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    pub moving_sog_kn: f64,
    pub anchorage_sog_kn: f64,
    pub anchorage_min_minutes: u16,
    pub port_radius_m: f64,
    pub proximity_m: f64,
    pub collision_m: f64,
    pub collision_sog_kn: f64,
    pub min_visit_minutes: u16,
    pub visit_merge_gap_minutes: u16,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            moving_sog_kn: 0.1,
            anchorage_sog_kn: 0.5,
            anchorage_min_minutes: 30,
            port_radius_m: 2000.0,
            proximity_m: 500.0,
            collision_m: 300.0,
            collision_sog_kn: 1.0,
            min_visit_minutes: 10,
            visit_merge_gap_minutes: 10,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        let positive = [
            self.moving_sog_kn,
            self.anchorage_sog_kn,
            self.port_radius_m,
            self.proximity_m,
            self.collision_m,
            self.collision_sog_kn,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.anchorage_min_minutes == 0 {
            return Err("segmentation thresholds must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortVisit {
    /// Index into the bundle's port list.
    pub port: usize,
    pub enter: TimeOfDay,
    pub exit: TimeOfDay,
    pub first: usize,
    pub last: usize,
}

impl PortVisit {
    pub fn minutes(&self) -> u16 {
        self.exit.minutes_since(self.enter)
    }
}

/// Index of the nearest port if the point lies inside its approach radius.
pub fn port_at(p: &TrackPoint, ports: &[Port]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, port) in ports.iter().enumerate() {
        let d = great_circle_distance(p.position, port.position);
        if best.map_or(true, |(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.filter(|&(i, d)| d < ports[i].approach_radius_m).map(|(i, _)| i)
}

/// Maximal runs of samples inside one port's radius. Runs at the same port
/// separated by at most the merge gap are joined, then visits shorter than
/// the minimum dwell are dropped.
pub fn detect_port_visits(points: &[TrackPoint], ports: &[Port], cfg: &SegmentationConfig) -> Vec<PortVisit> {
    let at: Vec<Option<usize>> = points.iter().map(|p| port_at(p, ports)).collect();
    visits_from_assignment(points, &at, cfg)
}

fn visits_from_assignment(points: &[TrackPoint], at: &[Option<usize>], cfg: &SegmentationConfig) -> Vec<PortVisit> {
    let mut runs: Vec<PortVisit> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let Some(port) = at[i] else {
            i += 1;
            continue;
        };
        let first = i;
        while i + 1 < points.len() && at[i + 1] == Some(port) {
            i += 1;
        }
        let visit = PortVisit { port, enter: points[first].time, exit: points[i].time, first, last: i };
        match runs.last_mut() {
            Some(prev) if prev.port == port && visit.enter.minutes_since(prev.exit) <= cfg.visit_merge_gap_minutes => {
                prev.exit = visit.exit;
                prev.last = visit.last;
            }
            _ => runs.push(visit),
        }
        i += 1;
    }
    runs.retain(|v| v.minutes() >= cfg.min_visit_minutes);
    runs
}

/// Passage between consecutive visits at different ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub from: usize,
    pub to: usize,
    pub depart: TimeOfDay,
    pub arrive: TimeOfDay,
    pub distance_m: f64,
}

impl Leg {
    pub fn minutes(&self) -> u16 {
        self.arrive.minutes_since(self.depart)
    }
}

pub fn legs(points: &[TrackPoint], visits: &[PortVisit]) -> Vec<Leg> {
    visits
        .windows(2)
        .filter(|w| w[0].port != w[1].port)
        .map(|w| Leg {
            from: w[0].port,
            to: w[1].port,
            depart: w[0].exit,
            arrive: w[1].enter,
            distance_m: trajectory_length(&points[w[0].last..=w[1].first]),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeKind {
    Stop,
    Move,
}

/// A contiguous index range `first..=last` of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub kind: EpisodeKind,
    pub first: usize,
    pub last: usize,
}

impl Episode {
    pub fn minutes(&self, points: &[TrackPoint]) -> u16 {
        points[self.last].time.minutes_since(points[self.first].time)
    }
}

/// Stops are runs with SOG below the anchorage threshold lasting at least
/// the minimum duration; everything between them is a move. The episodes
/// tile the index range.
pub fn segment_stops(points: &[TrackPoint], cfg: &SegmentationConfig) -> Vec<Episode> {
    let mut stops: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        if points[i].sog >= cfg.anchorage_sog_kn {
            i += 1;
            continue;
        }
        let first = i;
        while i + 1 < points.len() && points[i + 1].sog < cfg.anchorage_sog_kn {
            i += 1;
        }
        if points[i].time.minutes_since(points[first].time) >= cfg.anchorage_min_minutes {
            stops.push((first, i));
        }
        i += 1;
    }
    let mut out = Vec::new();
    let mut next = 0;
    for (first, last) in stops {
        if first > next {
            out.push(Episode { kind: EpisodeKind::Move, first: next, last: first - 1 });
        }
        out.push(Episode { kind: EpisodeKind::Stop, first, last });
        next = last + 1;
    }
    if next < points.len() {
        out.push(Episode { kind: EpisodeKind::Move, first: next, last: points.len() - 1 });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{0}: bound vessel is missing from the subset")]
    UnknownVessel(String),
    #[error("{0}: no expert label for dataset size {1}")]
    MissingExpertLabel(QueryId, usize),
    #[error("{0}: missing parameter {1}")]
    MissingParam(QueryId, &'static str),
    #[error("{0}: no computation is defined")]
    Unsupported(QueryId),
}

struct VesselFacts {
    at_port: Vec<Option<usize>>,
    visits: Vec<PortVisit>,
    legs: Vec<Leg>,
    /// Bounding box as (min_lat, min_lon, max_lat, max_lon).
    bbox: (f64, f64, f64, f64),
}

/// Per-subset precomputation shared by every query instance.
pub struct OracleContext<'a> {
    pub bundle: &'a DatasetBundle,
    pub cfg: SegmentationConfig,
    facts: Vec<VesselFacts>,
    expert: BTreeMap<QueryId, AnswerValue>,
    ferries: Vec<Mmsi>,
}

fn bbox(points: &[TrackPoint]) -> (f64, f64, f64, f64) {
    points.iter().fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |b, p| {
        (b.0.min(p.position.lat), b.1.min(p.position.lon), b.2.max(p.position.lat), b.3.max(p.position.lon))
    })
}

/// Conservative: false only when the boxes are clearly further apart than
/// `meters` at Danish latitudes.
fn boxes_within(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), meters: f64) -> bool {
    let dlat = meters / 111_000.0 * 1.5;
    let dlon = meters / 50_000.0 * 1.5;
    a.0 - dlat <= b.2 && b.0 - dlat <= a.2 && a.1 - dlon <= b.3 && b.1 - dlon <= a.3
}

impl<'a> OracleContext<'a> {
    /// `expert` holds the fixture labels for this subset; `ferries` the
    /// vessels labelled as ferries, used by the ferry applicability check.
    pub fn new(
        bundle: &'a DatasetBundle,
        cfg: SegmentationConfig,
        expert: BTreeMap<QueryId, AnswerValue>,
        ferries: Vec<Mmsi>,
    ) -> Self {
        let facts = bundle
            .trajectories
            .iter()
            .map(|t| {
                let at_port: Vec<Option<usize>> = t.points.iter().map(|p| port_at(p, &bundle.ports)).collect();
                let visits = visits_from_assignment(&t.points, &at_port, &cfg);
                let legs = legs(&t.points, &visits);
                VesselFacts { at_port, visits, legs, bbox: bbox(&t.points) }
            })
            .collect();
        Self { bundle, cfg, facts, expert, ferries }
    }

    fn index(&self, m: Mmsi) -> Option<usize> {
        self.bundle.trajectories.binary_search_by_key(&m, |t| t.mmsi).ok()
    }

    pub fn visits(&self, m: Mmsi) -> &[PortVisit] {
        self.index(m).map_or(&[], |i| &self.facts[i].visits)
    }

    pub fn legs(&self, m: Mmsi) -> &[Leg] {
        self.index(m).map_or(&[], |i| &self.facts[i].legs)
    }

    fn port_index(&self, name: &str) -> Option<usize> {
        self.bundle.port(name).map(|(i, _)| i)
    }

    fn legs_between(&self, m: Mmsi, from: usize, to: usize) -> impl Iterator<Item = &Leg> {
        self.legs(m).iter().filter(move |l| l.from == from && l.to == to)
    }

    /// The two ports the vessel visits most often, most-visited first.
    pub fn terminals(&self, m: Mmsi) -> Option<(usize, usize)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for v in self.visits(m) {
            *counts.entry(v.port).or_default() += 1;
        }
        let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        (ranked.len() >= 2).then(|| (ranked[0].0, ranked[1].0))
    }

    /// Completed A-B-A cycles between the two terminals.
    pub fn round_trips(&self, m: Mmsi) -> u32 {
        let Some((a, b)) = self.terminals(m) else { return 0 };
        let mut seq: Vec<usize> = self.visits(m).iter().map(|v| v.port).filter(|&p| p == a || p == b).collect();
        seq.dedup();
        (seq.len().saturating_sub(1) / 2) as u32
    }

    /// Vessels doing at least two round trips between the same two ports.
    pub fn ferry_heuristic(&self) -> Vec<Mmsi> {
        self.bundle.mmsis().into_iter().filter(|&m| self.round_trips(m) >= 2).collect()
    }

    pub fn satisfies(&self, req: &Requirement, m: Mmsi) -> bool {
        let (Some(ship), Some(track)) = (self.bundle.ship(m), self.bundle.trajectory(m)) else {
            return false;
        };
        match req {
            Requirement::Name => ship.name.is_some(),
            Requirement::Imo => ship.imo.is_some(),
            Requirement::AnnualCo2 => ship.annual_co2_t.is_some(),
            Requirement::Co2Rate => ship.effective_co2_per_nm_kg().is_some(),
            Requirement::Dimensions => ship.box_volume_m3().is_some(),
            Requirement::BeamDraught => ship.breadth.is_some() && ship.draught.is_some(),
            Requirement::Moving => track.points.iter().any(|p| p.sog > self.cfg.moving_sog_kn),
            Requirement::Ferry => self.ferries.contains(&m),
            Requirement::Leg { from, to } => match (self.port_index(from), self.port_index(to)) {
                (Some(f), Some(t)) => self.legs_between(m, f, t).next().is_some(),
                _ => false,
            },
        }
    }

    pub fn applicable(&self, spec: &QuerySpec, m: Mmsi) -> bool {
        spec.applicability.0.iter().all(|r| self.satisfies(r, m))
    }

    fn at_sea(&self, vessel: usize, point: usize) -> bool {
        self.facts[vessel].at_port[point].is_none()
            && !self.bundle.ports.iter().any(|p| {
                great_circle_distance(self.bundle.trajectories[vessel].points[point].position, p.position)
                    <= p.approach_radius_m
            })
    }

    /// Ground truth for one instance.
    pub fn answer(&self, inst: &QueryInstance) -> Result<Answer, OracleError> {
        let spec = &inst.spec;
        let value = if spec.oracle_mode == OracleMode::ExpertFixture {
            self.expert.get(&spec.id).cloned().ok_or(OracleError::MissingExpertLabel(spec.id, inst.dataset_size))?
        } else if spec.is_parameterized() {
            let m = inst.mmsi().filter(|&m| self.bundle.contains(m)).ok_or_else(|| OracleError::UnknownVessel(inst.key()))?;
            self.vessel_query(spec, m)?
        } else {
            self.dataset_query(spec)?
        };
        Ok(Answer::new(value, spec.tolerance))
    }

    fn param<'s>(&self, spec: &'s QuerySpec, key: &'static str) -> Result<&'s str, OracleError> {
        spec.params.get(key).ok_or(OracleError::MissingParam(spec.id, key))
    }

    fn port_param(&self, spec: &QuerySpec, key: &'static str) -> Result<Option<usize>, OracleError> {
        Ok(self.port_index(self.param(spec, key)?))
    }

    fn vessel_query(&self, spec: &QuerySpec, m: Mmsi) -> Result<AnswerValue, OracleError> {
        let i = self.index(m).expect("checked by caller");
        let ship = &self.bundle.statics[i];
        let points = &self.bundle.trajectories[i].points;
        let unit = spec.unit.as_str();
        let num = |v: Option<f64>| v.map_or(AnswerValue::Unknown, |v| AnswerValue::numeric(v, unit));
        Ok(match spec.id.get() {
            1 => ship.name.clone().map_or(AnswerValue::Unknown, AnswerValue::Text),
            2 => num(ship.imo.map(|i| f64::from(i.get()))),
            3 => num(ship.annual_co2_t),
            6 => num(ship.effective_co2_per_nm_kg()),
            7 => num(ship.box_volume_m3()),
            8 => num(points.iter().map(|p| p.sog).fold(None, |a: Option<f64>, s| Some(a.map_or(s, |a| a.max(s))))),
            9 => {
                let Some((a, b)) = self.terminals(m) else { return Ok(AnswerValue::Unknown) };
                let mins: Vec<f64> = self.legs(m)
                    .iter()
                    .filter(|l| (l.from == a && l.to == b) || (l.from == b && l.to == a))
                    .map(|l| f64::from(l.minutes()))
                    .collect();
                num(mean(&mins))
            }
            10 => num(Some(trajectory_length(points) / 1000.0)),
            11 => {
                let moving: Vec<f64> =
                    points.iter().filter(|p| p.sog > self.cfg.moving_sog_kn).map(|p| p.sog * KMH_PER_KNOT).collect();
                num(mean(&moving))
            }
            12 => points.last().map_or(AnswerValue::Unknown, |p| AnswerValue::Location(p.position)),
            13 => {
                let waits: Vec<f64> = segment_stops(points, &self.cfg)
                    .iter()
                    .filter(|e| e.kind == EpisodeKind::Stop && (e.first..=e.last).all(|k| self.at_sea(i, k)))
                    .map(|e| f64::from(e.minutes(points)))
                    .collect();
                num(Some(mean(&waits).unwrap_or(0.0)))
            }
            14 => num(Some(f64::from(self.round_trips(m)))),
            15 => {
                let near = self.vessels_near(i, self.cfg.proximity_m);
                AnswerValue::entity_set(near.into_iter().map(|m| m.to_string()))
            }
            18 => {
                let minutes: u32 = points
                    .windows(2)
                    .enumerate()
                    .filter(|(k, _)| self.at_sea(i, *k))
                    .map(|(_, w)| u32::from(w[1].time.minutes_since(w[0].time)))
                    .sum();
                num(Some(f64::from(minutes)))
            }
            21 => match (ship.breadth, ship.draught) {
                (Some(b), Some(d)) => AnswerValue::Boolean(b <= SUEZ_MAX_BEAM_M && d <= SUEZ_MAX_DRAUGHT_M),
                _ => AnswerValue::Unknown,
            },
            24 => {
                let (Some(from), Some(to)) = (self.port_param(spec, "from")?, self.port_param(spec, "to")?) else {
                    return Ok(AnswerValue::Unknown);
                };
                let dists: Vec<f64> = self.legs_between(m, from, to).map(|l| l.distance_m).collect();
                match (mean(&dists), ship.effective_co2_per_nm_kg()) {
                    (Some(d), Some(rate)) => AnswerValue::numeric(d / METERS_PER_NAUTICAL_MILE * rate, unit),
                    _ => AnswerValue::Unknown,
                }
            }
            _ => return Err(OracleError::Unsupported(spec.id)),
        })
    }

    /// Vessels other than `i` whose closest synchronized approach is under
    /// `meters`.
    fn vessels_near(&self, i: usize, meters: f64) -> Vec<Mmsi> {
        let a = &self.bundle.trajectories[i];
        self.bundle
            .trajectories
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && boxes_within(self.facts[i].bbox, self.facts[j].bbox, meters))
            .filter(|(_, b)| pairwise_min_distance(&a.points, &b.points).is_some_and(|c| c.distance_m < meters))
            .map(|(_, b)| b.mmsi)
            .collect()
    }

    fn dataset_query(&self, spec: &QuerySpec) -> Result<AnswerValue, OracleError> {
        let b = self.bundle;
        let unit = spec.unit.as_str();
        let mmsi_text = |m: Option<Mmsi>| m.map_or(AnswerValue::Unknown, |m| AnswerValue::Text(m.to_string()));
        Ok(match spec.id.get() {
            4 => AnswerValue::numeric(b.size() as f64, unit),
            5 => mmsi_text(argmax(b.statics.iter().filter_map(|s| Some((s.mmsi, s.box_volume_m3()?))))),
            19 => {
                let window = self.param(spec, "window")?;
                let (start, end) = window
                    .split_once('-')
                    .and_then(|(s, e)| Some((TimeOfDay::parse(s)?, TimeOfDay::parse(e)?)))
                    .ok_or(OracleError::MissingParam(spec.id, "window"))?;
                let burn = b.trajectories.iter().zip(&b.statics).filter_map(|(t, s)| {
                    let rate = s.effective_co2_per_nm_kg()?;
                    let d: f64 = t
                        .points
                        .windows(2)
                        .filter(|w| w[0].time >= start && w[1].time <= end)
                        .map(|w| great_circle_distance(w[0].position, w[1].position))
                        .sum();
                    Some((t.mmsi, d / METERS_PER_NAUTICAL_MILE * rate))
                });
                mmsi_text(argmax(burn.filter(|(_, v)| *v > 0.0)))
            }
            20 => {
                let (Some(from), Some(to)) = (self.port_param(spec, "from")?, self.port_param(spec, "to")?) else {
                    return Ok(AnswerValue::Unknown);
                };
                let dists: Vec<f64> = b
                    .mmsis()
                    .into_iter()
                    .flat_map(|m| self.legs_between(m, from, to).map(|l| l.distance_m / 1000.0).collect::<Vec<_>>())
                    .collect();
                mean(&dists).map_or(AnswerValue::Unknown, |v| AnswerValue::numeric(v, unit))
            }
            22 => {
                let emitted = b.trajectories.iter().zip(&b.statics).filter_map(|(t, s)| {
                    Some((t.mmsi, trajectory_length(&t.points) / METERS_PER_NAUTICAL_MILE * s.effective_co2_per_nm_kg()?))
                });
                mmsi_text(argmax(emitted.filter(|(_, v)| *v > 0.0)))
            }
            23 => {
                let rates = b.statics.iter().filter_map(|s| Some((s.mmsi, -s.effective_co2_per_nm_kg()?)));
                mmsi_text(argmax(rates))
            }
            25 => {
                let mut visitors = alloc::vec![0usize; b.ports.len()];
                for f in &self.facts {
                    let mut ports: Vec<usize> = f.visits.iter().map(|v| v.port).collect();
                    ports.sort_unstable();
                    ports.dedup();
                    for p in ports {
                        visitors[p] += 1;
                    }
                }
                let best = visitors.iter().enumerate().fold(None, |best: Option<(usize, usize)>, (i, &n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ if n > 0 => Some((i, n)),
                    _ => best,
                });
                best.map_or(AnswerValue::Unknown, |(i, _)| AnswerValue::Text(b.ports[i].name.clone()))
            }
            26 => AnswerValue::entity_set(self.collision_risk().into_iter().map(|m| m.to_string())),
            27 => {
                let stayed = b.trajectories.iter().enumerate().filter(|(i, t)| (0..t.points.len()).all(|k| !self.at_sea(*i, k)));
                AnswerValue::entity_set(stayed.map(|(_, t)| t.mmsi.to_string()))
            }
            _ => return Err(OracleError::Unsupported(spec.id)),
        })
    }

    /// Vessels in any pair that came within the collision distance while
    /// both were underway.
    pub fn collision_risk(&self) -> Vec<Mmsi> {
        let b = self.bundle;
        let mut flagged = alloc::vec![false; b.size()];
        for i in 0..b.size() {
            for j in i + 1..b.size() {
                if !boxes_within(self.facts[i].bbox, self.facts[j].bbox, self.cfg.collision_m) {
                    continue;
                }
                let mut risk = false;
                for_common_buckets(&b.trajectories[i].points, &b.trajectories[j].points, |p, q| {
                    risk |= p.sog > self.cfg.collision_sog_kn
                        && q.sog > self.cfg.collision_sog_kn
                        && great_circle_distance(p.position, q.position) < self.cfg.collision_m;
                });
                if risk {
                    flagged[i] = true;
                    flagged[j] = true;
                }
            }
        }
        b.trajectories.iter().zip(flagged).filter(|(_, f)| *f).map(|(t, _)| t.mmsi).collect()
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Largest value; ties keep the earliest, i.e. the smaller MMSI for inputs in
/// MMSI order.
fn argmax(items: impl Iterator<Item = (Mmsi, f64)>) -> Option<Mmsi> {
    let mut best: Option<(Mmsi, f64)> = None;
    for (m, v) in items {
        if best.map_or(true, |(bm, bv)| v > bv || (v == bv && m < bm)) {
            best = Some((m, v));
        }
    }
    best.map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use alloc::vec;

    fn pt(min: u16, lat: f64, lon: f64, sog: f64) -> TrackPoint {
        TrackPoint::new(TimeOfDay::from_minutes(min).unwrap(), GeoPoint { lat, lon }, sog)
    }

    fn ports() -> Vec<Port> {
        vec![
            Port::new("Alpha", GeoPoint { lat: 56.0, lon: 10.0 }, 2000.0),
            Port::new("Beta", GeoPoint { lat: 56.0, lon: 11.0 }, 2000.0),
        ]
    }

    #[test]
    fn never_near_a_port() {
        let pts: Vec<_> = (0..20).map(|k| pt(k * 5, 57.0, 10.5, 10.0)).collect();
        assert!(detect_port_visits(&pts, &ports(), &SegmentationConfig::default()).is_empty());
    }

    #[test]
    fn one_hour_dwell() {
        let pts: Vec<_> = (0..=12).map(|k| pt(60 + k * 5, 56.0, 10.001, 0.0)).collect();
        let v = detect_port_visits(&pts, &ports(), &SegmentationConfig::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].minutes(), 60);
        assert_eq!(v[0].port, 0);
    }

    #[test]
    fn short_blips_are_dropped_and_gaps_merged() {
        let cfg = SegmentationConfig::default();
        // Inside at 0 and 5 (5 min dwell): dropped.
        let pts = vec![pt(0, 56.0, 10.0, 0.0), pt(5, 56.0, 10.0, 0.0), pt(10, 56.5, 10.5, 9.0)];
        assert!(detect_port_visits(&pts, &ports(), &cfg).is_empty());
        // Inside 0-5, out at 10, inside 15-20: the 5 min gap merges to one 20 min visit.
        let pts = vec![
            pt(0, 56.0, 10.0, 0.0),
            pt(5, 56.0, 10.0, 0.0),
            pt(10, 56.5, 10.5, 9.0),
            pt(15, 56.0, 10.0, 0.0),
            pt(20, 56.0, 10.0, 0.0),
        ];
        let v = detect_port_visits(&pts, &ports(), &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].enter.minutes(), v[0].exit.minutes()), (0, 20));
    }

    /// Dwell 15 min at a port, sail 30 min, repeat, alternating ports.
    pub(crate) fn shuttle(cycles: u16) -> Vec<TrackPoint> {
        let mut pts = Vec::new();
        let mut t = 0;
        for c in 0..cycles {
            let (lon_a, lon_b) = if c % 2 == 0 { (10.0, 11.0) } else { (11.0, 10.0) };
            for _ in 0..4 {
                pts.push(pt(t, 56.0, lon_a, 0.0));
                t += 5;
            }
            for k in 1..6 {
                pts.push(pt(t, 56.0, lon_a + (lon_b - lon_a) * f64::from(k) / 6.0, 12.0));
                t += 5;
            }
        }
        for _ in 0..4 {
            let lon = if cycles % 2 == 0 { 10.0 } else { 11.0 };
            pts.push(pt(t, 56.0, lon, 0.0));
            t += 5;
        }
        pts
    }

    #[test]
    fn shuttle_alternates() {
        let pts = shuttle(4);
        let v = detect_port_visits(&pts, &ports(), &SegmentationConfig::default());
        let seq: Vec<usize> = v.iter().map(|v| v.port).collect();
        assert_eq!(seq, [0, 1, 0, 1, 0]);
        let l = legs(&pts, &v);
        assert_eq!(l.len(), 4);
        // Each leg runs from the last dwell sample to the first of the next: 30 min.
        assert!(l.iter().all(|l| l.minutes() == 30));
        assert!((l[0].distance_m - trajectory_length(&pts[3..=9])).abs() < 1e-6);
        assert!(l[0].distance_m > 62_000.0 && l[0].distance_m < 63_000.0);
    }

    #[test]
    fn stop_move_episodes() {
        let cfg = SegmentationConfig::default();
        let zero: Vec<_> = (0..10).map(|k| pt(k * 5, 56.5, 10.5, 0.0)).collect();
        assert_eq!(segment_stops(&zero, &cfg), vec![Episode { kind: EpisodeKind::Stop, first: 0, last: 9 }]);
        let fast: Vec<_> = (0..10).map(|k| pt(k * 5, 56.5, 10.5, 10.0)).collect();
        assert_eq!(segment_stops(&fast, &cfg), vec![Episode { kind: EpisodeKind::Move, first: 0, last: 9 }]);
        // move 0-2, stop 3-9 (30 min), move 10-11, short stop 12-13 (5 min) folded into the move.
        let sogs = [9.0, 9.0, 9.0, 0.1, 0.2, 0.0, 0.0, 0.3, 0.1, 0.0, 8.0, 8.0, 0.0, 0.0];
        let mixed: Vec<_> = sogs.iter().enumerate().map(|(k, &s)| pt(k as u16 * 5, 56.5, 10.5, s)).collect();
        assert_eq!(
            segment_stops(&mixed, &cfg),
            vec![
                Episode { kind: EpisodeKind::Move, first: 0, last: 2 },
                Episode { kind: EpisodeKind::Stop, first: 3, last: 9 },
                Episode { kind: EpisodeKind::Move, first: 10, last: 13 },
            ]
        );
    }

    #[test]
    fn argmax_ties_to_smaller_mmsi() {
        let m = |n| Mmsi::new(n).unwrap();
        assert_eq!(argmax([(m(219000002), 5.0), (m(219000001), 5.0)].into_iter()), Some(m(219000001)));
        assert_eq!(argmax(core::iter::empty()), None);
    }

    use crate::catalog::{instantiate, mmsi_binding, Applicability, AnswerKind, Bindings, Category, Params};
    use crate::model::{ShipStatic, Trajectory};
    use proptest::prelude::*;

    fn m(n: u32) -> Mmsi {
        Mmsi::new(n).unwrap()
    }

    fn straight(lat: f64, lon0: f64, sog: f64, n: u16) -> Vec<TrackPoint> {
        (0..n).map(|k| pt(k * 5, lat, lon0 + f64::from(k) * 0.01, sog)).collect()
    }

    /// A: shuttle between Alpha and Beta. B: moored at Alpha all day.
    /// C and D: parallel tracks 200 m apart. E: anchored at sea for an hour,
    /// then underway.
    fn world() -> DatasetBundle {
        let mut e: Vec<_> = (0..=12).map(|k| pt(k * 5, 56.5, 10.5, 0.0)).collect();
        e.extend((13..30).map(|k| pt(k * 5, 56.5, 10.5 + f64::from(k - 12) * 0.01, 9.0)));
        let tracks = vec![
            (219000001, shuttle(4)),
            (219000002, (0..50).map(|k| pt(k * 5, 56.0, 10.001, 0.0)).collect()),
            (219000003, straight(57.0, 10.0, 10.0, 30)),
            (219000004, straight(57.0018, 10.0, 10.0, 30)),
            (219000005, e),
        ];
        let trajectories = tracks.into_iter().map(|(n, p)| Trajectory::new(m(n), p)).collect();
        let statics = (1..=5)
            .map(|i| {
                let mut s = ShipStatic::new(m(219000000 + i));
                s.co2_per_nm_kg = Some(10.0 * f64::from(i));
                s.length = Some(100.0);
                s.breadth = Some(20.0 + f64::from(i));
                s.draught = Some(8.0);
                s
            })
            .collect();
        DatasetBundle::assemble(trajectories, statics, ports()).0
    }

    fn spec(id: u8, kind: AnswerKind, unit: &str, per_vessel: bool, params: &str) -> QuerySpec {
        QuerySpec {
            id: QueryId::new(id).unwrap(),
            category: Category::Attribute,
            template: if per_vessel { "What about ship [MMSI]?".into() } else { "What about the dataset?".into() },
            kind,
            unit: unit.into(),
            oracle_mode: OracleMode::Computed,
            applicability: Applicability::default(),
            params: params.parse::<Params>().unwrap(),
            tolerance: 0.05,
        }
    }

    fn ask(ctx: &OracleContext, s: QuerySpec, vessel: Option<u32>) -> AnswerValue {
        let b = vessel.map_or_else(Bindings::default, |n| mmsi_binding(m(n)));
        ctx.answer(&instantiate(&s, b, ctx.bundle.size()).unwrap()).unwrap().value
    }

    fn set(ids: &[u32]) -> AnswerValue {
        AnswerValue::entity_set(ids.iter().map(|n| m(*n).to_string()))
    }

    #[test]
    fn world_answers() {
        let b = world();
        let ctx = OracleContext::new(&b, SegmentationConfig::default(), BTreeMap::new(), vec![m(219000001)]);
        let num = |v| AnswerValue::numeric(v, "min");
        assert_eq!(ask(&ctx, spec(4, AnswerKind::Numeric, "count", false, ""), None), AnswerValue::numeric(5.0, "count"));
        assert_eq!(ask(&ctx, spec(9, AnswerKind::Numeric, "min", true, ""), Some(219000001)), num(30.0));
        assert_eq!(ask(&ctx, spec(14, AnswerKind::Numeric, "count", true, ""), Some(219000001)), AnswerValue::numeric(2.0, "count"));
        assert_eq!(ask(&ctx, spec(13, AnswerKind::Numeric, "min", true, ""), Some(219000005)), num(60.0));
        // Anchored inside a port is not an anchorage wait.
        assert_eq!(ask(&ctx, spec(13, AnswerKind::Numeric, "min", true, ""), Some(219000002)), num(0.0));
        assert_eq!(ask(&ctx, spec(18, AnswerKind::Numeric, "min", true, ""), Some(219000005)), num(145.0));
        assert_eq!(ask(&ctx, spec(18, AnswerKind::Numeric, "min", true, ""), Some(219000002)), num(0.0));
        assert_eq!(ask(&ctx, spec(15, AnswerKind::EntitySet, "", true, ""), Some(219000003)), set(&[219000004]));
        assert_eq!(ask(&ctx, spec(15, AnswerKind::EntitySet, "", true, ""), Some(219000005)), set(&[]));
        assert_eq!(ask(&ctx, spec(26, AnswerKind::EntitySet, "", false, ""), None), set(&[219000003, 219000004]));
        assert_eq!(ask(&ctx, spec(27, AnswerKind::EntitySet, "", false, ""), None), set(&[219000002]));
        assert_eq!(ask(&ctx, spec(25, AnswerKind::Text, "port", false, ""), None), AnswerValue::Text("Alpha".into()));
        assert_eq!(ask(&ctx, spec(23, AnswerKind::Text, "mmsi", false, ""), None), AnswerValue::Text("219000001".into()));
        assert_eq!(ask(&ctx, spec(21, AnswerKind::Boolean, "", true, ""), Some(219000003)), AnswerValue::Boolean(true));
        assert_eq!(ask(&ctx, spec(8, AnswerKind::Numeric, "kn", true, ""), Some(219000005)), AnswerValue::numeric(9.0, "kn"));
        assert_eq!(ask(&ctx, spec(11, AnswerKind::Numeric, "km/h", true, ""), Some(219000002)), AnswerValue::Unknown);

        let leg_km = trajectory_length(&b.trajectories[0].points[3..=9]) / 1000.0;
        let AnswerValue::Numeric { value, .. } = ask(&ctx, spec(20, AnswerKind::Numeric, "km", false, "from=Alpha;to=Beta"), None) else {
            panic!()
        };
        assert!((value - leg_km).abs() < 1e-9);
        let AnswerValue::Numeric { value, .. } =
            ask(&ctx, spec(24, AnswerKind::Numeric, "kg", true, "from=Alpha;to=Beta"), Some(219000001))
        else {
            panic!()
        };
        assert!((value - leg_km * 1000.0 / METERS_PER_NAUTICAL_MILE * 10.0).abs() < 1e-6);
        assert_eq!(
            ask(&ctx, spec(24, AnswerKind::Numeric, "kg", true, "from=Alpha;to=Beta"), Some(219000003)),
            AnswerValue::Unknown
        );
    }

    #[test]
    fn applicability_and_ferries() {
        let b = world();
        let ctx = OracleContext::new(&b, SegmentationConfig::default(), BTreeMap::new(), vec![m(219000001)]);
        assert_eq!(ctx.ferry_heuristic(), vec![m(219000001)]);
        let leg = Requirement::Leg { from: "Alpha".into(), to: "Beta".into() };
        assert!(ctx.satisfies(&leg, m(219000001)));
        assert!(!ctx.satisfies(&leg, m(219000003)));
        assert!(ctx.satisfies(&Requirement::Ferry, m(219000001)));
        assert!(!ctx.satisfies(&Requirement::Moving, m(219000002)));
        assert!(!ctx.satisfies(&Requirement::Name, m(219000001)));
        assert!(!ctx.satisfies(&Requirement::Name, m(219999999)));
    }

    #[test]
    fn expert_queries_need_labels() {
        let b = world();
        let mut s = spec(16, AnswerKind::EntitySet, "", false, "");
        s.oracle_mode = OracleMode::ExpertFixture;
        let inst = instantiate(&s, Bindings::default(), 5).unwrap();
        let ctx = OracleContext::new(&b, SegmentationConfig::default(), BTreeMap::new(), vec![]);
        assert_eq!(ctx.answer(&inst), Err(OracleError::MissingExpertLabel(s.id, 5)));
        let labels = BTreeMap::from([(s.id, set(&[219000003, 219000004]))]);
        let ctx = OracleContext::new(&b, SegmentationConfig::default(), labels, vec![]);
        assert_eq!(ctx.answer(&inst).unwrap().value, set(&[219000003, 219000004]));
    }

    #[test]
    fn unknown_vessel_is_an_error() {
        let b = world();
        let ctx = OracleContext::new(&b, SegmentationConfig::default(), BTreeMap::new(), vec![]);
        let inst = instantiate(&spec(10, AnswerKind::Numeric, "km", true, ""), mmsi_binding(m(219999999)), 5).unwrap();
        assert!(matches!(ctx.answer(&inst), Err(OracleError::UnknownVessel(_))));
    }

    proptest! {
        #[test]
        fn stop_episodes_tile(sogs in prop::collection::vec(prop_oneof![Just(0.0), Just(0.3), Just(5.0)], 0..150)) {
            let pts: Vec<_> = sogs.iter().enumerate().map(|(k, &s)| pt(k as u16 * 5, 56.5, 10.5, s)).collect();
            let cfg = SegmentationConfig::default();
            let eps = segment_stops(&pts, &cfg);
            let mut next = 0;
            for e in &eps {
                prop_assert_eq!(e.first, next);
                prop_assert!(e.last >= e.first);
                if e.kind == EpisodeKind::Stop {
                    prop_assert!(e.minutes(&pts) >= cfg.anchorage_min_minutes);
                    prop_assert!((e.first..=e.last).all(|k| pts[k].sog < cfg.anchorage_sog_kn));
                }
                next = e.last + 1;
            }
            prop_assert_eq!(next, pts.len());
            prop_assert!(eps.windows(2).all(|w| !(w[0].kind == EpisodeKind::Move && w[1].kind == EpisodeKind::Move)));
        }

        #[test]
        fn visits_are_ordered_and_long_enough(inside in prop::collection::vec(0u8..3, 0..150)) {
            let lons = [10.0, 11.0, 10.5];
            let pts: Vec<_> = inside.iter().enumerate().map(|(k, &i)| pt(k as u16 * 5, 56.0, lons[i as usize], 0.0)).collect();
            let cfg = SegmentationConfig::default();
            let v = detect_port_visits(&pts, &ports(), &cfg);
            prop_assert!(v.iter().all(|v| v.minutes() >= cfg.min_visit_minutes && v.first <= v.last));
            prop_assert!(v.windows(2).all(|w| w[0].last < w[1].first));
        }
    }
}
