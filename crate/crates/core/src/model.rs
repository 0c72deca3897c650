//! Vessel, track and dataset types shared by every stage.
//!
//! Units are fixed: distances in meters, speeds in knots, per-distance
//! emissions in kg CO2 per nautical mile and annual emissions in metric
//! tonnes. Conversions happen where values enter or leave the process.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::geo::GeoPoint;

pub const METERS_PER_NAUTICAL_MILE: f64 = 1852.0;
pub const KMH_PER_KNOT: f64 = 1.852;
pub const MINUTES_PER_DAY: u16 = 24 * 60;
pub const SECONDS_PER_DAY: u32 = 24 * 60 * 60;

/// Maritime Mobile Service Identity. Always rendered with 9 digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mmsi(u32);

impl Mmsi {
    pub const fn new(value: u32) -> Option<Self> {
        if value <= 999_999_999 {
            Some(Self(value))
        } else {
            None
        }
    }

    /// Accepts exactly nine ASCII digits.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.len() != 9 || !text.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        text.parse().ok().map(Self)
    }

    pub const fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Mmsi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:09}", self.0)
    }
}

impl FromStr for Mmsi {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s).ok_or(InvalidValue("mmsi"))
    }
}

/// IMO hull number (seven digits, optionally written with an `IMO` prefix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Imo(u32);

impl Imo {
    pub const fn new(value: u32) -> Option<Self> {
        if value >= 1_000_000 && value <= 9_999_999 {
            Some(Self(value))
        } else {
            None
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let digits = text
            .strip_prefix("IMO")
            .or_else(|| text.strip_prefix("imo"))
            .unwrap_or(text)
            .trim();
        if digits.len() != 7 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok().and_then(Self::new)
    }

    pub const fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Imo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Minute of the civil day, `00:00` to `23:59`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub const fn from_minutes(minutes: u16) -> Option<Self> {
        if minutes < MINUTES_PER_DAY {
            Some(Self(minutes))
        } else {
            None
        }
    }

    pub const fn from_hm(hour: u16, minute: u16) -> Option<Self> {
        if hour < 24 && minute < 60 {
            Some(Self(hour * 60 + minute))
        } else {
            None
        }
    }

    /// Parses `HH:MM`.
    pub fn parse(text: &str) -> Option<Self> {
        let (h, m) = text.trim().split_once(':')?;
        if h.len() != 2 || m.len() != 2 {
            return None;
        }
        Self::from_hm(h.parse().ok()?, m.parse().ok()?)
    }

    pub const fn minutes(self) -> u16 {
        self.0
    }

    /// Minutes elapsed since `earlier`; zero if `earlier` is later.
    pub const fn minutes_since(self, earlier: TimeOfDay) -> u16 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidValue(pub &'static str);

impl fmt::Display for InvalidValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}", self.0)
    }
}

/// One decoded AIS message after column mapping, before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAisRow {
    pub second_of_day: u32,
    pub mmsi: Mmsi,
    pub position: GeoPoint,
    pub sog: Option<f64>,
    pub name: Option<String>,
    pub imo: Option<Imo>,
    pub length: Option<f64>,
    pub breadth: Option<f64>,
    pub draught: Option<f64>,
    pub ship_type: Option<String>,
}

impl RawAisRow {
    pub fn new(second_of_day: u32, mmsi: Mmsi, position: GeoPoint, sog: Option<f64>) -> Self {
        Self {
            second_of_day,
            mmsi,
            position,
            sog,
            name: None,
            imo: None,
            length: None,
            breadth: None,
            draught: None,
            ship_type: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.second_of_day < SECONDS_PER_DAY
            && self.position.is_valid()
            && self.sog.map_or(true, |s| s.is_finite() && s >= 0.0)
    }
}

/// A resampled position sample within one vessel's trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub time: TimeOfDay,
    pub position: GeoPoint,
    pub sog: f64,
}

impl TrackPoint {
    pub const fn new(time: TimeOfDay, position: GeoPoint, sog: f64) -> Self {
        Self { time, position, sog }
    }
}

/// Flat `dynamic.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicRecord {
    pub mmsi: Mmsi,
    pub time: TimeOfDay,
    pub position: GeoPoint,
    pub sog: f64,
}

/// Time-ordered samples of one vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mmsi: Mmsi,
    pub points: Vec<TrackPoint>,
}

impl Trajectory {
    pub fn new(mmsi: Mmsi, points: Vec<TrackPoint>) -> Self {
        Self { mmsi, points }
    }

    pub fn is_time_ordered(&self) -> bool {
        self.points.windows(2).all(|w| w[0].time < w[1].time)
    }

    pub fn records(&self) -> impl Iterator<Item = DynamicRecord> + '_ {
        self.points.iter().map(move |p| DynamicRecord {
            mmsi: self.mmsi,
            time: p.time,
            position: p.position,
            sog: p.sog,
        })
    }

    pub fn length_m(&self) -> f64 {
        crate::geo::trajectory_length(&self.points)
    }
}

/// Per-vessel metadata merged with annual emission figures.
#[derive(Debug, Clone, PartialEq)]
pub struct ShipStatic {
    pub mmsi: Mmsi,
    pub name: Option<String>,
    pub imo: Option<Imo>,
    pub length: Option<f64>,
    pub breadth: Option<f64>,
    pub draught: Option<f64>,
    pub ship_type: Option<String>,
    /// Metric tonnes per year.
    pub annual_co2_t: Option<f64>,
    /// kg CO2 per nautical mile.
    pub co2_per_nm_kg: Option<f64>,
    pub annual_distance_nm: Option<f64>,
}

impl ShipStatic {
    pub fn new(mmsi: Mmsi) -> Self {
        Self {
            mmsi,
            name: None,
            imo: None,
            length: None,
            breadth: None,
            draught: None,
            ship_type: None,
            annual_co2_t: None,
            co2_per_nm_kg: None,
            annual_distance_nm: None,
        }
    }

    /// The emissions source's own per-distance figure, else annual CO2
    /// spread over the annual distance.
    pub fn effective_co2_per_nm_kg(&self) -> Option<f64> {
        if let Some(rate) = self.co2_per_nm_kg {
            return Some(rate);
        }
        match (self.annual_co2_t, self.annual_distance_nm) {
            (Some(co2), Some(dist)) if dist > 0.0 => Some(co2 * 1000.0 / dist),
            _ => None,
        }
    }

    /// Length × breadth × draught, in cubic meters.
    pub fn box_volume_m3(&self) -> Option<f64> {
        Some(self.length? * self.breadth? * self.draught?)
    }

    pub fn has_emissions(&self) -> bool {
        self.annual_co2_t.is_some() || self.effective_co2_per_nm_kg().is_some()
    }
}

/// IMO-keyed annual emissions, e.g. from an MRV extract.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsRow {
    pub imo: Imo,
    pub annual_co2_t: Option<f64>,
    pub co2_per_nm_kg: Option<f64>,
    pub annual_distance_nm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub position: GeoPoint,
    pub approach_radius_m: f64,
}

impl Port {
    pub fn new(name: impl Into<String>, position: GeoPoint, approach_radius_m: f64) -> Self {
        Self { name: name.into(), position, approach_radius_m }
    }
}

/// The three prompt-ready tables for one vessel population.
///
/// Trajectories and static rows are sorted by MMSI and cover the same
/// vessels; ports are sorted by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetBundle {
    pub trajectories: Vec<Trajectory>,
    pub statics: Vec<ShipStatic>,
    pub ports: Vec<Port>,
}

impl DatasetBundle {
    /// Builds a bundle, dropping vessels that lack either a trajectory or a
    /// static row. Returns the dropped MMSIs alongside the bundle.
    pub fn assemble(
        mut trajectories: Vec<Trajectory>,
        mut statics: Vec<ShipStatic>,
        mut ports: Vec<Port>,
    ) -> (Self, Vec<Mmsi>) {
        trajectories.retain(|t| !t.points.is_empty());
        trajectories.sort_by_key(|t| t.mmsi);
        trajectories.dedup_by_key(|t| t.mmsi);
        statics.sort_by_key(|s| s.mmsi);
        statics.dedup_by_key(|s| s.mmsi);
        ports.sort_by(|a, b| a.name.cmp(&b.name));

        let mut dropped = Vec::new();
        let has_static = |m: Mmsi| statics.binary_search_by_key(&m, |s| s.mmsi).is_ok();
        for t in &trajectories {
            if !has_static(t.mmsi) {
                dropped.push(t.mmsi);
            }
        }
        trajectories.retain(|t| has_static(t.mmsi));
        let kept: Vec<Mmsi> = trajectories.iter().map(|t| t.mmsi).collect();
        for s in &statics {
            if kept.binary_search(&s.mmsi).is_err() {
                dropped.push(s.mmsi);
            }
        }
        statics.retain(|s| kept.binary_search(&s.mmsi).is_ok());
        dropped.sort();
        dropped.dedup();
        (Self { trajectories, statics, ports }, dropped)
    }

    /// Number of distinct vessels.
    pub fn size(&self) -> usize {
        self.trajectories.len()
    }

    pub fn mmsis(&self) -> Vec<Mmsi> {
        self.trajectories.iter().map(|t| t.mmsi).collect()
    }

    pub fn contains(&self, mmsi: Mmsi) -> bool {
        self.trajectory(mmsi).is_some()
    }

    pub fn trajectory(&self, mmsi: Mmsi) -> Option<&Trajectory> {
        self.trajectories
            .binary_search_by_key(&mmsi, |t| t.mmsi)
            .ok()
            .map(|i| &self.trajectories[i])
    }

    pub fn ship(&self, mmsi: Mmsi) -> Option<&ShipStatic> {
        self.statics
            .binary_search_by_key(&mmsi, |s| s.mmsi)
            .ok()
            .map(|i| &self.statics[i])
    }

    pub fn port(&self, name: &str) -> Option<(usize, &Port)> {
        self.ports
            .iter()
            .enumerate()
            .find(|(_, p)| p.name.eq_ignore_ascii_case(name.trim()))
    }

    pub fn dynamic_row_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.points.len()).sum()
    }

    /// Checks the bundle invariants; returns a description of the first
    /// violation.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.trajectories.len() != self.statics.len() {
            return Err("trajectory and static vessel sets differ");
        }
        for (t, s) in self.trajectories.iter().zip(&self.statics) {
            if s.mmsi != t.mmsi {
                return Err("trajectory and static vessel sets differ");
            }
            if !t.is_time_ordered() {
                return Err("trajectory not strictly increasing in time");
            }
        }
        if self.trajectories.windows(2).any(|w| w[0].mmsi >= w[1].mmsi) {
            return Err("trajectories not sorted by mmsi");
        }
        if self.ports.windows(2).any(|w| w[0].name >= w[1].name) {
            return Err("port names not unique and sorted");
        }
        Ok(())
    }
}
