//! Zone-transition semantic events.
//!
//! Zone assignment per point:
//! * if the previous point was in zone Z and this point is within `buffer`
//!   of Z, keep Z, except that a point strictly inside Z moves to the first
//!   smaller-ranked zone that also contains it;
//! * otherwise take the first zone, smallest first, within `buffer`, or open
//!   water when none is.
//!
//! The buffer therefore damps flip-flopping at a boundary without letting a
//! large zone swallow a nested smaller one the vessel actually enters.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::geo::{distance_to_zone, great_circle_distance, Zone};
use crate::model::{ShipStatic, TimeOfDay, TrackPoint};

pub const OPEN_WATER: &str = "open water";
pub const DEFAULT_BUFFER_M: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEvent {
    pub zone_name: String,
    pub enter: TimeOfDay,
    pub exit: TimeOfDay,
    pub distance_m: f64,
}

impl SemanticEvent {
    pub fn duration_min(&self) -> u16 {
        self.exit.minutes_since(self.enter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemanticConfigError {
    #[error("buffer must be a finite non-negative distance")]
    Buffer,
    #[error("zone area ranks must be strictly increasing, found {0} after {1}")]
    Ranks(u32, u32),
    #[error("zone name {0:?} appears twice")]
    DuplicateName(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticConfig {
    zones: Vec<Zone>,
    buffer_m: f64,
}

impl SemanticConfig {
    /// Sorts zones by rank and validates them.
    pub fn new(mut zones: Vec<Zone>, buffer_m: f64) -> Result<Self, SemanticConfigError> {
        if !(buffer_m.is_finite() && buffer_m >= 0.0) {
            return Err(SemanticConfigError::Buffer);
        }
        zones.sort_by_key(|z| z.area_rank);
        for w in zones.windows(2) {
            if w[0].area_rank == w[1].area_rank {
                return Err(SemanticConfigError::Ranks(w[1].area_rank, w[0].area_rank));
            }
        }
        for (i, z) in zones.iter().enumerate() {
            if zones[..i].iter().any(|o| o.name == z.name) || z.name == OPEN_WATER {
                return Err(SemanticConfigError::DuplicateName(z.name.clone()));
            }
        }
        Ok(Self { zones, buffer_m })
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn buffer_m(&self) -> f64 {
        self.buffer_m
    }

    pub fn with_buffer(&self, buffer_m: f64) -> Result<Self, SemanticConfigError> {
        Self::new(self.zones.clone(), buffer_m)
    }
}

/// Zone index for one point, given the previous point's zone.
fn assign(cfg: &SemanticConfig, p: &TrackPoint, prev: Option<usize>) -> Option<usize> {
    if let Some(z) = prev {
        let d = distance_to_zone(p.position, &cfg.zones[z]);
        if d <= cfg.buffer_m {
            if d == 0.0 {
                if let Some(inner) = cfg.zones[..z].iter().position(|s| s.bounds.contains(p.position)) {
                    return Some(inner);
                }
            }
            return Some(z);
        }
    }
    cfg.zones.iter().position(|z| distance_to_zone(p.position, z) <= cfg.buffer_m)
}

/// Converts a time-ordered trajectory into zone events. Events tile the
/// sampled time range: each event ends when the next one starts. A segment
/// crossing a transition counts toward the earlier event, so event distances
/// sum to the trajectory length.
pub fn to_semantic_events(points: &[TrackPoint], cfg: &SemanticConfig) -> Vec<SemanticEvent> {
    let mut events: Vec<SemanticEvent> = Vec::new();
    let mut current: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        let zone = assign(cfg, p, current);
        if i == 0 || zone != current {
            if let Some(last) = events.last_mut() {
                last.exit = p.time;
            }
            events.push(SemanticEvent {
                zone_name: zone.map_or_else(|| String::from(OPEN_WATER), |z| cfg.zones[z].name.clone()),
                enter: p.time,
                exit: p.time,
                distance_m: 0.0,
            });
            current = zone;
        }
        let last = events.last_mut().expect("an event was pushed above");
        last.exit = p.time;
        if let Some(next) = points.get(i + 1) {
            last.distance_m += great_circle_distance(p.position, next.position);
        }
    }
    events
}

/// Header line plus one line per event.
pub fn render_events(events: &[SemanticEvent], ship: &ShipStatic) -> String {
    let mut out = match &ship.name {
        Some(name) => format!("Vessel {} ({}):\n", ship.mmsi, name),
        None => format!("Vessel {}:\n", ship.mmsi),
    };
    for e in events {
        let _ = writeln!(
            out,
            "{}\u{2013}{}: in {}, traveled {:.2} km over {} min",
            e.enter,
            e.exit,
            e.zone_name,
            e.distance_m / 1000.0,
            e.duration_min()
        );
    }
    out
}
