//! Deterministic one-day, 300-vessel AIS fixture for Danish waters.
//!
//! Vessels follow keyframed plans (dwell, sail) by role: ferries shuttling
//! between two terminals, convoys sailing in formation, port-to-port traders,
//! through traffic on fixed lanes, ships waiting at anchorages, moored ships,
//! fishing trips and pleasure craft. Positions are interpolated between
//! keyframes and reported on a jittered schedule in the Danish Maritime
//! Authority CSV layout, with a small share of malformed rows.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use aisbench_core::geo::great_circle_distance;
use aisbench_core::table::push_field;
use aisbench_core::{GeoPoint, Mmsi, Port};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};

pub const FIXTURE_DATE: &str = "20/11/2024";
pub const RAW_FILE: &str = "raw_ais.csv";
pub const EMISSIONS_FILE: &str = "emissions.csv";
pub const FLEET_FILE: &str = "fleet.csv";

const DAY_END_S: f64 = 86_399.0;
const M_PER_DEG_LAT: f64 = 111_195.0;
const KN_TO_MPS: f64 = 1852.0 / 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Ferry,
    Convoy,
    PortToPort,
    Transit,
    Anchorage,
    Moored,
    Fishing,
    Pleasure,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Ferry => "ferry",
            Role::Convoy => "convoy",
            Role::PortToPort => "port-to-port",
            Role::Transit => "transit",
            Role::Anchorage => "anchorage",
            Role::Moored => "moored",
            Role::Fishing => "fishing",
            Role::Pleasure => "pleasure",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        [
            Role::Ferry,
            Role::Convoy,
            Role::PortToPort,
            Role::Transit,
            Role::Anchorage,
            Role::Moored,
            Role::Fishing,
            Role::Pleasure,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

/// Vessels per role; sums to 300.
pub const ROLE_COUNTS: [(Role, usize); 8] = [
    (Role::Ferry, 8),
    (Role::Convoy, 8),
    (Role::PortToPort, 110),
    (Role::Transit, 70),
    (Role::Anchorage, 20),
    (Role::Moored, 40),
    (Role::Fishing, 30),
    (Role::Pleasure, 14),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FleetEntry {
    pub mmsi: Mmsi,
    pub role: Role,
    /// Convoy or ferry-route label shared by related vessels.
    pub group: Option<String>,
}

fn offset(p: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    GeoPoint {
        lat: p.lat + north_m / M_PER_DEG_LAT,
        lon: p.lon + east_m / (M_PER_DEG_LAT * p.lat.to_radians().cos()),
    }
}

fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint { lat, lon }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    t: f64,
    pos: GeoPoint,
}

/// Piecewise-linear plan; the segment ending at frame i is a dwell when its
/// endpoints coincide.
#[derive(Debug, Clone)]
struct Plan {
    frames: Vec<Frame>,
}

impl Plan {
    fn start(t: f64, pos: GeoPoint) -> Self {
        Self { frames: vec![Frame { t, pos }] }
    }

    fn now(&self) -> f64 {
        self.frames.last().expect("plans start with a frame").t
    }

    fn here(&self) -> GeoPoint {
        self.frames.last().expect("plans start with a frame").pos
    }

    fn stay_until(&mut self, t: f64) -> &mut Self {
        let pos = self.here();
        let t = t.max(self.now());
        self.frames.push(Frame { t, pos });
        self
    }

    fn stay_for(&mut self, seconds: f64) -> &mut Self {
        self.stay_until(self.now() + seconds)
    }

    fn sail(&mut self, to: GeoPoint, speed_kn: f64) -> &mut Self {
        let d = great_circle_distance(self.here(), to);
        let t = self.now() + d / (speed_kn * KN_TO_MPS);
        self.frames.push(Frame { t, pos: to });
        self
    }

    fn sail_via(&mut self, route: &[GeoPoint], speed_kn: f64) -> &mut Self {
        for &p in route {
            self.sail(p, speed_kn);
        }
        self
    }

    fn end(&self) -> f64 {
        self.now()
    }

    fn shifted(&self, north_m: f64, east_m: f64) -> Plan {
        Plan { frames: self.frames.iter().map(|f| Frame { t: f.t, pos: offset(f.pos, north_m, east_m) }).collect() }
    }

    /// Position, speed in knots and course at time t.
    fn at(&self, t: f64) -> Option<(GeoPoint, f64, f64)> {
        let first = self.frames.first()?;
        if t < first.t || t > self.end() {
            return None;
        }
        let i = self.frames.iter().position(|f| f.t >= t).unwrap_or(self.frames.len() - 1).max(1);
        let (a, b) = (self.frames[i - 1], self.frames[i]);
        let span = b.t - a.t;
        let r = if span > 0.0 { (t - a.t) / span } else { 1.0 };
        let pos = pt(a.pos.lat + (b.pos.lat - a.pos.lat) * r, a.pos.lon + (b.pos.lon - a.pos.lon) * r);
        let d = great_circle_distance(a.pos, b.pos);
        let speed = if span > 0.0 && d > 1.0 { d / span / KN_TO_MPS } else { 0.0 };
        let course = (b.pos.lon - a.pos.lon).atan2(b.pos.lat - a.pos.lat).to_degrees().rem_euclid(360.0);
        Some((pos, speed, course))
    }
}

/// Report instants from `from` to the end of the plan or day.
fn schedule(rng: &mut ChaCha8Rng, from: f64, until: f64, step: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = from + rng.random_range(0.0..step.0);
    while t <= until.min(DAY_END_S) {
        out.push(t);
        t += rng.random_range(step.0..step.1);
    }
    out
}

#[derive(Debug, Clone)]
struct Statics {
    name: Option<String>,
    imo: Option<u32>,
    ship_type: &'static str,
    class_b: bool,
    length: f64,
    breadth: f64,
    draught: f64,
}

struct Vessel {
    mmsi: Mmsi,
    role: Role,
    group: Option<String>,
    plan: Plan,
    times: Vec<f64>,
    statics: Statics,
    anchored: bool,
}

/// Port approach waypoints a few kilometres offshore.
const APPROACHES: &[(&str, f64, f64)] = &[
    ("Aarhus", 56.150, 10.330),
    ("Copenhagen", 55.700, 12.660),
    ("Esbjerg", 55.450, 8.330),
    ("Fredericia", 55.550, 9.800),
    ("Frederikshavn", 57.440, 10.650),
    ("Gedser", 54.560, 11.960),
    ("Grenaa", 56.410, 11.010),
    ("Hanstholm", 57.140, 8.600),
    ("Helsingør", 56.040, 12.640),
    ("Hirtshals", 57.610, 9.960),
    ("Hundested", 55.980, 11.800),
    ("Kalundborg", 55.680, 11.000),
    ("Korsør", 55.330, 11.080),
    ("Læsø", 57.280, 10.880),
    ("Nyborg", 55.310, 10.860),
    ("Odden", 55.990, 11.330),
    ("Rødby", 54.640, 11.350),
    ("Rønne", 55.100, 14.640),
    ("Skagen", 57.730, 10.680),
    ("Spodsbjerg", 54.930, 10.870),
    ("Tårs", 54.890, 10.970),
];

const FERRY_ROUTES: [(&str, &str, f64); 4] =
    [("Frederikshavn", "Læsø", 15.0), ("Spodsbjerg", "Tårs", 11.0), ("Aarhus", "Odden", 20.0), ("Grenaa", "Hundested", 18.0)];

const TRADE_PORTS: [&str; 12] = [
    "Aarhus",
    "Copenhagen",
    "Esbjerg",
    "Fredericia",
    "Frederikshavn",
    "Grenaa",
    "Helsingør",
    "Kalundborg",
    "Korsør",
    "Nyborg",
    "Rønne",
    "Skagen",
];

const FISHING_PORTS: [&str; 5] = ["Skagen", "Hirtshals", "Hanstholm", "Esbjerg", "Grenaa"];
const PLEASURE_PORTS: [&str; 5] = ["Aarhus", "Helsingør", "Grenaa", "Spodsbjerg", "Skagen"];

/// Through lanes that stay clear of every port radius.
fn lanes() -> Vec<Vec<GeoPoint>> {
    vec![
        vec![
            pt(57.95, 9.00),
            pt(57.88, 10.75),
            pt(57.30, 11.20),
            pt(56.40, 11.35),
            pt(55.85, 11.05),
            pt(55.45, 10.95),
            pt(54.75, 10.93),
            pt(54.45, 11.60),
            pt(54.50, 13.00),
        ],
        vec![pt(57.30, 11.25), pt(56.30, 12.30), pt(56.08, 12.70), pt(55.70, 12.78), pt(55.30, 12.85), pt(54.90, 13.50)],
        vec![pt(55.20, 7.60), pt(56.50, 7.80), pt(57.60, 8.50), pt(58.00, 9.50)],
        vec![pt(54.90, 13.50), pt(55.25, 14.30), pt(55.40, 15.30)],
    ]
}

const ANCHORAGES: [(f64, f64, &str); 5] = [
    (57.760, 10.740, "Skagen"),
    (57.420, 10.640, "Frederikshavn"),
    (56.120, 10.360, "Aarhus"),
    (55.740, 12.760, "Copenhagen"),
    (55.520, 9.830, "Fredericia"),
];

const NAME_HEAD: [&str; 20] = [
    "NORD", "BALTIC", "ARKTIS", "JUTLANDIA", "KATTEGAT", "FREJA", "THOR", "ODIN", "SIF", "HAVET", "MARINA", "POLAR",
    "NORTHERN", "STENA", "DANA", "HELGE", "SKAW", "LIMFJORD", "AMALIE", "KRONBORG",
];
const NAME_TAIL: [&str; 15] = [
    "STAR", "SPIRIT", "EXPRESS", "TRADER", "CARRIER", "WIND", "PRIDE", "QUEEN", "VIKING", "HAVN", "BRIDGE", "LINK",
    "FIGHTER", "MOON", "SUN",
];

struct Gen<'a> {
    rng: ChaCha8Rng,
    ports: &'a [Port],
    used_mmsi: BTreeSet<u32>,
    used_imo: BTreeSet<u32>,
}

impl<'a> Gen<'a> {
    fn port(&self, name: &str) -> GeoPoint {
        self.ports
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.position)
            .unwrap_or_else(|| panic!("fixture port {name} missing from the ports list"))
    }

    fn approach(&self, name: &str) -> GeoPoint {
        APPROACHES.iter().find(|a| a.0 == name).map_or_else(|| self.port(name), |a| pt(a.1, a.2))
    }

    /// Waypoints from leaving `a` to arriving at the quay in `b`.
    fn route(&self, a: &str, b: &str) -> Vec<GeoPoint> {
        let mut r = vec![self.approach(a)];
        let hub = pt(56.30, 10.65);
        if (a, b) == ("Aarhus", "Skagen") || (a, b) == ("Skagen", "Aarhus") {
            r.push(hub);
        }
        r.push(self.approach(b));
        r.push(self.port(b));
        r
    }

    fn near(&mut self, p: GeoPoint, within_m: f64) -> GeoPoint {
        let r = within_m * self.rng.random::<f64>().sqrt();
        let a = self.rng.random_range(0.0..std::f64::consts::TAU);
        offset(p, r * a.cos(), r * a.sin())
    }

    fn mmsi(&mut self) -> Mmsi {
        let mids = [219u32, 219, 219, 220, 265, 257, 311, 636];
        loop {
            let mid = *mids.choose(&mut self.rng).expect("nonempty");
            let v = mid * 1_000_000 + self.rng.random_range(1_000..999_999);
            if self.used_mmsi.insert(v) {
                return Mmsi::new(v).expect("nine digits");
            }
        }
    }

    fn imo(&mut self) -> u32 {
        loop {
            let head: u32 = self.rng.random_range(900_000..999_999);
            let digits: Vec<u32> = head.to_string().bytes().map(|b| u32::from(b - b'0')).collect();
            let check = digits.iter().zip((2..=7).rev()).map(|(d, w)| d * w).sum::<u32>() % 10;
            let v = head * 10 + check;
            if self.used_imo.insert(v) {
                return v;
            }
        }
    }

    fn name(&mut self) -> String {
        let mut n = format!("{} {}", NAME_HEAD.choose(&mut self.rng).unwrap(), NAME_TAIL.choose(&mut self.rng).unwrap());
        if self.rng.random_bool(0.2) {
            n.push_str([" II", " III", " IV"].choose(&mut self.rng).unwrap());
        }
        n
    }

    fn statics(&mut self, role: Role) -> Statics {
        let r = &mut self.rng;
        let (ship_type, length): (&'static str, f64) = match role {
            Role::Ferry => ("Passenger", r.random_range(70.0..160.0)),
            Role::Fishing => ("Fishing", r.random_range(15.0..45.0)),
            Role::Pleasure => ("Pleasure", r.random_range(8.0..20.0)),
            Role::Moored if r.random_bool(0.3) => ("Tug", r.random_range(20.0..40.0)),
            _ if r.random_bool(0.3) => ("Tanker", r.random_range(90.0..335.0)),
            _ => ("Cargo", r.random_range(60.0..300.0)),
        };
        let length = (length * 10.0).round() / 10.0;
        let breadth = (length / r.random_range(5.0..7.5) * 10.0).round() / 10.0;
        let mut draught = ((length / 18.0 + r.random_range(0.0..3.0)) * 10.0).round() / 10.0;
        if ship_type == "Tanker" && length > 300.0 {
            draught = r.random_range(19.5..22.5_f64).mul_add(10.0, 0.0).round() / 10.0;
        }
        let commercial = !matches!(role, Role::Fishing | Role::Pleasure);
        let has_imo = if commercial { self.rng.random_bool(0.95) } else { role == Role::Fishing && self.rng.random_bool(0.4) };
        let imo = has_imo.then(|| self.imo());
        let name = (role != Role::Pleasure || self.rng.random_bool(0.7)).then(|| self.name());
        Statics { name, imo, ship_type, class_b: role == Role::Pleasure, length, breadth, draught }
    }

    fn vessel(&mut self, role: Role, group: Option<String>, plan: Plan, step: (f64, f64)) -> Vessel {
        let mmsi = self.mmsi();
        let statics = self.statics(role);
        let times = schedule(&mut self.rng, plan.frames[0].t, plan.end(), step);
        Vessel { mmsi, role, group, plan, times, statics, anchored: false }
    }

    fn ferries(&mut self, out: &mut Vec<Vessel>) {
        for (route_no, &(a, b, speed)) in FERRY_ROUTES.iter().enumerate() {
            let group = format!("ferry:{a}-{b}");
            for k in 0..2 {
                let (from, to) = if k == 0 { (a, b) } else { (b, a) };
                // Opposite-direction sailings keep 800 m apart where they cross.
                let side = if k == 0 { 400.0 } else { -400.0 };
                let mut plan = Plan::start(0.0, self.port(from));
                plan.stay_until(5.0 * 3600.0 + route_no as f64 * 600.0);
                let (mut here, mut there) = (from, to);
                while plan.now() < 21.5 * 3600.0 {
                    let mut route = self.route(here, there);
                    let mid = route.len() - 2;
                    route[mid] = offset(route[mid], side, side);
                    plan.sail_via(&route, speed);
                    plan.stay_for(25.0 * 60.0);
                    std::mem::swap(&mut here, &mut there);
                }
                plan.stay_until(DAY_END_S);
                out.push(self.vessel(Role::Ferry, Some(group.clone()), plan, (60.0, 120.0)));
            }
        }
    }

    fn convoys(&mut self, out: &mut Vec<Vessel>) {
        let groups: [(usize, &str, &str, f64); 3] =
            [(3, "Skagen", "Copenhagen", 6.5), (3, "Esbjerg", "Hirtshals", 8.0), (2, "Fredericia", "Aarhus", 10.0)];
        for (g, &(members, a, b, depart_h)) in groups.iter().enumerate() {
            let label = format!("convoy-{}", g + 1);
            let speed = self.rng.random_range(9.0..12.0);
            let mut lead = Plan::start(0.0, self.port(a));
            lead.stay_until(depart_h * 3600.0);
            lead.sail_via(&self.route(a, b), speed);
            lead.stay_until(DAY_END_S);
            let times = schedule(&mut self.rng, 0.0, DAY_END_S, (60.0, 120.0));
            for m in 0..members {
                let side = [0.0, 350.0, -350.0][m];
                let plan = lead.shifted(side * 0.6, side * 0.8);
                let mut v = self.vessel(Role::Convoy, Some(label.clone()), plan, (60.0, 120.0));
                v.times = times.clone();
                out.push(v);
            }
        }
    }

    fn port_to_port(&mut self, n: usize, out: &mut Vec<Vessel>) {
        for i in 0..n {
            // The first twenty trade on the Aarhus-Skagen run in both directions.
            let mut calls: Vec<&str> = match i {
                0..=11 => vec!["Aarhus", "Skagen"],
                12..=19 => vec!["Skagen", "Aarhus"],
                _ => {
                    let mut c = vec![*TRADE_PORTS.choose(&mut self.rng).unwrap()];
                    for _ in 0..self.rng.random_range(1..=3) {
                        let next = *TRADE_PORTS.choose(&mut self.rng).unwrap();
                        if next != *c.last().unwrap() {
                            c.push(next);
                        }
                    }
                    c
                }
            };
            if i < 20 && self.rng.random_bool(0.3) {
                calls.push(*TRADE_PORTS.choose(&mut self.rng).unwrap());
                calls.dedup();
            }
            let speed = self.rng.random_range(9.0..16.0);
            let start = self.near(self.port(calls[0]), 500.0);
            let mut plan = Plan::start(0.0, start);
            plan.stay_until(self.rng.random_range(0.5..9.0) * 3600.0);
            for w in calls.windows(2) {
                plan.sail_via(&self.route(w[0], w[1]), speed);
                let quay = self.near(plan.here(), 400.0);
                plan.sail(quay, 3.0);
                plan.stay_for(self.rng.random_range(40.0..180.0) * 60.0);
                if plan.now() > DAY_END_S {
                    break;
                }
            }
            plan.stay_until(DAY_END_S);
            out.push(self.vessel(Role::PortToPort, None, plan, (60.0, 150.0)));
        }
    }

    fn lane_plan(&mut self, lane: &[GeoPoint], speed: f64, start_s: f64) -> Plan {
        let mut plan = Plan::start(start_s, lane[0]);
        plan.sail_via(&lane[1..], speed);
        plan
    }

    fn transits(&mut self, n: usize, out: &mut Vec<Vessel>) {
        let lanes = lanes();
        // Three overtaking pairs 150 m apart for part of their passage.
        let pairs = 3;
        for _ in 0..n - 2 * pairs {
            let mut lane = lanes.choose(&mut self.rng).unwrap().clone();
            if self.rng.random_bool(0.5) {
                lane.reverse();
            }
            let speed = self.rng.random_range(10.0..18.0);
            let passage = self.lane_plan(&lane, speed, 0.0).end();
            // Some are already under way at midnight; all are seen for at least three hours.
            let earliest = -(passage - 3.0 * 3600.0).clamp(0.0, 12.0 * 3600.0);
            let start: f64 = self.rng.random_range(earliest..16.0 * 3600.0);
            let plan = self.lane_plan(&lane, speed, start);
            let plan = trim_before(&plan, 0.0);
            out.push(self.vessel(Role::Transit, None, plan, (60.0, 150.0)));
        }
        for p in 0..pairs {
            let lane = lanes[p % 2].clone();
            let speed = self.rng.random_range(11.0..14.0);
            let start = self.rng.random_range(2.0..10.0) * 3600.0;
            let lead = self.lane_plan(&lane, speed, start);
            let times = schedule(&mut self.rng, start, lead.end(), (60.0, 120.0));
            for side in [0.0, 150.0] {
                let plan = lead.shifted(side * 0.6, side * 0.8);
                let mut v = self.vessel(Role::Transit, Some(format!("pair-{}", p + 1)), plan, (60.0, 120.0));
                v.times = times.clone();
                out.push(v);
            }
        }
    }

    fn anchorages(&mut self, n: usize, out: &mut Vec<Vessel>) {
        for i in 0..n {
            let (lat, lon, port) = ANCHORAGES[i % ANCHORAGES.len()];
            let spot = self.near(pt(lat, lon), 800.0);
            let from = self.near(spot, 25_000.0);
            let speed = self.rng.random_range(8.0..13.0);
            let mut plan = Plan::start(0.0, from);
            plan.stay_for(self.rng.random_range(0.0..3.0) * 3600.0);
            plan.sail(spot, speed);
            plan.stay_for(self.rng.random_range(1.5..8.0) * 3600.0);
            if i % 4 == 0 {
                // A second wait after shifting berth in the roads.
                let spot2 = self.near(spot, 1500.0);
                plan.sail(spot2, 4.0);
                plan.stay_for(self.rng.random_range(1.0..3.0) * 3600.0);
            }
            let quay = self.near(self.port(port), 400.0);
            plan.sail_via(&[self.approach(port), quay], speed);
            plan.stay_until(DAY_END_S);
            let mut v = self.vessel(Role::Anchorage, None, plan, (60.0, 150.0));
            v.anchored = true;
            out.push(v);
        }
    }

    fn moored(&mut self, n: usize, out: &mut Vec<Vessel>) {
        for _ in 0..n {
            let port = *TRADE_PORTS.choose(&mut self.rng).unwrap();
            let berth = self.near(self.port(port), 700.0);
            let start = if self.rng.random_bool(0.8) { 0.0 } else { self.rng.random_range(1.0..12.0) * 3600.0 };
            let mut plan = Plan::start(start, berth);
            plan.stay_until(DAY_END_S);
            out.push(self.vessel(Role::Moored, None, plan, (180.0, 360.0)));
        }
    }

    fn fishing(&mut self, n: usize, out: &mut Vec<Vessel>) {
        for _ in 0..n {
            let home = *FISHING_PORTS.choose(&mut self.rng).unwrap();
            let off = self.approach(home);
            let bearing = self.rng.random_range(0.0..std::f64::consts::TAU);
            let dist = self.rng.random_range(15_000.0..35_000.0);
            let ground = offset(off, dist * bearing.cos(), dist * bearing.sin());
            let mut plan = Plan::start(0.0, self.near(self.port(home), 400.0));
            plan.stay_until(self.rng.random_range(3.0..7.0) * 3600.0);
            plan.sail_via(&[off, ground], 9.0);
            let trawl_until = plan.now() + self.rng.random_range(5.0..9.0) * 3600.0;
            while plan.now() < trawl_until {
                let next = self.near(plan.here(), 4000.0);
                plan.sail(next, self.rng.random_range(2.5..4.0));
            }
            plan.sail_via(&[off, self.near(self.port(home), 400.0)], 9.0);
            plan.stay_until(DAY_END_S);
            out.push(self.vessel(Role::Fishing, None, plan, (60.0, 150.0)));
        }
    }

    fn pleasure(&mut self, n: usize, out: &mut Vec<Vessel>) {
        for _ in 0..n {
            let home = *PLEASURE_PORTS.choose(&mut self.rng).unwrap();
            let quay = self.near(self.port(home), 300.0);
            let out_to = self.near(self.approach(home), 6000.0);
            let start = self.rng.random_range(8.0..11.0) * 3600.0;
            let mut plan = Plan::start(start, quay);
            plan.stay_for(self.rng.random_range(10.0..40.0) * 60.0);
            plan.sail(out_to, self.rng.random_range(4.0..7.0));
            plan.stay_for(self.rng.random_range(20.0..90.0) * 60.0);
            plan.sail(quay, self.rng.random_range(4.0..7.0));
            plan.stay_for(self.rng.random_range(10.0..60.0) * 60.0);
            out.push(self.vessel(Role::Pleasure, None, plan, (150.0, 240.0)));
        }
    }
}

/// Drops the part of a plan before `t`, starting it at its position then.
fn trim_before(plan: &Plan, t: f64) -> Plan {
    match plan.at(t) {
        Some((pos, _, _)) if t > plan.frames[0].t => {
            let mut frames = vec![Frame { t, pos }];
            frames.extend(plan.frames.iter().copied().filter(|f| f.t > t));
            Plan { frames }
        }
        _ => plan.clone(),
    }
}

/// The generated files, in memory.
pub struct Fixture {
    pub raw_csv: String,
    pub emissions_csv: String,
    pub fleet: Vec<FleetEntry>,
}

pub const RAW_HEADER: &str =
    "# Timestamp,Type of mobile,MMSI,Latitude,Longitude,Navigational status,SOG,COG,IMO,Name,Ship type,Width,Length,Draught";

pub fn generate(seed: u64, ports: &[Port]) -> Fixture {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), ports, used_mmsi: BTreeSet::new(), used_imo: BTreeSet::new() };
    let mut vessels = Vec::new();
    for (role, n) in ROLE_COUNTS {
        match role {
            Role::Ferry => g.ferries(&mut vessels),
            Role::Convoy => g.convoys(&mut vessels),
            Role::PortToPort => g.port_to_port(n, &mut vessels),
            Role::Transit => g.transits(n, &mut vessels),
            Role::Anchorage => g.anchorages(n, &mut vessels),
            Role::Moored => g.moored(n, &mut vessels),
            Role::Fishing => g.fishing(n, &mut vessels),
            Role::Pleasure => g.pleasure(n, &mut vessels),
        }
    }
    debug_assert_eq!(vessels.len(), ROLE_COUNTS.iter().map(|r| r.1).sum::<usize>());

    struct Line {
        t: u32,
        mmsi: Mmsi,
        text: String,
    }
    let mut lines: Vec<Line> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in &vessels {
        let s = &v.statics;
        // A minority of messages carry a stale draught, and some omit statics.
        let stale_draught = ((s.draught - 1.3).max(0.5) * 10.0).round() / 10.0;
        for &t in &v.times {
            let Some((pos, speed, course)) = v.plan.at(t) else { continue };
            let moving = speed > 0.5;
            let jitter = if moving { 8.0 } else { 4.0 };
            let pos = offset(pos, rng.random_range(-jitter..jitter), rng.random_range(-jitter..jitter));
            let sog = if moving {
                (speed + rng.random_range(-0.3..0.3)).max(1.1)
            } else if v.anchored || v.role == Role::Fishing {
                rng.random_range(0.0..0.3)
            } else {
                *[0.0, 0.0, 0.0, 0.1].choose(&mut rng).unwrap()
            };
            let status = match (moving, v.role) {
                (true, Role::Fishing) if speed < 5.0 => "Engaged in fishing",
                (true, _) => "Under way using engine",
                (false, _) if v.anchored => "At anchor",
                (false, _) => "Moored",
            };
            let second = t as u32;
            let (h, m, sec) = (second / 3600, second / 60 % 60, second % 60);
            let mut lat = format!("{:.6}", pos.lat);
            let mut mmsi_text = v.mmsi.to_string();
            let roll: f64 = rng.random();
            if roll < 0.002 {
                lat = "91.000000".into();
            } else if roll < 0.003 {
                mmsi_text.pop();
            }
            let sog_text = if rng.random_bool(0.004) { String::new() } else { format!("{sog:.1}") };
            let omit = rng.random_bool(0.05);
            let field = |x: String| if omit { String::new() } else { x };
            let draught = if rng.random_bool(0.1) { stale_draught } else { s.draught };
            let mut text = String::with_capacity(160);
            let _ = write!(
                text,
                "{FIXTURE_DATE} {h:02}:{m:02}:{sec:02},{},{mmsi_text},{lat},{:.6},{status},{sog_text},{:.1},{},{},{},{},{},{}",
                if s.class_b { "Class B" } else { "Class A" },
                pos.lon,
                if moving { course } else { 0.0 },
                field(s.imo.map_or_else(|| "Unknown".into(), |i| format!("IMO{i}"))),
                field(quoted(s.name.as_deref().unwrap_or(""))),
                field(s.ship_type.to_string()),
                field(format!("{}", s.breadth)),
                field(format!("{}", s.length)),
                field(format!("{draught}")),
            );
            lines.push(Line { t: second, mmsi: v.mmsi, text });
        }
    }
    lines.sort_by(|a, b| (a.t, a.mmsi).cmp(&(b.t, b.mmsi)));
    let mut raw_csv = String::with_capacity(lines.len() * 140);
    raw_csv.push_str(RAW_HEADER);
    raw_csv.push('\n');
    for l in &lines {
        raw_csv.push_str(&l.text);
        raw_csv.push('\n');
    }

    let mut emissions_csv = String::from("imo,annual_co2,co2_per_nm,annual_distance_nm\n");
    let mut with_imo: Vec<&Vessel> = vessels.iter().filter(|v| v.statics.imo.is_some()).collect();
    with_imo.sort_by_key(|v| v.statics.imo);
    for v in with_imo {
        if !rng.random_bool(0.85) {
            continue;
        }
        let size = v.statics.length * v.statics.breadth;
        let rate: f64 = (size / 25.0 * rng.random_range(0.6..1.6)).clamp(20.0, 900.0);
        let distance: f64 = rng.random_range(8_000.0..90_000.0);
        let annual = (rate * distance / 1000.0 * 10.0).round() / 10.0;
        let rate = (rate * 100.0).round() / 100.0;
        let distance = distance.round();
        let _ = match rng.random_range(0..10) {
            0..=5 => writeln!(emissions_csv, "{},{annual},{rate},{distance}", v.statics.imo.unwrap()),
            6..=8 => writeln!(emissions_csv, "{},{annual},,{distance}", v.statics.imo.unwrap()),
            _ => writeln!(emissions_csv, "{},{annual},,", v.statics.imo.unwrap()),
        };
    }

    let mut fleet: Vec<FleetEntry> =
        vessels.iter().map(|v| FleetEntry { mmsi: v.mmsi, role: v.role, group: v.group.clone() }).collect();
    fleet.sort_by_key(|f| f.mmsi);
    Fixture { raw_csv, emissions_csv, fleet }
}

fn quoted(s: &str) -> String {
    let mut out = String::new();
    push_field(&mut out, s);
    out
}

pub fn render_fleet(fleet: &[FleetEntry]) -> String {
    let mut out = String::from("mmsi,role,group\n");
    for f in fleet {
        let _ = writeln!(out, "{},{},{}", f.mmsi, f.role.as_str(), f.group.as_deref().unwrap_or(""));
    }
    out
}

pub fn parse_fleet(path: &Path) -> Result<Vec<FleetEntry>> {
    let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
    let mut out = Vec::new();
    for rec in csv::Reader::from_reader(text.as_bytes()).records() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        let entry = (|| {
            Some(FleetEntry {
                mmsi: Mmsi::parse(rec.get(0)?)?,
                role: Role::parse(rec.get(1)?)?,
                group: rec.get(2).filter(|g| !g.is_empty()).map(str::to_string),
            })
        })();
        out.push(entry.ok_or_else(|| BenchError::Data(format!("{}: bad fleet row {:?}", path.display(), rec)))?);
    }
    Ok(out)
}

/// Writes the raw AIS, emissions and fleet files into `dir`.
pub fn write_fixture(dir: &Path, seed: u64, ports: &[Port]) -> Result<Vec<FleetEntry>> {
    std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    let mut fx = generate(seed, ports);
    for (name, body) in [(RAW_FILE, &fx.raw_csv), (EMISSIONS_FILE, &fx.emissions_csv)] {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(BenchError::io(&p))?;
    }
    let p = dir.join(FLEET_FILE);
    std::fs::write(&p, render_fleet(&fx.fleet)).map_err(BenchError::io(&p))?;
    Ok(std::mem::take(&mut fx.fleet))
}
