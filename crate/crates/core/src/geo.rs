//! Spherical-earth geodesy and zone geometry.
//!
//! Distances use the haversine formula on a sphere of radius
//! [`EARTH_RADIUS_M`]. Against the WGS84 ellipsoid the error stays below
//! 0.5%, well inside every tolerance the benchmark scores with.

use alloc::string::String;
use core::cmp::Ordering;

use crate::math;
use crate::model::{TimeOfDay, TrackPoint};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Option<Self> {
        let p = Self { lat, lon };
        p.is_valid().then_some(p)
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine distance in meters.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = math::powi(math::sin(dlat / 2.0), 2)
        + math::cos(lat1) * math::cos(lat2) * math::powi(math::sin(dlon / 2.0), 2);
    2.0 * EARTH_RADIUS_M * math::asin(math::sqrt(h.clamp(0.0, 1.0)))
}

/// Sum of consecutive segment lengths; zero below two points.
pub fn trajectory_length(points: &[TrackPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| great_circle_distance(w[0].position, w[1].position))
        .sum()
}

/// Axis-aligned latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Option<Self> {
        let ok = GeoPoint::new(min_lat, min_lon).is_some()
            && GeoPoint::new(max_lat, max_lon).is_some()
            && min_lat <= max_lat
            && min_lon <= max_lon;
        ok.then_some(Self { min_lat, min_lon, max_lat, max_lon })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    /// Nearest point of the rectangle: the input itself when inside,
    /// otherwise the coordinate-wise clamp onto the boundary.
    pub fn clamp(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint {
            lat: p.lat.clamp(self.min_lat, self.max_lat),
            lon: p.lon.clamp(self.min_lon, self.max_lon),
        }
    }
}

/// A named geographic area; lower `area_rank` is assessed first.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub name: String,
    pub bounds: BoundingBox,
    pub area_rank: u32,
}

impl Zone {
    pub fn new(name: impl Into<String>, bounds: BoundingBox, area_rank: u32) -> Self {
        Self { name: name.into(), bounds, area_rank }
    }
}

/// Zero inside the rectangle, otherwise the distance to the clamped edge
/// point. For the few-kilometer offsets the annotator cares about, the
/// clamp lands within a fraction of a percent of the true nearest point.
pub fn distance_to_zone(p: GeoPoint, zone: &Zone) -> f64 {
    if zone.bounds.contains(p) {
        0.0
    } else {
        great_circle_distance(p, zone.bounds.clamp(p))
    }
}

/// Closest synchronized approach between two trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    pub distance_m: f64,
    pub time: TimeOfDay,
}

/// Minimum distance over the time buckets both trajectories share. `None`
/// means the trajectories never share a bucket. Ties keep the earliest
/// bucket.
pub fn pairwise_min_distance(a: &[TrackPoint], b: &[TrackPoint]) -> Option<ClosestApproach> {
    let mut best: Option<ClosestApproach> = None;
    for_common_buckets(a, b, |pa, pb| {
        let d = great_circle_distance(pa.position, pb.position);
        if best.map_or(true, |c| d < c.distance_m) {
            best = Some(ClosestApproach { distance_m: d, time: pa.time });
        }
    });
    best
}

/// Calls `f` for every pair of samples sharing a time bucket, in time order.
pub fn for_common_buckets(a: &[TrackPoint], b: &[TrackPoint], mut f: impl FnMut(&TrackPoint, &TrackPoint)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].time.cmp(&b[j].time) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                f(&a[i], &b[j]);
                i += 1;
                j += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn tp(minute: u16, lat: f64, lon: f64) -> TrackPoint {
        TrackPoint::new(TimeOfDay::from_minutes(minute).unwrap(), pt(lat, lon), 10.0)
    }

    // Spherical law of cosines in std f64, an algebraically independent
    // route to the same central angle.
    fn cosine_law_distance(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn zero_for_identical_points() {
        let a = pt(55.5, 10.25);
        assert_eq!(great_circle_distance(a, a), 0.0);
    }

    #[test]
    fn one_degree_of_longitude_at_55n() {
        // Frozen from the cosine-law oracle: 63 778.2 m.
        let d = great_circle_distance(pt(55.0, 10.0), pt(55.0, 11.0));
        let oracle = cosine_law_distance(pt(55.0, 10.0), pt(55.0, 11.0));
        assert!((d - oracle).abs() / oracle < 1e-6, "{d} vs {oracle}");
        assert!((d - 63_778.2).abs() / 63_778.2 < 0.001, "{d}");
    }

    #[test]
    fn meridian_arc_is_exact() {
        let d = great_circle_distance(pt(55.0, 10.0), pt(56.0, 10.0));
        let expected = EARTH_RADIUS_M * 1.0_f64.to_radians();
        assert!((d - expected).abs() < 1e-6);
    }

    #[test]
    fn trajectory_length_matches_segment_sum() {
        let points: Vec<TrackPoint> = (0..10)
            .map(|i| tp(i * 5, 55.0 + 0.01 * f64::from(i), 10.0 + 0.013 * f64::from(i * i % 7)))
            .collect();
        let brute: f64 = (1..points.len())
            .map(|i| cosine_law_distance(points[i - 1].position, points[i].position))
            .sum();
        let len = trajectory_length(&points);
        assert!((len - brute).abs() / brute < 1e-6);
        assert_eq!(trajectory_length(&points[..1]), 0.0);
        assert_eq!(
            trajectory_length(&points[..2]),
            great_circle_distance(points[0].position, points[1].position)
        );
    }

    fn zone() -> Zone {
        Zone::new("box", BoundingBox::new(55.0, 10.0, 55.2, 10.4).unwrap(), 1)
    }

    // Dense sampling of the four edges.
    fn edge_sampling_distance(p: GeoPoint, z: &Zone) -> f64 {
        let b = z.bounds;
        let n = 20_000;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let f = i as f64 / n as f64;
            let lat = b.min_lat + f * (b.max_lat - b.min_lat);
            let lon = b.min_lon + f * (b.max_lon - b.min_lon);
            for q in [pt(lat, b.min_lon), pt(lat, b.max_lon), pt(b.min_lat, lon), pt(b.max_lat, lon)] {
                best = best.min(cosine_law_distance(p, q));
            }
        }
        best
    }

    #[test]
    fn interior_point_is_zero() {
        assert_eq!(distance_to_zone(pt(55.1, 10.2), &zone()), 0.0);
        assert_eq!(distance_to_zone(pt(55.0, 10.0), &zone()), 0.0);
    }

    #[test]
    fn east_of_zone_matches_edge_sampling() {
        let z = zone();
        let p = pt(55.1, 10.5);
        let d = distance_to_zone(p, &z);
        let oracle = edge_sampling_distance(p, &z);
        assert!((d - oracle).abs() / oracle < 0.01, "{d} vs {oracle}");
    }

    #[test]
    fn corner_diagonal_matches_edge_sampling() {
        let z = zone();
        let p = pt(55.25, 10.47);
        let d = distance_to_zone(p, &z);
        let oracle = edge_sampling_distance(p, &z);
        assert!((d - oracle).abs() / oracle < 0.01, "{d} vs {oracle}");
        assert!((d - great_circle_distance(p, pt(55.2, 10.4))).abs() < 1e-9);
    }

    #[test]
    fn identical_trajectories_meet_at_first_bucket() {
        let a: Vec<TrackPoint> = (0..5).map(|i| tp(i * 5, 55.0 + 0.01 * f64::from(i), 10.0)).collect();
        let c = pairwise_min_distance(&a, &a).unwrap();
        assert_eq!(c.distance_m, 0.0);
        assert_eq!(c.time.minutes(), 0);
    }

    #[test]
    fn disjoint_time_ranges_have_no_overlap() {
        let a: Vec<TrackPoint> = (0..5).map(|i| tp(i * 5, 55.0, 10.0)).collect();
        let b: Vec<TrackPoint> = (10..15).map(|i| tp(i * 5, 55.0, 10.0)).collect();
        assert_eq!(pairwise_min_distance(&a, &b), None);
    }

    #[test]
    fn crossing_paths_meet_at_designed_bucket() {
        // A heads east along 55.0N, B heads north along 10.1E; both pass
        // (55.0, 10.1) at minute 50. B skips a bucket to exercise alignment.
        let a: Vec<TrackPoint> = (0..=20).map(|i| tp(i * 5, 55.0, 10.0 + 0.01 * f64::from(i))).collect();
        let b: Vec<TrackPoint> = (0..=20)
            .filter(|i| *i != 3)
            .map(|i| tp(i * 5, 54.9 + 0.01 * f64::from(i), 10.1))
            .collect();
        let mut brute: Option<(f64, u16)> = None;
        for pa in &a {
            for pb in &b {
                if pa.time == pb.time {
                    let d = cosine_law_distance(pa.position, pb.position);
                    if brute.map_or(true, |(bd, _)| d < bd) {
                        brute = Some((d, pa.time.minutes()));
                    }
                }
            }
        }
        let c = pairwise_min_distance(&a, &b).unwrap();
        assert_eq!(c.time.minutes(), 50);
        assert_eq!(brute.unwrap().1, 50);
        assert!(c.distance_m < 1e-6);
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (53.0..59.0f64, 7.0..16.0f64).prop_map(|(lat, lon)| pt(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(a in arb_point(), b in arb_point()) {
            let d = great_circle_distance(a, b);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, great_circle_distance(b, a));
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = great_circle_distance(a, b);
            let bc = great_circle_distance(b, c);
            let ac = great_circle_distance(a, c);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-9) + 1e-9);
        }

        #[test]
        fn zone_distance_zero_iff_inside(p in arb_point()) {
            let z = Zone::new("z", BoundingBox::new(55.0, 10.0, 56.0, 12.0).unwrap(), 1);
            let d = distance_to_zone(p, &z);
            prop_assert_eq!(d == 0.0, z.bounds.contains(p));
        }

        #[test]
        fn length_additive_at_shared_endpoint(
            xs in proptest::collection::vec(arb_point(), 2..12),
            ys in proptest::collection::vec(arb_point(), 1..12),
        ) {
            let mk = |pts: &[GeoPoint], offset: usize| -> Vec<TrackPoint> {
                pts.iter().enumerate().map(|(i, p)| {
                    TrackPoint::new(TimeOfDay::from_minutes(((offset + i) * 5) as u16).unwrap(), *p, 0.0)
                }).collect()
            };
            let first = mk(&xs, 0);
            let mut second_pts = Vec::from([*xs.last().unwrap()]);
            second_pts.extend(ys.iter().copied());
            let second = mk(&second_pts, xs.len() - 1);
            let mut joined = first.clone();
            joined.extend_from_slice(&second[1..]);
            let lhs = trajectory_length(&joined);
            let rhs = trajectory_length(&first) + trajectory_length(&second);
            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.max(1.0));
        }
    }
}
