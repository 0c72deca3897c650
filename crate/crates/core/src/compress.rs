//! Top-Down Time Ratio trajectory compression.
//!
//! The split point at each step depends only on the points, never on
//! epsilon, so a larger epsilon stops the same recursion earlier. That gives
//! monotonicity in epsilon and idempotence on the output.

use alloc::vec::Vec;

use crate::geo::{great_circle_distance, GeoPoint};
use crate::model::{TrackPoint, Trajectory};

pub const DEFAULT_EPSILON_M: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionConfig {
    epsilon_m: f64,
}

impl CompressionConfig {
    pub fn new(epsilon_m: f64) -> Option<Self> {
        (epsilon_m.is_finite() && epsilon_m > 0.0).then_some(Self { epsilon_m })
    }

    pub fn epsilon_m(&self) -> f64 {
        self.epsilon_m
    }
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self { epsilon_m: DEFAULT_EPSILON_M }
    }
}

/// Position at `p`'s time on the straight lat/lon interpolation from `a` to `b`.
pub fn time_ratio_position(p: &TrackPoint, a: &TrackPoint, b: &TrackPoint) -> GeoPoint {
    let span = f64::from(b.time.minutes()) - f64::from(a.time.minutes());
    if span <= 0.0 {
        return a.position;
    }
    let r = (f64::from(p.time.minutes()) - f64::from(a.time.minutes())) / span;
    GeoPoint {
        lat: a.position.lat + r * (b.position.lat - a.position.lat),
        lon: a.position.lon + r * (b.position.lon - a.position.lon),
    }
}

/// Distance between `p` and where it would be if the vessel moved uniformly
/// from `a` to `b`.
pub fn synchronized_deviation(p: &TrackPoint, a: &TrackPoint, b: &TrackPoint) -> f64 {
    great_circle_distance(p.position, time_ratio_position(p, a, b))
}

/// Indices of the points kept by TDTR, in order.
pub fn tdtr_keep(points: &[TrackPoint], epsilon_m: f64) -> Vec<usize> {
    let n = points.len();
    if n < 3 {
        return (0..n).collect();
    }
    let mut keep = alloc::vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = alloc::vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let (mut split, mut worst) = (lo, -1.0f64);
        for i in lo + 1..hi {
            let d = synchronized_deviation(&points[i], &points[lo], &points[hi]);
            if d > worst {
                worst = d;
                split = i;
            }
        }
        if worst > epsilon_m {
            keep[split] = true;
            stack.push((split, hi));
            stack.push((lo, split));
        }
    }
    keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect()
}

/// Compressed copy of `t`; SOG of surviving points is left untouched.
pub fn tdtr_compress(t: &Trajectory, cfg: CompressionConfig) -> Trajectory {
    let points = tdtr_keep(&t.points, cfg.epsilon_m).into_iter().map(|i| t.points[i]).collect();
    Trajectory::new(t.mmsi, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mmsi, TimeOfDay};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(min: u16, lat: f64, lon: f64) -> TrackPoint {
        TrackPoint::new(TimeOfDay::from_minutes(min).unwrap(), GeoPoint { lat, lon }, 5.0)
    }

    fn traj(points: Vec<TrackPoint>) -> Trajectory {
        Trajectory::new(Mmsi::new(219000001).unwrap(), points)
    }

    fn cfg(eps: f64) -> CompressionConfig {
        CompressionConfig::new(eps).unwrap()
    }

    /// Brute force: every dropped point against its surviving neighbours.
    fn max_removed_deviation(orig: &[TrackPoint], kept: &[usize]) -> f64 {
        let mut worst: f64 = 0.0;
        for w in kept.windows(2) {
            for i in w[0] + 1..w[1] {
                worst = worst.max(synchronized_deviation(&orig[i], &orig[w[0]], &orig[w[1]]));
            }
        }
        worst
    }

    pub(crate) fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<TrackPoint> {
        let (mut lat, mut lon) = (56.0, 11.0);
        let mut minute = 0u16;
        (0..n)
            .map(|_| {
                let p = pt(minute, lat, lon);
                minute += 5 * rng.random_range(1..=2);
                lat += rng.random_range(-0.01..0.01);
                lon += rng.random_range(-0.015..0.015);
                p
            })
            .collect()
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(CompressionConfig::new(0.0).is_none());
        assert!(CompressionConfig::new(-1.0).is_none());
        assert!(CompressionConfig::new(f64::NAN).is_none());
    }

    #[test]
    fn two_points_unchanged() {
        let t = traj(vec![pt(0, 55.0, 10.0), pt(5, 55.1, 10.1)]);
        assert_eq!(tdtr_compress(&t, cfg(1.0)), t);
    }

    #[test]
    fn short_inputs_unchanged() {
        assert_eq!(tdtr_compress(&traj(vec![]), cfg(1.0)).points.len(), 0);
        assert_eq!(tdtr_compress(&traj(vec![pt(0, 55.0, 10.0)]), cfg(1.0)).points.len(), 1);
    }

    #[test]
    fn constant_velocity_line_keeps_endpoints() {
        let pts: Vec<_> = (0..40).map(|i| pt(i * 5, 55.0 + f64::from(i) * 0.002, 10.0 + f64::from(i) * 0.003)).collect();
        let out = tdtr_compress(&traj(pts.clone()), cfg(0.01));
        assert_eq!(out.points, vec![pts[0], pts[39]]);
    }

    #[test]
    fn deviation_zero_on_path_and_at_start() {
        let a = pt(0, 55.0, 10.0);
        let b = pt(10, 55.2, 10.4);
        assert!(synchronized_deviation(&pt(5, 55.1, 10.2), &a, &b) < 1e-6);
        assert_eq!(synchronized_deviation(&a, &a, &b), 0.0);
    }

    #[test]
    fn deviation_matches_hand_triangle() {
        // a=(55,10) t0, b=(55,10.2) t20, p=(55.01,10.05) t10 -> expected (55,10.1).
        let a = pt(0, 55.0, 10.0);
        let b = pt(20, 55.0, 10.2);
        let p = pt(10, 55.01, 10.05);
        // Haversine from (55.01,10.05) to (55.0,10.1), computed separately: 3376.87 m.
        let d = synchronized_deviation(&p, &a, &b);
        assert!((d - 3376.87).abs() < 0.01, "{d}");
    }

    #[test]
    fn random_walk_fifty_points_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_walk(&mut rng, 50);
        let kept = tdtr_keep(&pts, 1000.0);
        assert!(max_removed_deviation(&pts, &kept) <= 1000.0);
        assert!(kept.len() < pts.len());
    }

    proptest! {
        #[test]
        fn bound_subsequence_monotone_idempotent(seed in any::<u64>(), n in 2usize..120, e1 in 10.0f64..2000.0, e2 in 10.0f64..2000.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_walk(&mut rng, n);
            let kept = tdtr_keep(&pts, e1);
            prop_assert_eq!(kept[0], 0);
            prop_assert_eq!(*kept.last().unwrap(), n - 1);
            prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(max_removed_deviation(&pts, &kept) <= e1);

            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(tdtr_keep(&pts, lo).len() >= tdtr_keep(&pts, hi).len());

            let once = tdtr_compress(&traj(pts.clone()), cfg(e1));
            let twice = tdtr_compress(&once, cfg(e1));
            prop_assert_eq!(once, twice);
        }
    }
}
