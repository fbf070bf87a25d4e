//! Labeled synthetic two-vehicle encounters.
//!
//! Each category has a fixed geometry in a local east/north frame around the scenario anchor:
//!
//! * intersection: perpendicular straight paths crossing at the anchor
//! * opposite direction: antiparallel paths on one line, meeting mid-window
//! * bypass: a stationary or slow vehicle passed at 10-30 m lateral offset
//! * same road: leader and follower 10-50 m apart, optionally with a lane change
//! * merge: one path joins the other at 10-30 degrees
//!
//! Road directions are drawn near the four compass points. Positions get independent Gaussian
//! noise and are converted to latitude/longitude with an equirectangular projection.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::category::Category;
use crate::encounter::Encounter;
use crate::error::{Error, Result};
use crate::geo::{LatLon, LocalFrame};
use crate::ingest::{GeoBBox, Trajectory, TrajectoryPoint, DEFAULT_RATE_HZ};
use crate::seed::{derive_seed, rng};

/// Shortest scenario that still fills the 50-sample feature window.
pub const MIN_DURATION_S: f64 = 5.0;

/// Inclusive speed interval in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRange {
    pub min: f64,
    pub max: f64,
}

impl SpeedRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub category: Category,
    pub duration_s: f64,
    /// Speed ranges for vehicle a and vehicle b.
    pub speed_range_mps: [SpeedRange; 2],
    /// Standard deviation of the per-axis position noise, meters.
    pub gps_noise_m: f64,
    pub anchor: LatLon,
    /// Time of the first sample, seconds.
    pub start_time_s: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// A scenario with the category's default speeds, 10 s long, 2 m noise, anchored at the
    /// center of the study area.
    pub fn new(category: Category, seed: u64) -> Self {
        let speeds = match category {
            Category::Intersection => [SpeedRange::new(8.0, 14.0); 2],
            Category::OppositeDirection => [SpeedRange::new(8.0, 14.0); 2],
            Category::Bypass => [SpeedRange::new(0.0, 2.0), SpeedRange::new(8.0, 14.0)],
            Category::SameRoad => [SpeedRange::new(8.0, 14.0); 2],
            Category::Merge => [SpeedRange::new(8.0, 14.0); 2],
        };
        let b = GeoBBox::STUDY_AREA;
        Self {
            category,
            duration_s: 10.0,
            speed_range_mps: speeds,
            gps_noise_m: 2.0,
            anchor: LatLon::new((b.lat_min + b.lat_max) / 2.0, (b.lon_min + b.lon_max) / 2.0),
            start_time_s: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= MIN_DURATION_S) || !self.duration_s.is_finite() {
            return Err(Error::validation(
                "duration_s",
                format!("must be at least {MIN_DURATION_S} s, got {}", self.duration_s),
            ));
        }
        for (i, r) in self.speed_range_mps.iter().enumerate() {
            if !(r.min >= 0.0) || !(r.min <= r.max) || !r.max.is_finite() {
                return Err(Error::validation(
                    "speed_range_mps",
                    format!("vehicle {} range ({}, {}) must satisfy 0 <= min <= max", i, r.min, r.max),
                ));
            }
        }
        if !(self.gps_noise_m >= 0.0) || !self.gps_noise_m.is_finite() {
            return Err(Error::validation("gps_noise_m", "must be finite and non-negative"));
        }
        if !GeoBBox::STUDY_AREA.contains(self.anchor) {
            return Err(Error::validation(
                "anchor",
                format!("({}, {}) lies outside the study area", self.anchor.lat, self.anchor.lon),
            ));
        }
        if !self.start_time_s.is_finite() {
            return Err(Error::validation("start_time_s", "must be finite"));
        }
        Ok(())
    }
}

/// One vehicle's motion as a function of scenario-relative time.
#[derive(Debug, Clone, Copy)]
struct Sample {
    east: f64,
    north: f64,
    speed: f64,
    heading: f64,
}

/// Unit (east, north) vector for a compass heading in degrees.
fn direction(heading_deg: f64) -> (f64, f64) {
    let r = heading_deg.to_radians();
    (r.sin(), r.cos())
}

fn compass(h: f64) -> f64 {
    h.rem_euclid(360.0)
}

/// Straight-line motion through `through` (east, north) at time `t_pass`.
fn straight(heading: f64, speed: f64, through: (f64, f64), t_pass: f64, t: f64) -> Sample {
    let (de, dn) = direction(heading);
    let s = speed * (t - t_pass);
    Sample {
        east: through.0 + de * s,
        north: through.1 + dn * s,
        speed,
        heading: compass(heading),
    }
}

/// Road direction near one of the four compass points, on a 1/256 degree lattice so that
/// adding 90 or 180 degrees is exact.
fn road_heading(rng: &mut ChaCha8Rng) -> f64 {
    let cardinal = rng.random_range(0..4u32) as f64 * 90.0;
    let jitter = rng.random_range(-2560i32..=2560) as f64 / 256.0;
    compass(cardinal + jitter)
}

type Motion = Box<dyn Fn(f64) -> Sample>;

fn scenario_motion(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> (Motion, Motion) {
    let d = spec.duration_s;
    let mid = d / 2.0;
    let heading = road_heading(rng);
    let va = spec.speed_range_mps[0].sample(rng);
    let vb = spec.speed_range_mps[1].sample(rng);
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (de, dn) = direction(heading);
    // Unit normal pointing to the chosen side of the road.
    let normal = (dn * side, -de * side);

    match spec.category {
        Category::Intersection => {
            let ta = mid + rng.random_range(-1.0..=1.0);
            let tb = mid + rng.random_range(-1.0..=1.0);
            let hb = compass(heading + 90.0 * side);
            (
                Box::new(move |t| straight(heading, va, (0.0, 0.0), ta, t)),
                Box::new(move |t| straight(hb, vb, (0.0, 0.0), tb, t)),
            )
        }
        Category::OppositeDirection => {
            let tm = mid + rng.random_range(-1.0..=1.0);
            let hb = compass(heading + 180.0);
            (
                Box::new(move |t| straight(heading, va, (0.0, 0.0), tm, t)),
                Box::new(move |t| straight(hb, vb, (0.0, 0.0), tm, t)),
            )
        }
        Category::Bypass => {
            let offset = rng.random_range(10.0..=30.0);
            let tp = mid + rng.random_range(-1.0..=1.0);
            let lane = (normal.0 * offset, normal.1 * offset);
            (
                Box::new(move |t| straight(heading, va, (0.0, 0.0), mid, t)),
                Box::new(move |t| straight(heading, vb, lane, tp, t)),
            )
        }
        Category::SameRoad => {
            let gap = rng.random_range(10.0..=50.0);
            let vb = (va + rng.random_range(-1.0..=1.0)).max(0.0);
            let lane_change = rng.random_bool(0.5);
            let lc_start = rng.random_range(0.0..=(d - 4.0).max(0.0));
            let lc_len = 4.0f64.min(d);
            let lead = (de * gap / 2.0, dn * gap / 2.0);
            let follow = (-de * gap / 2.0, -dn * gap / 2.0);
            (
                Box::new(move |t| straight(heading, va, lead, mid, t)),
                Box::new(move |t| {
                    let mut s = straight(heading, vb, follow, mid, t);
                    if lane_change {
                        let u = ((t - lc_start) / lc_len).clamp(0.0, 1.0);
                        let lateral = 3.5 * (1.0 - (PI * u).cos()) / 2.0;
                        s.east += normal.0 * lateral;
                        s.north += normal.1 * lateral;
                    }
                    s
                }),
            )
        }
        Category::Merge => {
            let angle = rng.random_range(10.0..=30.0);
            let tm = mid + rng.random_range(-1.0..=1.0);
            let lead_gap = rng.random_range(15.0..=40.0);
            let approach = compass(heading - angle * side);
            // Vehicle a passes the merge point ahead of b.
            let ta = tm - lead_gap / va.max(1.0);
            (
                Box::new(move |t| straight(heading, va, (0.0, 0.0), ta, t)),
                Box::new(move |t| {
                    if t < tm {
                        straight(approach, vb, (0.0, 0.0), tm, t)
                    } else {
                        straight(heading, vb, (0.0, 0.0), tm, t)
                    }
                }),
            )
        }
    }
}

/// Generates one labeled encounter sampled at 10 Hz.
pub fn generate_encounter(spec: &ScenarioSpec, id: &str) -> Result<Encounter> {
    spec.validate()?;
    let mut rng = rng(spec.seed);
    let (motion_a, motion_b) = scenario_motion(spec, &mut rng);
    let frame = LocalFrame::new(spec.anchor);
    let noise = if spec.gps_noise_m > 0.0 {
        Some(Normal::new(0.0, spec.gps_noise_m).expect("validated noise"))
    } else {
        None
    };

    let n = (spec.duration_s * DEFAULT_RATE_HZ + 1e-9).floor() as usize + 1;
    let sample = |motion: &Motion, rng: &mut ChaCha8Rng| -> Vec<TrajectoryPoint> {
        (0..n)
            .map(|i| {
                let rel = i as f64 / DEFAULT_RATE_HZ;
                let s = motion(rel);
                let (mut e, mut nn) = (s.east, s.north);
                if let Some(dist) = &noise {
                    e += dist.sample(rng);
                    nn += dist.sample(rng);
                }
                let p = frame.to_geo(e, nn);
                TrajectoryPoint {
                    t: spec.start_time_s + rel,
                    lat: p.lat,
                    lon: p.lon,
                    speed: s.speed,
                    heading: s.heading,
                }
            })
            .collect()
    };
    let a = sample(&motion_a, &mut rng);
    let b = sample(&motion_b, &mut rng);
    Ok(Encounter {
        id: id.to_string(),
        a: Trajectory::new(format!("{id}-a"), format!("veh-{id}-a"), a),
        b: Trajectory::new(format!("{id}-b"), format!("veh-{id}-b"), b),
        label: Some(spec.category),
    })
}

/// Settings shared by every encounter of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub duration_s: f64,
    pub gps_noise_m: f64,
    /// Anchors are drawn uniformly inside this box, shrunk by `anchor_margin_deg`.
    pub bbox: GeoBBox,
    pub anchor_margin_deg: f64,
    /// Idle time between consecutive encounters on the shared clock.
    pub spacing_s: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            gps_noise_m: 2.0,
            bbox: GeoBBox::STUDY_AREA,
            anchor_margin_deg: 0.01,
            spacing_s: 20.0,
        }
    }
}

/// Generates `counts[c]` encounters of each category, in category order.
///
/// Encounter `i` gets seed `derive_seed(base_seed, i)` and starts at
/// `i * (duration_s + spacing_s)` so encounters never overlap in time.
pub fn generate_dataset(
    counts: &BTreeMap<Category, usize>,
    base_seed: u64,
    options: &DatasetOptions,
) -> Result<Vec<Encounter>> {
    options.bbox.validate()?;
    let specs: Vec<(Category, usize)> = counts
        .iter()
        .flat_map(|(&c, &n)| std::iter::repeat_n(c, n))
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let b = &options.bbox;
    let m = options.anchor_margin_deg;
    if b.lat_max - b.lat_min <= 2.0 * m || b.lon_max - b.lon_min <= 2.0 * m {
        return Err(Error::validation("anchor_margin_deg", "margin leaves no room inside the box"));
    }
    specs
        .par_iter()
        .map(|&(category, i)| {
            let seed = derive_seed(base_seed, i as u64);
            let mut anchor_rng = rng(derive_seed(seed, 0xA11C));
            let anchor = LatLon::new(
                anchor_rng.random_range(b.lat_min + m..=b.lat_max - m),
                anchor_rng.random_range(b.lon_min + m..=b.lon_max - m),
            );
            let mut spec = ScenarioSpec::new(category, seed);
            spec.duration_s = options.duration_s;
            spec.gps_noise_m = options.gps_noise_m;
            spec.anchor = anchor;
            spec.start_time_s = i as f64 * (options.duration_s + options.spacing_s);
            generate_encounter(&spec, &format!("enc{i:05}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_m;

    fn min_distance(e: &Encounter) -> f64 {
        e.a.points
            .iter()
            .zip(&e.b.points)
            .map(|(p, q)| haversine_m(p.position(), q.position()))
            .fold(f64::INFINITY, f64::min)
    }

    fn noiseless(category: Category, seed: u64) -> ScenarioSpec {
        let mut s = ScenarioSpec::new(category, seed);
        s.gps_noise_m = 0.0;
        s
    }

    #[test]
    fn intersection_paths_are_perpendicular() {
        let e = generate_encounter(&noiseless(Category::Intersection, 7), "x").unwrap();
        assert!(min_distance(&e) < 100.0);
        let ha = e.a.points[0].heading;
        let hb = e.b.points[0].heading;
        let diff = crate::ingest::heading_delta(ha, hb).abs();
        assert_eq!(diff, 90.0);
        assert_eq!(e.label, Some(Category::Intersection));
    }

    #[test]
    fn opposite_direction_headings_differ_by_180() {
        for seed in [7, 8, 9, 10] {
            let e = generate_encounter(&noiseless(Category::OppositeDirection, seed), "x").unwrap();
            let ha = e.a.points[0].heading;
            for (p, q) in e.a.points.iter().zip(&e.b.points) {
                assert_eq!(p.heading, ha);
                assert_eq!((q.heading - p.heading).abs(), 180.0);
            }
            assert!(min_distance(&e) < 100.0);
        }
    }

    #[test]
    fn bypass_with_stationary_vehicle() {
        let mut spec = noiseless(Category::Bypass, 7);
        spec.speed_range_mps = [SpeedRange::fixed(0.0), SpeedRange::fixed(10.0)];
        let e = generate_encounter(&spec, "x").unwrap();
        let first = e.a.points[0];
        assert!(e.a.points.iter().all(|p| p.lat == first.lat && p.lon == first.lon));
        let moved = haversine_m(e.b.points[0].position(), e.b.points.last().unwrap().position());
        assert!((moved - 100.0).abs() < 0.5, "{moved}");
        assert!(min_distance(&e) <= 31.0);
    }

    #[test]
    fn every_category_meets_the_proximity_rule() {
        for c in Category::ALL {
            for seed in 0..20 {
                let e = generate_encounter(&ScenarioSpec::new(c, seed), "x").unwrap();
                assert!(e.a.len() >= 50 && e.a.len() == e.b.len());
                assert!(min_distance(&e) < 100.0, "{c} seed {seed}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ScenarioSpec::new(Category::SameRoad, 42);
        assert_eq!(generate_encounter(&spec, "x").unwrap(), generate_encounter(&spec, "x").unwrap());
    }

    #[test]
    fn validation_names_the_field() {
        let mut spec = ScenarioSpec::new(Category::Merge, 1);
        spec.duration_s = 4.0;
        assert!(matches!(generate_encounter(&spec, "x"), Err(Error::Validation { field, .. }) if field == "duration_s"));
        let mut spec = ScenarioSpec::new(Category::Merge, 1);
        spec.speed_range_mps[1] = SpeedRange::new(5.0, 1.0);
        assert!(matches!(generate_encounter(&spec, "x"), Err(Error::Validation { field, .. }) if field == "speed_range_mps"));
        let mut spec = ScenarioSpec::new(Category::Merge, 1);
        spec.anchor = LatLon::new(40.0, -83.7);
        assert!(matches!(generate_encounter(&spec, "x"), Err(Error::Validation { field, .. }) if field == "anchor"));
        let mut spec = ScenarioSpec::new(Category::Merge, 1);
        spec.gps_noise_m = -1.0;
        assert!(matches!(generate_encounter(&spec, "x"), Err(Error::Validation { field, .. }) if field == "gps_noise_m"));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let opts = DatasetOptions::default();
        let zero: BTreeMap<_, _> = Category::ALL[..4].iter().map(|&c| (c, 0)).collect();
        assert!(generate_dataset(&zero, 1, &opts).unwrap().is_empty());

        let counts: BTreeMap<_, _> = Category::ALL[..4].iter().map(|&c| (c, 200)).collect();
        let first = generate_dataset(&counts, 1, &opts).unwrap();
        assert_eq!(first.len(), 800);
        for c in &Category::ALL[..4] {
            assert_eq!(first.iter().filter(|e| e.label == Some(*c)).count(), 200);
        }
        assert_eq!(first, generate_dataset(&counts, 1, &opts).unwrap());
    }

    #[test]
    fn dataset_seed_changes_coordinates() {
        let opts = DatasetOptions::default();
        let one = BTreeMap::from([(Category::Intersection, 1)]);
        let a = generate_dataset(&one, 1, &opts).unwrap();
        let b = generate_dataset(&one, 2, &opts).unwrap();
        assert_ne!(a[0].a.points, b[0].a.points);
    }
}
