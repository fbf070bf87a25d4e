//! Encounter detection between resampled trajectories.
//!
//! Two trajectories are in an encounter while their great-circle distance stays under the
//! threshold on their shared 10 Hz ticks. Short interruptions are bridged and only runs long
//! enough to fill the feature window are kept.

mod features;
pub mod io;

use std::collections::HashMap;

pub use features::{
    fit_normalization, to_feature_vector, FeatureConfig, FeatureVector, NormalizationParams, FEATURE_WINDOW,
};
pub use io::{
    read_encounters, read_features, read_labels, read_normalization, write_encounters, write_features, write_labels,
    write_normalization, FeatureRow, GeneratedLabel,
};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::geo::{haversine_m, METERS_PER_DEG_LAT};
use crate::ingest::{tick_of, Trajectory, DEFAULT_RATE_HZ};

/// A time-aligned pair of trajectory segments within proximity.
#[derive(Debug, Clone, PartialEq)]
pub struct Encounter {
    pub id: String,
    pub a: Trajectory,
    pub b: Trajectory,
    pub label: Option<Category>,
}

impl Encounter {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    pub threshold_m: f64,
    pub min_duration_s: f64,
    /// Interruptions shorter than this are bridged.
    pub gap_tolerance_s: f64,
    pub rate_hz: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            threshold_m: 100.0,
            min_duration_s: 5.0,
            gap_tolerance_s: 1.0,
            rate_hz: DEFAULT_RATE_HZ,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_m > 0.0) || !self.threshold_m.is_finite() {
            return Err(Error::validation("threshold_m", "must be positive"));
        }
        if !(self.min_duration_s >= 0.0) {
            return Err(Error::validation("min_duration_s", "must be non-negative"));
        }
        if !(self.gap_tolerance_s >= 0.0) {
            return Err(Error::validation("gap_tolerance_s", "must be non-negative"));
        }
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(Error::validation("rate_hz", "must be positive"));
        }
        Ok(())
    }

    fn min_ticks(&self) -> i64 {
        (self.min_duration_s * self.rate_hz - 1e-9).ceil().max(1.0) as i64
    }

    fn gap_ticks(&self) -> i64 {
        (self.gap_tolerance_s * self.rate_hz).round() as i64
    }
}

/// A resampled trajectory indexed by global tick.
struct Indexed<'a> {
    traj: &'a Trajectory,
    first: i64,
}

impl<'a> Indexed<'a> {
    fn new(traj: &'a Trajectory, rate_hz: f64) -> Result<Self> {
        let Some(first) = traj.points.first() else {
            return Ok(Self { traj, first: 0 });
        };
        let first = tick_of(first.t, rate_hz);
        for (i, p) in traj.points.iter().enumerate() {
            if tick_of(p.t, rate_hz) != first + i as i64 || (p.t * rate_hz - (first + i as i64) as f64).abs() > 1e-6 {
                return Err(Error::Data(format!(
                    "trip {} vehicle {} is not on the uniform {rate_hz} Hz grid; resample first",
                    traj.trip_id, traj.vehicle_id
                )));
            }
        }
        Ok(Self { traj, first })
    }

    fn last(&self) -> i64 {
        self.first + self.traj.len() as i64 - 1
    }

    fn at(&self, tick: i64) -> Option<&crate::ingest::TrajectoryPoint> {
        if tick < self.first {
            return None;
        }
        self.traj.points.get((tick - self.first) as usize)
    }
}

/// Groups sorted close ticks into runs, bridging interruptions shorter than the gap tolerance,
/// then drops runs shorter than the minimum duration. Runs are inclusive tick ranges.
fn runs_from_close_ticks(ticks: &[i64], params: &DetectParams) -> Vec<(i64, i64)> {
    let gap = params.gap_ticks();
    let mut runs = Vec::new();
    let mut iter = ticks.iter().copied();
    let Some(mut start) = iter.next() else {
        return runs;
    };
    let mut end = start;
    for t in iter {
        let missing = t - end - 1;
        if missing == 0 || missing < gap {
            end = t;
        } else {
            runs.push((start, end));
            start = t;
            end = t;
        }
    }
    runs.push((start, end));
    let min = params.min_ticks();
    runs.retain(|&(s, e)| e - s + 1 >= min);
    runs
}

fn pair_key(t: &Trajectory) -> (&str, &str) {
    (t.trip_id.as_str(), t.vehicle_id.as_str())
}

fn build_encounters(a: &Indexed<'_>, b: &Indexed<'_>, close: &[i64], params: &DetectParams) -> Vec<Encounter> {
    // Order the pair so ids are stable regardless of argument order.
    let (a, b) = if pair_key(a.traj) <= pair_key(b.traj) { (a, b) } else { (b, a) };
    runs_from_close_ticks(close, params)
        .into_iter()
        .map(|(s, e)| {
            let seg = |x: &Indexed<'_>| {
                let lo = (s - x.first) as usize;
                let hi = (e - x.first) as usize;
                x.traj.with_points(x.traj.points[lo..=hi].to_vec())
            };
            Encounter {
                id: format!("{}~{}@{}", a.traj.trip_id, b.traj.trip_id, s),
                a: seg(a),
                b: seg(b),
                label: None,
            }
        })
        .collect()
}

/// Detects encounters between two resampled trajectories by scanning every shared tick.
///
/// Trajectories of the same vehicle never form an encounter.
pub fn detect_encounters(a: &Trajectory, b: &Trajectory, params: &DetectParams) -> Result<Vec<Encounter>> {
    params.validate()?;
    if a.vehicle_id == b.vehicle_id {
        return Ok(Vec::new());
    }
    let ia = Indexed::new(a, params.rate_hz)?;
    let ib = Indexed::new(b, params.rate_hz)?;
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let lo = ia.first.max(ib.first);
    let hi = ia.last().min(ib.last());
    let close: Vec<i64> = (lo..=hi)
        .filter(|&t| {
            let (p, q) = (ia.at(t).unwrap(), ib.at(t).unwrap());
            haversine_m(p.position(), q.position()) < params.threshold_m
        })
        .collect();
    Ok(build_encounters(&ia, &ib, &close, params))
}

/// Sort order for encounter lists: trip ids of the pair, then start time.
fn sort_encounters(list: &mut [Encounter]) {
    list.sort_by(|x, y| {
        (x.a.trip_id.as_str(), x.b.trip_id.as_str(), x.a.vehicle_id.as_str(), x.b.vehicle_id.as_str())
            .cmp(&(y.a.trip_id.as_str(), y.b.trip_id.as_str(), y.a.vehicle_id.as_str(), y.b.vehicle_id.as_str()))
            .then(x.a.points[0].t.total_cmp(&y.a.points[0].t))
    });
}

/// Detects encounters among all trajectory pairs by scanning each pair.
pub fn detect_all_pairwise(trajectories: &[Trajectory], params: &DetectParams) -> Result<Vec<Encounter>> {
    let mut out = Vec::new();
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            out.extend(detect_encounters(&trajectories[i], &trajectories[j], params)?);
        }
    }
    sort_encounters(&mut out);
    Ok(out)
}

/// Detects encounters among all trajectories using a per-tick uniform grid.
///
/// At each tick the active vehicles are binned into cells at least one threshold wide, so only
/// vehicles in neighboring cells are compared. The result equals [`detect_all_pairwise`].
pub fn detect_all(trajectories: &[Trajectory], params: &DetectParams) -> Result<Vec<Encounter>> {
    params.validate()?;
    let indexed: Vec<Indexed<'_>> = trajectories
        .iter()
        .map(|t| Indexed::new(t, params.rate_hz))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..indexed.len()).filter(|&i| !indexed[i].traj.is_empty()).collect();
    order.sort_by_key(|&i| (indexed[i].first, i));

    // Cells are widened a little so projection error cannot hide a close pair.
    let lat_cell = params.threshold_m / METERS_PER_DEG_LAT * 1.05;
    let mut close: HashMap<(usize, usize), Vec<i64>> = HashMap::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut tick = order.first().map(|&i| indexed[i].first).unwrap_or(0);

    while next < order.len() || !active.is_empty() {
        if active.is_empty() {
            tick = tick.max(indexed[order[next]].first);
        }
        while next < order.len() && indexed[order[next]].first <= tick {
            active.push(order[next]);
            next += 1;
        }
        active.retain(|&i| indexed[i].last() >= tick);
        if active.len() >= 2 {
            let max_abs_lat = active
                .iter()
                .map(|&i| indexed[i].at(tick).unwrap().lat.abs())
                .fold(0.0f64, f64::max);
            let lon_cell = lat_cell / max_abs_lat.to_radians().cos().max(1e-6);
            grid.clear();
            let cell_of = |i: usize| {
                let p = indexed[i].at(tick).unwrap();
                ((p.lat / lat_cell).floor() as i64, (p.lon / lon_cell).floor() as i64)
            };
            for &i in &active {
                grid.entry(cell_of(i)).or_default().push(i);
            }
            for &i in &active {
                let (cy, cx) = cell_of(i);
                let p = indexed[i].at(tick).unwrap().position();
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(cell) = grid.get(&(cy + dy, cx + dx)) else {
                            continue;
                        };
                        for &j in cell {
                            if j <= i || indexed[i].traj.vehicle_id == indexed[j].traj.vehicle_id {
                                continue;
                            }
                            let q = indexed[j].at(tick).unwrap().position();
                            if haversine_m(p, q) < params.threshold_m {
                                close.entry((i, j)).or_default().push(tick);
                            }
                        }
                    }
                }
            }
        }
        tick += 1;
        if active.is_empty() && next >= order.len() {
            break;
        }
    }

    let mut pairs: Vec<_> = close.into_iter().collect();
    pairs.sort_unstable_by_key(|(k, _)| *k);
    let mut out = Vec::new();
    for ((i, j), ticks) in pairs {
        out.extend(build_encounters(&indexed[i], &indexed[j], &ticks, params));
    }
    sort_encounters(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LatLon, LocalFrame};
    use crate::ingest::TrajectoryPoint;

    /// Straight path at constant speed heading east, offset `north_m` from the origin.
    fn path(id: &str, north_m: f64, speed: f64, start_tick: i64, ticks: usize) -> Trajectory {
        let frame = LocalFrame::new(LatLon::new(42.28, -83.74));
        let points = (0..ticks)
            .map(|i| {
                let t = (start_tick + i as i64) as f64 / 10.0;
                let p = frame.to_geo(speed * i as f64 / 10.0, north_m);
                TrajectoryPoint {
                    t,
                    lat: p.lat,
                    lon: p.lon,
                    speed,
                    heading: 90.0,
                }
            })
            .collect();
        Trajectory::new(id, format!("veh-{id}"), points)
    }

    #[test]
    fn far_parallel_paths_never_meet() {
        let a = path("a", 0.0, 10.0, 0, 100);
        let b = path("b", 500.0, 10.0, 0, 100);
        assert!(detect_encounters(&a, &b, &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn close_parallel_paths_give_one_encounter() {
        let a = path("a", 0.0, 10.0, 0, 100);
        let b = path("b", 50.0, 10.0, 0, 100);
        let found = detect_encounters(&a, &b, &DetectParams::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].len(), 100);
        assert_eq!(found[0].b.len(), 100);
    }

    #[test]
    fn brief_crossing_is_too_short() {
        // b drives west toward a stationary a: within 100 m for 3 s only (60 m/s closing).
        let frame = LocalFrame::new(LatLon::new(42.28, -83.74));
        let a = path("a", 0.0, 0.0, 0, 200);
        let points = (0..200)
            .map(|i| {
                let p = frame.to_geo(600.0 - 66.0 * i as f64 / 10.0, 0.0);
                TrajectoryPoint {
                    t: i as f64 / 10.0,
                    lat: p.lat,
                    lon: p.lon,
                    speed: 66.0,
                    heading: 270.0,
                }
            })
            .collect();
        let b = Trajectory::new("b", "veh-b", points);
        let close = (0..200)
            .filter(|&i| haversine_m(a.points[i].position(), b.points[i].position()) < 100.0)
            .count();
        assert!((29..=31).contains(&close), "{close}");
        assert!(detect_encounters(&a, &b, &DetectParams::default()).unwrap().is_empty());
        let lenient = DetectParams {
            min_duration_s: 2.0,
            ..DetectParams::default()
        };
        assert_eq!(detect_encounters(&a, &b, &lenient).unwrap().len(), 1);
    }

    #[test]
    fn no_temporal_overlap_is_empty() {
        let a = path("a", 0.0, 10.0, 0, 100);
        let b = path("b", 10.0, 10.0, 500, 100);
        assert!(detect_encounters(&a, &b, &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn same_vehicle_is_ignored() {
        let a = path("a", 0.0, 10.0, 0, 100);
        let mut b = path("b", 10.0, 10.0, 0, 100);
        b.vehicle_id = a.vehicle_id.clone();
        assert!(detect_all(&[a, b], &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn short_interruptions_are_bridged() {
        let p = DetectParams::default();
        let ticks: Vec<i64> = (0..30).chain(39..70).collect();
        assert_eq!(runs_from_close_ticks(&ticks, &p), vec![(0, 69)]);
        let ticks: Vec<i64> = (0..60).chain(70..130).collect();
        assert_eq!(runs_from_close_ticks(&ticks, &p), vec![(0, 59), (70, 129)]);
        let ticks: Vec<i64> = (0..49).collect();
        assert!(runs_from_close_ticks(&ticks, &p).is_empty());
    }

    #[test]
    fn requires_uniform_grid() {
        let mut a = path("a", 0.0, 10.0, 0, 10);
        a.points[3].t += 0.05;
        let b = path("b", 0.0, 10.0, 0, 10);
        assert!(matches!(detect_encounters(&a, &b, &DetectParams::default()), Err(Error::Data(_))));
    }

    #[test]
    fn grid_matches_pairwise_on_a_small_log() {
        let trajs = vec![
            path("a", 0.0, 10.0, 0, 100),
            path("b", 50.0, 10.0, 20, 100),
            path("c", 95.0, 10.0, 0, 120),
            path("d", 400.0, 10.0, 0, 100),
        ];
        let p = DetectParams::default();
        let grid = detect_all(&trajs, &p).unwrap();
        assert_eq!(grid, detect_all_pairwise(&trajs, &p).unwrap());
        assert_eq!(grid.len(), 3);
    }
}
