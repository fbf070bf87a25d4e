//! Trip-log parsing, bounding-box filtering and uniform resampling.
//!
//! The trip-log format is a UTF-8 CSV with the header
//! `trip_id,vehicle_id,t,lat,lon,speed,heading` and one row per GPS sample.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result, RowError};
use crate::geo::LatLon;

pub const TRIP_LOG_HEADER: [&str; 7] = ["trip_id", "vehicle_id", "t", "lat", "lon", "speed", "heading"];

/// Native sampling rate of the GPS logs.
pub const DEFAULT_RATE_HZ: f64 = 10.0;

/// Tolerance used when matching a timestamp to a grid tick.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    /// Seconds.
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    /// Meters per second, non-negative.
    pub speed: f64,
    /// Compass degrees in `[0, 360)`.
    pub heading: f64,
}

impl TrajectoryPoint {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub trip_id: String,
    pub vehicle_id: String,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(trip_id: impl Into<String>, vehicle_id: impl Into<String>, points: Vec<TrajectoryPoint>) -> Self {
        Self {
            trip_id: trip_id.into(),
            vehicle_id: vehicle_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same identity, different samples.
    pub fn with_points(&self, points: Vec<TrajectoryPoint>) -> Self {
        Self {
            trip_id: self.trip_id.clone(),
            vehicle_id: self.vehicle_id.clone(),
            points,
        }
    }
}

/// Index of the sampling tick nearest to `t` on the global grid of step `1/rate_hz`.
pub fn tick_of(t: f64, rate_hz: f64) -> i64 {
    (t * rate_hz).round() as i64
}

/// Closed latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBBox {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl GeoBBox {
    /// The Ann Arbor study area.
    pub const STUDY_AREA: GeoBBox = GeoBBox {
        lon_min: -83.82,
        lon_max: -83.64,
        lat_min: 42.22,
        lat_max: 42.34,
    };

    pub fn new(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self> {
        let b = Self {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lon_min < self.lon_max) {
            return Err(Error::validation("bbox.lon", "lon_min must be < lon_max"));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(Error::validation("bbox.lat", "lat_min must be < lat_max"));
        }
        Ok(())
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }
}

impl Default for GeoBBox {
    fn default() -> Self {
        Self::STUDY_AREA
    }
}

/// Result of reading a trip log: the trajectories plus rows that were skipped.
#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub trajectories: Vec<Trajectory>,
    pub skipped: Vec<RowError>,
}

/// Parses a trip log. Trajectories come out in order of first appearance, points sorted by time.
///
/// Malformed rows are skipped and reported; with `strict` the first one aborts the parse.
pub fn parse_trip_log<R: Read>(input: R, strict: bool) -> Result<ParsedLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Format("missing trip-log header".into()));
    }
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(TRIP_LOG_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("trip-log header lacks column {name:?}")))?;
    }

    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut skipped = Vec::new();

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                let err = RowError {
                    line,
                    message: e.to_string(),
                };
                if strict {
                    return Err(Error::Rows(vec![err]));
                }
                skipped.push(err);
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record, &columns) {
            Ok((trip, vehicle, point)) => {
                let key = (trip, vehicle);
                let slot = match index.get(&key) {
                    Some(&i) => i,
                    None => {
                        trajectories.push(Trajectory::new(key.0.clone(), key.1.clone(), Vec::new()));
                        index.insert(key, trajectories.len() - 1);
                        trajectories.len() - 1
                    }
                };
                trajectories[slot].points.push(point);
            }
            Err(message) => {
                let err = RowError { line, message };
                if strict {
                    return Err(Error::Rows(vec![err]));
                }
                skipped.push(err);
            }
        }
    }

    for traj in &mut trajectories {
        traj.points.sort_by(|a, b| a.t.total_cmp(&b.t));
        let before = traj.points.len();
        traj.points.dedup_by(|b, a| a.t == b.t);
        if traj.points.len() != before {
            let err = RowError {
                line: 0,
                message: format!(
                    "{} duplicate timestamp(s) dropped in trip {} vehicle {}",
                    before - traj.points.len(),
                    traj.trip_id,
                    traj.vehicle_id
                ),
            };
            if strict {
                return Err(Error::Rows(vec![err]));
            }
            skipped.push(err);
        }
    }

    Ok(ParsedLog { trajectories, skipped })
}

fn parse_row(record: &csv::StringRecord, columns: &[usize; 7]) -> std::result::Result<(String, String, TrajectoryPoint), String> {
    let field = |i: usize| record.get(columns[i]).ok_or_else(|| format!("missing field {:?}", TRIP_LOG_HEADER[i]));
    let number = |i: usize| -> std::result::Result<f64, String> {
        let raw = field(i)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("field {:?} is not numeric: {raw:?}", TRIP_LOG_HEADER[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("field {:?} is not finite", TRIP_LOG_HEADER[i]))
        }
    };
    let trip = field(0)?.to_string();
    let vehicle = field(1)?.to_string();
    if trip.is_empty() || vehicle.is_empty() {
        return Err("empty trip_id or vehicle_id".into());
    }
    let point = TrajectoryPoint {
        t: number(2)?,
        lat: number(3)?,
        lon: number(4)?,
        speed: number(5)?,
        heading: number(6)?,
    };
    if !(-90.0..=90.0).contains(&point.lat) {
        return Err(format!("latitude {} outside [-90, 90]", point.lat));
    }
    if !(-180.0..=180.0).contains(&point.lon) {
        return Err(format!("longitude {} outside [-180, 180]", point.lon));
    }
    if point.speed < 0.0 {
        return Err(format!("negative speed {}", point.speed));
    }
    if !(0.0..360.0).contains(&point.heading) {
        return Err(format!("heading {} outside [0, 360)", point.heading));
    }
    Ok((trip, vehicle, point))
}

/// Writes trajectories in the trip-log format, one row per sample.
pub fn write_trip_log<W: Write>(output: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(TRIP_LOG_HEADER)?;
    for traj in trajectories {
        for p in &traj.points {
            writer.write_record([
                traj.trip_id.as_str(),
                traj.vehicle_id.as_str(),
                &p.t.to_string(),
                &p.lat.to_string(),
                &p.lon.to_string(),
                &p.speed.to_string(),
                &p.heading.to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Keeps the points inside the closed box, in their original order.
pub fn filter_bbox(traj: &Trajectory, bbox: &GeoBBox) -> Trajectory {
    traj.with_points(
        traj.points
            .iter()
            .filter(|p| bbox.contains(p.position()))
            .copied()
            .collect(),
    )
}

/// Splits a trajectory wherever consecutive samples are more than `max_gap_s` apart.
pub fn split_on_gaps(traj: &Trajectory, max_gap_s: f64) -> Vec<Trajectory> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=traj.points.len() {
        let boundary = i == traj.points.len() || traj.points[i].t - traj.points[i - 1].t > max_gap_s + TIME_EPS;
        if boundary {
            if i > start {
                out.push(traj.with_points(traj.points[start..i].to_vec()));
            }
            start = i;
        }
    }
    out
}

/// Signed shortest-arc difference `to - from` in degrees, in `[-180, 180)`.
pub fn heading_delta(from: f64, to: f64) -> f64 {
    (to - from + 540.0).rem_euclid(360.0) - 180.0
}

/// Interpolates between two samples; headings follow the shortest arc.
fn lerp_point(a: &TrajectoryPoint, b: &TrajectoryPoint, t: f64) -> TrajectoryPoint {
    let w = (t - a.t) / (b.t - a.t);
    let lin = |x: f64, y: f64| x + w * (y - x);
    TrajectoryPoint {
        t,
        lat: lin(a.lat, b.lat),
        lon: lin(a.lon, b.lon),
        speed: lin(a.speed, b.speed),
        heading: (a.heading + w * heading_delta(a.heading, b.heading)).rem_euclid(360.0),
    }
}

/// Resamples onto the grid `t_first + i / rate_hz`.
///
/// The grid covers `[t_first, t_last]`; when the span is not a whole number of steps the grid
/// stops at the last full step. Grid instants that coincide with an input sample copy it exactly.
pub fn resample_uniform(traj: &Trajectory, rate_hz: f64) -> Result<Trajectory> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::validation("rate_hz", "must be a positive finite number"));
    }
    if traj.points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "resampling trip {} vehicle {} needs at least 2 points, got {}",
            traj.trip_id,
            traj.vehicle_id,
            traj.points.len()
        )));
    }
    let first = traj.points[0].t;
    let last = traj.points[traj.points.len() - 1].t;
    let steps = ((last - first) * rate_hz + TIME_EPS).floor() as usize;
    let times = (0..=steps).map(|i| {
        let t = first + i as f64 / rate_hz;
        if i == steps && (t - last).abs() < TIME_EPS {
            last
        } else {
            t
        }
    });
    Ok(traj.with_points(interpolate_at(traj, times)))
}

/// Resamples onto the global tick grid `k / rate_hz` for every whole tick `k` inside
/// `[t_first, t_last]`, so independently recorded trajectories share timestamps.
pub fn resample_on_ticks(traj: &Trajectory, rate_hz: f64) -> Result<Trajectory> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::validation("rate_hz", "must be a positive finite number"));
    }
    let (Some(a), Some(b)) = (traj.points.first(), traj.points.last()) else {
        return Ok(traj.with_points(Vec::new()));
    };
    let lo = (a.t * rate_hz - TIME_EPS * rate_hz).ceil() as i64;
    let hi = (b.t * rate_hz + TIME_EPS * rate_hz).floor() as i64;
    if traj.points.len() == 1 {
        let p = (lo == hi).then(|| TrajectoryPoint { t: lo as f64 / rate_hz, ..*a });
        return Ok(traj.with_points(p.into_iter().collect()));
    }
    Ok(traj.with_points(interpolate_at(traj, (lo..=hi).map(|k| k as f64 / rate_hz))))
}

/// Interpolates `traj` (at least two points) at non-decreasing times within its span.
fn interpolate_at(traj: &Trajectory, times: impl Iterator<Item = f64>) -> Vec<TrajectoryPoint> {
    let mut out = Vec::new();
    let mut seg = 0;
    for t in times {
        while seg + 2 < traj.points.len() && traj.points[seg + 1].t <= t + TIME_EPS {
            seg += 1;
        }
        let (a, b) = (&traj.points[seg], &traj.points[seg + 1]);
        let p = if (t - a.t).abs() < TIME_EPS {
            TrajectoryPoint { t, ..*a }
        } else if (t - b.t).abs() < TIME_EPS {
            TrajectoryPoint { t, ..*b }
        } else {
            lerp_point(a, b, t)
        };
        out.push(p);
    }
    out
}
