use crate::error::{Error, Result};
use crate::geo::{LatLon, METERS_PER_DEG_LAT};
use crate::ingest::GeoBBox;

use super::Encounter;

/// Samples per vehicle in a feature vector.
pub const FEATURE_WINDOW: usize = 50;

/// An encounter flattened to `[northA_1, eastA_1, .., northA_T, eastA_T, northB_1, eastB_1, ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Samples per vehicle.
    pub window: usize,
    /// Latitude whose meters-per-degree scale converts longitude offsets to meters.
    pub reference_lat: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let b = GeoBBox::STUDY_AREA;
        Self {
            window: FEATURE_WINDOW,
            reference_lat: (b.lat_min + b.lat_max) / 2.0,
        }
    }
}

impl FeatureConfig {
    pub fn dimension(&self) -> usize {
        4 * self.window
    }
}

/// Linear interpolation of `values` at fractional index `u`, clamped to the last sample.
fn sample_at(values: impl Fn(usize) -> f64, len: usize, u: f64) -> f64 {
    let lo = (u.floor() as usize).min(len - 1);
    let hi = (lo + 1).min(len - 1);
    let w = u - lo as f64;
    if w <= 0.0 || lo == hi {
        values(lo)
    } else {
        values(lo) + w * (values(hi) - values(lo))
    }
}

/// Converts an encounter to its raw (unnormalized) feature vector.
///
/// Positions are expressed in meters relative to the midpoint of the two vehicles' first
/// positions, so the vector does not depend on where on the map the encounter happened.
/// Each vehicle is resampled to `window` points at fractional tick `j * n / window`.
pub fn to_feature_vector(e: &Encounter, config: &FeatureConfig) -> Result<FeatureVector> {
    let n = e.a.len().min(e.b.len());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "encounter {} has {n} sample(s); featurization needs at least 2",
            e.id
        )));
    }
    if e.a.len() != e.b.len() {
        return Err(Error::Data(format!("encounter {} has segments of unequal length", e.id)));
    }
    if config.window == 0 {
        return Err(Error::validation("window", "must be positive"));
    }
    let (pa, pb) = (e.a.points[0], e.b.points[0]);
    let origin = LatLon::new((pa.lat + pb.lat) / 2.0, (pa.lon + pb.lon) / 2.0);
    let lon_scale = METERS_PER_DEG_LAT * config.reference_lat.to_radians().cos();

    let mut out = Vec::with_capacity(config.dimension());
    let step = n as f64 / config.window as f64;
    for traj in [&e.a, &e.b] {
        let pts = &traj.points;
        for j in 0..config.window {
            let u = j as f64 * step;
            let lat = sample_at(|i| pts[i].lat - origin.lat, n, u);
            let lon = sample_at(|i| pts[i].lon - origin.lon, n, u);
            out.push(lat * METERS_PER_DEG_LAT);
            out.push(lon * lon_scale);
        }
    }
    Ok(FeatureVector(out))
}

/// Per-dimension range of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fits per-dimension min/max over the dataset.
pub fn fit_normalization<V: AsRef<[f64]>>(dataset: &[V]) -> Result<NormalizationParams> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::InsufficientData("cannot fit normalization on an empty dataset".into()))?
        .as_ref();
    let mut min = first.to_vec();
    let mut max = first.to_vec();
    for v in &dataset[1..] {
        let v = v.as_ref();
        if v.len() != min.len() {
            return Err(Error::Shape {
                expected: min.len(),
                actual: v.len(),
            });
        }
        for (i, &x) in v.iter().enumerate() {
            min[i] = min[i].min(x);
            max[i] = max[i].max(x);
        }
    }
    if min.iter().chain(&max).any(|x| !x.is_finite()) {
        return Err(Error::Data("non-finite value in feature dataset".into()));
    }
    Ok(NormalizationParams { min, max })
}

impl NormalizationParams {
    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::Shape {
                expected: self.min.len(),
                actual: self.max.len(),
            });
        }
        if self.min.iter().zip(&self.max).any(|(a, b)| !(a <= b)) {
            return Err(Error::validation("normalization", "min must not exceed max"));
        }
        Ok(())
    }

    /// Maps into `[0, 1]`; constant dimensions map to 0.5 and out-of-range values are clamped.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::Shape {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        Ok(x
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi == lo {
                    0.5
                } else {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            })
            .collect())
    }

    /// Inverse of [`apply`](Self::apply) on non-constant dimensions.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dimension() {
            return Err(Error::Shape {
                expected: self.dimension(),
                actual: y.len(),
            });
        }
        Ok(y
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| lo + v * (hi - lo))
            .collect())
    }
}
