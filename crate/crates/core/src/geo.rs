//! Great-circle distance and a local equirectangular frame.

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of latitude on the spherical Earth.
pub const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Great-circle distance in meters between two points.
pub fn haversine_m(p: LatLon, q: LatLon) -> f64 {
    let phi1 = p.lat.to_radians();
    let phi2 = q.lat.to_radians();
    let dphi = (q.lat - p.lat).to_radians();
    let dlambda = (q.lon - p.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Meters per degree of longitude at the given latitude.
pub fn meters_per_deg_lon(lat: f64) -> f64 {
    METERS_PER_DEG_LAT * lat.to_radians().cos()
}

/// Equirectangular projection around an origin: `x` east, `y` north, both in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: LatLon,
    m_per_deg_lon: f64,
}

impl LocalFrame {
    pub fn new(origin: LatLon) -> Self {
        Self {
            origin,
            m_per_deg_lon: meters_per_deg_lon(origin.lat),
        }
    }

    /// Projects to (east, north) meters.
    pub fn to_local(&self, p: LatLon) -> (f64, f64) {
        (
            (p.lon - self.origin.lon) * self.m_per_deg_lon,
            (p.lat - self.origin.lat) * METERS_PER_DEG_LAT,
        )
    }

    pub fn to_geo(&self, east: f64, north: f64) -> LatLon {
        LatLon {
            lat: self.origin.lat + north / METERS_PER_DEG_LAT,
            lon: self.origin.lon + east / self.m_per_deg_lon,
        }
    }

    pub fn meters_per_deg_lon(&self) -> f64 {
        self.m_per_deg_lon
    }
}
