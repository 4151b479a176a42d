//! Great-circle geometry on a spherical Earth.
//!
//! Distances use the spherical law of cosines. For very small central
//! angles the law of cosines is ill-conditioned in f64 (the cosine of the
//! angle saturates at 1), so the implementation switches to the haversine
//! form once the cosine argument exceeds `1 - 1e-12`, which keeps results
//! well-conditioned down to around one meter of separation.
//!
//! All angles are degrees at the API boundary and radians internally.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in kilometers, used unless a caller supplies its own.
pub const MEAN_EARTH_RADIUS_KM: f64 = 6371.0;

/// Above this cosine-of-central-angle, fall back to the haversine form.
const SMALL_ANGLE_COS: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} out of range (-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("distance {distance_km} km outside [0, {max_km}] for this earth model")]
    DistanceOutOfRange { distance_km: f64, max_km: f64 },
}

/// A point on the sphere, in degrees. Longitude is normalized to (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::LatitudeOutOfRange(lat));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(GeodesyError::LongitudeOutOfRange(lon));
        }
        Ok(Self { lat, lon })
    }
}

/// Spherical Earth with a configurable radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius_km: f64,
}

impl EarthModel {
    pub fn new(radius_km: f64) -> Self {
        assert!(radius_km > 0.0, "earth radius must be positive");
        Self { radius_km }
    }

    /// Longest possible surface distance (half the circumference).
    pub fn max_distance_km(&self) -> f64 {
        PI * self.radius_km
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius_km: MEAN_EARTH_RADIUS_KM,
        }
    }
}

/// Shortest surface distance between two points, in kilometers.
///
/// Bit-for-bit symmetric in its arguments: both formulas are written in
/// terms of |Δlat| and |Δlon| and commutative products only.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> f64 {
    let phi_a = a.lat.to_radians();
    let phi_b = b.lat.to_radians();
    let d_lon = (a.lon - b.lon).abs().to_radians();
    let cos_arg = phi_a.sin() * phi_b.sin() + phi_a.cos() * phi_b.cos() * d_lon.cos();
    if cos_arg > SMALL_ANGLE_COS {
        haversine(a, b, earth)
    } else {
        earth.radius_km * cos_arg.clamp(-1.0, 1.0).acos()
    }
}

fn haversine(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> f64 {
    let half_d_lat = ((a.lat - b.lat).abs() / 2.0).to_radians();
    let half_d_lon = ((a.lon - b.lon).abs() / 2.0).to_radians();
    let h = half_d_lat.sin().powi(2)
        + a.lat.to_radians().cos() * b.lat.to_radians().cos() * half_d_lon.sin().powi(2);
    2.0 * earth.radius_km * h.sqrt().min(1.0).asin()
}

/// Point reached by traveling `distance_km` from `origin` along the
/// initial bearing `bearing_deg` (degrees clockwise from north).
///
/// The bearing is taken modulo 360. Fails if the distance is negative or
/// exceeds half the circumference.
pub fn destination_point(
    origin: GeoPoint,
    bearing_deg: f64,
    distance_km: f64,
    earth: EarthModel,
) -> Result<GeoPoint, GeodesyError> {
    let max_km = earth.max_distance_km();
    if !(0.0..=max_km).contains(&distance_km) {
        return Err(GeodesyError::DistanceOutOfRange {
            distance_km,
            max_km,
        });
    }
    let delta = distance_km / earth.radius_km;
    let theta = bearing_deg.rem_euclid(360.0).to_radians();
    let phi = origin.lat.to_radians();
    let lam = origin.lon.to_radians();

    let sin_phi2 = (phi.sin() * delta.cos() + phi.cos() * delta.sin() * theta.cos()).clamp(-1.0, 1.0);
    let phi2 = sin_phi2.asin();
    let lam2 = lam
        + (theta.sin() * delta.sin() * phi.cos()).atan2(delta.cos() - phi.sin() * sin_phi2);

    Ok(GeoPoint {
        lat: phi2.to_degrees().clamp(-90.0, 90.0),
        lon: normalize_lon(lam2.to_degrees()),
    })
}

/// Wrap a longitude in degrees into (-180, 180].
fn normalize_lon(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0); // [0, 360)
    if l == 0.0 {
        l = 360.0;
    }
    l - 180.0
}
