//! Static/moving classification of users from their location histories.
//!
//! A user's velocity profile is built from consecutive history samples no
//! further apart than `max_gap_s`: each such pair contributes one segment
//! velocity (great-circle distance over elapsed time), and the profile's
//! mean velocity is the arithmetic mean of segment velocities. Users with
//! a mean below 2 km/h are static; the band is half-open, so exactly
//! 2 km/h classifies as moving.

use crate::geodesy::{great_circle_distance, EarthModel, GeoPoint};
use crate::ingest::LocationSample;

/// Static band upper bound, exclusive.
pub const STATIC_VELOCITY_KMH: f64 = 2.0;

/// Consecutive samples further apart than this contribute no segment.
pub const DEFAULT_MAX_GAP_S: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityMode {
    Static,
    Moving,
    /// No usable segment (fewer than two samples, or all gaps invalid).
    Undetermined,
}

impl std::fmt::Display for MobilityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MobilityMode::Static => "static",
            MobilityMode::Moving => "moving",
            MobilityMode::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityProfile {
    pub user_id: String,
    /// Mean of segment velocities; 0 when there are no segments.
    pub mean_velocity_kmh: f64,
    pub n_segments: usize,
    pub mode: MobilityMode,
}

/// Build one user's profile from their time-sorted history.
///
/// Segments come from consecutive sample pairs with `0 < dt <= max_gap_s`;
/// pairs with identical timestamps contribute nothing.
pub fn velocity_profile(
    user_id: &str,
    history: &[LocationSample],
    max_gap_s: i64,
    earth: EarthModel,
) -> MobilityProfile {
    let mut sum_kmh = 0.0;
    let mut n_segments = 0usize;
    for w in history.windows(2) {
        let dt = w[1].timestamp - w[0].timestamp;
        debug_assert!(dt >= 0, "history must be time-sorted");
        if dt > 0 && dt <= max_gap_s {
            let a = GeoPoint {
                lat: w[0].lat,
                lon: w[0].lon,
            };
            let b = GeoPoint {
                lat: w[1].lat,
                lon: w[1].lon,
            };
            let km = great_circle_distance(a, b, earth);
            sum_kmh += km * 3600.0 / dt as f64;
            n_segments += 1;
        }
    }
    let mean_velocity_kmh = if n_segments > 0 {
        sum_kmh / n_segments as f64
    } else {
        0.0
    };
    MobilityProfile {
        user_id: user_id.to_string(),
        mean_velocity_kmh,
        n_segments,
        mode: classify(n_segments, mean_velocity_kmh),
    }
}

/// Mode is a pure function of segment count and mean velocity; the static
/// band is [0, 2) km/h, half-open.
fn classify(n_segments: usize, mean_velocity_kmh: f64) -> MobilityMode {
    if n_segments == 0 {
        MobilityMode::Undetermined
    } else if mean_velocity_kmh < STATIC_VELOCITY_KMH {
        MobilityMode::Static
    } else {
        MobilityMode::Moving
    }
}

/// Fraction of determined users that are static; 0 when no user is
/// determined.
pub fn static_fraction(profiles: &[MobilityProfile]) -> f64 {
    let determined = profiles
        .iter()
        .filter(|p| p.mode != MobilityMode::Undetermined)
        .count();
    if determined == 0 {
        return 0.0;
    }
    let statics = profiles
        .iter()
        .filter(|p| p.mode == MobilityMode::Static)
        .count();
    statics as f64 / determined as f64
}

pub const MOBILITY_TABLE_HEADER: &str = "user_id\tmean_velocity_kmh\tn_segments\tmode";

pub fn write_mobility_table(profiles: &[MobilityProfile]) -> String {
    let mut out = String::from(MOBILITY_TABLE_HEADER);
    out.push('\n');
    for p in profiles {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.user_id, p.mean_velocity_kmh, p.n_segments, p.mode
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: i64, lat: f64, lon: f64) -> LocationSample {
        LocationSample {
            user_id: "u".into(),
            lat,
            lon,
            timestamp: t,
        }
    }

    // ~0.5 km north of the first point.
    const HALF_KM_LAT: f64 = 0.0044966;

    #[test]
    fn slow_user_is_static() {
        let h = vec![sample(0, 34.0, -118.0), sample(3600, 34.0 + HALF_KM_LAT, -118.0)];
        let p = velocity_profile("u", &h, DEFAULT_MAX_GAP_S, EarthModel::default());
        assert_eq!(p.n_segments, 1);
        assert!((p.mean_velocity_kmh - 0.5).abs() < 0.01, "{}", p.mean_velocity_kmh);
        assert_eq!(p.mode, MobilityMode::Static);
    }

    #[test]
    fn fast_user_is_moving() {
        let h = vec![sample(0, 34.0, -118.0), sample(3600, 34.0 + 20.0 * HALF_KM_LAT, -118.0)];
        let p = velocity_profile("u", &h, DEFAULT_MAX_GAP_S, EarthModel::default());
        assert!((p.mean_velocity_kmh - 10.0).abs() < 0.2, "{}", p.mean_velocity_kmh);
        assert_eq!(p.mode, MobilityMode::Moving);
    }

    #[test]
    fn single_sample_is_undetermined() {
        let p = velocity_profile(
            "u",
            &[sample(0, 34.0, -118.0)],
            DEFAULT_MAX_GAP_S,
            EarthModel::default(),
        );
        assert_eq!(p.mode, MobilityMode::Undetermined);
        assert_eq!(p.n_segments, 0);
        assert_eq!(p.mean_velocity_kmh, 0.0);
    }

    #[test]
    fn zero_dt_contributes_no_segment() {
        let h = vec![sample(100, 34.0, -118.0), sample(100, 35.0, -118.0)];
        let p = velocity_profile("u", &h, DEFAULT_MAX_GAP_S, EarthModel::default());
        assert_eq!(p.n_segments, 0);
        assert_eq!(p.mode, MobilityMode::Undetermined);
    }

    #[test]
    fn wide_gaps_contribute_no_segment() {
        let h = vec![sample(0, 34.0, -118.0), sample(7200, 35.0, -118.0)];
        let p = velocity_profile("u", &h, DEFAULT_MAX_GAP_S, EarthModel::default());
        assert_eq!(p.n_segments, 0);
    }

    #[test]
    fn static_band_is_half_open() {
        assert_eq!(classify(1, 0.0), MobilityMode::Static);
        assert_eq!(classify(1, 1.999999), MobilityMode::Static);
        assert_eq!(classify(1, 2.0), MobilityMode::Moving);
        assert_eq!(classify(1, 25.0), MobilityMode::Moving);
        assert_eq!(classify(0, 0.0), MobilityMode::Undetermined);
    }

    #[test]
    fn fraction_counts_only_determined_profiles() {
        let mk = |mode| MobilityProfile {
            user_id: "u".into(),
            mean_velocity_kmh: 0.0,
            n_segments: if mode == MobilityMode::Undetermined { 0 } else { 1 },
            mode,
        };
        let mut profiles = Vec::new();
        for _ in 0..9 {
            profiles.push(mk(MobilityMode::Static));
        }
        profiles.push(mk(MobilityMode::Moving));
        assert_eq!(static_fraction(&profiles), 0.9);

        profiles.push(mk(MobilityMode::Undetermined));
        assert_eq!(static_fraction(&profiles), 0.9);

        let all_und = vec![mk(MobilityMode::Undetermined)];
        assert_eq!(static_fraction(&all_und), 0.0);
    }

    #[test]
    fn fraction_is_permutation_invariant() {
        let mk = |mode, id: &str| MobilityProfile {
            user_id: id.into(),
            mean_velocity_kmh: 0.0,
            n_segments: 1,
            mode,
        };
        let mut profiles = vec![
            mk(MobilityMode::Static, "a"),
            mk(MobilityMode::Moving, "b"),
            mk(MobilityMode::Static, "c"),
        ];
        let f = static_fraction(&profiles);
        profiles.reverse();
        assert_eq!(static_fraction(&profiles), f);
    }
}
