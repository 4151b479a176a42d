//! Seeded synthetic data with planted ground truth.
//!
//! Distances are drawn from a double Pareto law made continuous at the
//! separation point, by inverting the closed-form piecewise CDF. Pairs
//! are placed on the sphere at exactly the planted separation, mention
//! timelines are laid out so every exchange qualifies for distance
//! estimation (an adversarial knob injects over-cutoff intervals), and a
//! configurable share of users repeat their position exactly while the
//! rest drift at walking-to-driving speeds.
//!
//! Everything is a pure function of the config: each pair draws from its
//! own ChaCha8 stream (stream = pair index + 1, stream 0 shuffles the
//! final record order), so output does not depend on how generation is
//! scheduled.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geodesy::{destination_point, EarthModel, GeoPoint, GeodesyError};
use crate::ingest::{MentionRecord, RegionFilter};

/// 2014-09-22 00:00:00 UTC; synthetic timelines start here.
pub const SYNTH_EPOCH: i64 = 1_411_344_000;

/// Latest pair start offset, keeping month-scale timelines.
const MAX_START_OFFSET_S: i64 = 2_300_000;

/// Mover step velocity band in km/h. Kept clear of the 2 km/h static
/// boundary so geodesy rounding can never flip a mover to static.
const MOVER_V_MIN_KMH: f64 = 2.5;
const MOVER_V_MAX_KMH: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

/// Planted generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub d_s: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub n_pairs: usize,
    pub exchanges_per_pair: usize,
    /// Share of users whose positions repeat exactly.
    pub static_fraction_target: f64,
    /// Share of exchanges given a reply interval at or over one hour,
    /// which the estimation filter must drop. 0 for the happy path.
    pub long_interval_fraction: f64,
    pub seed: u64,
    /// Box in which each pair's first user is placed uniformly.
    pub region: RegionFilter,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.60,
            gamma2: 6.23,
            d_s: 22.0,
            d_min: 0.1,
            d_max: 1000.0,
            n_pairs: 10_000,
            exchanges_per_pair: 1,
            static_fraction_target: 1.0,
            long_interval_fraction: 0.0,
            seed: 42,
            region: default_region(),
        }
    }
}

pub fn default_region() -> RegionFilter {
    RegionFilter::new("synth-box", 33.7, 34.35, -118.67, -118.15)
        .expect("default box is valid")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |msg: String| Err(SynthError::InvalidConfig(msg));
        if !(self.d_min > 0.0 && self.d_min < self.d_s && self.d_s < self.d_max) {
            return err(format!(
                "need 0 < d_min < d_s < d_max, got {} / {} / {}",
                self.d_min, self.d_s, self.d_max
            ));
        }
        let max_km = EarthModel::default().max_distance_km();
        if !(self.d_max.is_finite() && self.d_max <= max_km) {
            return err(format!("d_max {} exceeds half the circumference {max_km}", self.d_max));
        }
        if !(self.gamma1.is_finite() && self.gamma2.is_finite()) {
            return err("exponents must be finite".into());
        }
        if self.exchanges_per_pair < 1 {
            return err("exchanges_per_pair must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.static_fraction_target) {
            return err(format!(
                "static_fraction_target {} outside [0, 1]",
                self.static_fraction_target
            ));
        }
        if !(0.0..=1.0).contains(&self.long_interval_fraction) {
            return err(format!(
                "long_interval_fraction {} outside [0, 1]",
                self.long_interval_fraction
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Unnormalized mass of t^-gamma over [a, b], with the logarithmic
/// special case at gamma = 1.
fn pareto_mass(a: f64, b: f64, gamma: f64) -> f64 {
    if (gamma - 1.0).abs() < 1e-9 {
        (b / a).ln()
    } else {
        let e = 1.0 - gamma;
        (b.powf(e) - a.powf(e)) / e
    }
}

/// Solve for x with integral of t^-gamma over [a, x] equal to mass.
fn pareto_invert(a: f64, gamma: f64, mass: f64) -> f64 {
    if (gamma - 1.0).abs() < 1e-9 {
        a * mass.exp()
    } else {
        let e = 1.0 - gamma;
        (a.powf(e) + mass * e).powf(1.0 / e)
    }
}

/// Truncated double Pareto density, continuous at the separation point:
/// p(d) proportional to d^-gamma1 on [d_min, d_s) and to
/// d_s^(gamma2-gamma1) * d^-gamma2 on [d_s, d_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleParetoLaw {
    pub gamma1: f64,
    pub gamma2: f64,
    pub d_min: f64,
    pub d_s: f64,
    pub d_max: f64,
    mass1: f64,
    mass2: f64,
    continuity: f64,
}

impl DoubleParetoLaw {
    pub fn new(
        gamma1: f64,
        gamma2: f64,
        d_min: f64,
        d_s: f64,
        d_max: f64,
    ) -> Result<Self, SynthError> {
        if !(d_min > 0.0 && d_min < d_s && d_s < d_max && d_max.is_finite()) {
            return Err(SynthError::InvalidConfig(format!(
                "need 0 < d_min < d_s < d_max, got {d_min} / {d_s} / {d_max}"
            )));
        }
        let continuity = d_s.powf(gamma2 - gamma1);
        let mass1 = pareto_mass(d_min, d_s, gamma1);
        let mass2 = continuity * pareto_mass(d_s, d_max, gamma2);
        if !(mass1.is_finite() && mass2.is_finite() && mass1 > 0.0 && mass2 > 0.0) {
            return Err(SynthError::InvalidConfig(format!(
                "degenerate segment masses {mass1} / {mass2}"
            )));
        }
        Ok(Self {
            gamma1,
            gamma2,
            d_min,
            d_s,
            d_max,
            mass1,
            mass2,
            continuity,
        })
    }

    pub fn from_config(config: &SynthConfig) -> Result<Self, SynthError> {
        Self::new(config.gamma1, config.gamma2, config.d_min, config.d_s, config.d_max)
    }

    /// Probability that a draw lands below the separation point.
    pub fn segment1_probability(&self) -> f64 {
        self.mass1 / (self.mass1 + self.mass2)
    }

    /// Inverse-CDF draw, always inside [d_min, d_max].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let target = u * (self.mass1 + self.mass2);
        let x = if target < self.mass1 {
            pareto_invert(self.d_min, self.gamma1, target)
        } else {
            pareto_invert(self.d_s, self.gamma2, (target - self.mass1) / self.continuity)
        };
        x.clamp(self.d_min, self.d_max)
    }
}

/// One draw from the configured law.
pub fn sample_distance<R: Rng + ?Sized>(
    config: &SynthConfig,
    rng: &mut R,
) -> Result<f64, SynthError> {
    Ok(DoubleParetoLaw::from_config(config)?.sample(rng))
}

/// Ground truth for one generated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPair {
    pub pair_index: usize,
    pub user_a: String,
    pub user_b: String,
    pub planted_km: f64,
}

fn pair_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn user_id(index: usize) -> String {
    format!("u{index:07}")
}

/// The planted per-pair distances, identical to what
/// [`generate_mention_stream`] plants for the same config.
pub fn generate_pairs(config: &SynthConfig) -> Result<Vec<PlantedPair>, SynthError> {
    config.validate()?;
    let law = DoubleParetoLaw::from_config(config)?;
    Ok((0..config.n_pairs)
        .map(|i| {
            let mut rng = pair_rng(config.seed, i as u64 + 1);
            PlantedPair {
                pair_index: i,
                user_a: user_id(2 * i),
                user_b: user_id(2 * i + 1),
                planted_km: law.sample(&mut rng),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Mention records, deterministically shuffled.
    pub records: Vec<MentionRecord>,
    pub truth: Vec<PlantedPair>,
}

/// Positions for one user's sends at the given ascending times: statics
/// stay at `home`, movers step at a uniform velocity in the mover band.
fn walk_positions<R: Rng + ?Sized>(
    rng: &mut R,
    home: GeoPoint,
    times: &[i64],
    is_mover: bool,
    earth: EarthModel,
) -> Result<Vec<GeoPoint>, GeodesyError> {
    let mut positions = Vec::with_capacity(times.len());
    let mut current = home;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 && is_mover {
            let dt_s = t - times[k - 1];
            if dt_s > 0 {
                let v_kmh = rng.random_range(MOVER_V_MIN_KMH..MOVER_V_MAX_KMH);
                let bearing = rng.random_range(0.0..360.0);
                current = destination_point(current, bearing, v_kmh * dt_s as f64 / 3600.0, earth)?;
            }
        }
        positions.push(current);
    }
    Ok(positions)
}

/// Generate the full mention stream plus its ground truth.
pub fn generate_mention_stream(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let law = DoubleParetoLaw::from_config(config)?;
    let earth = EarthModel::default();
    let mover_probability = 1.0 - config.static_fraction_target;

    let mut records = Vec::with_capacity(config.n_pairs * config.exchanges_per_pair * 2);
    let mut truth = Vec::with_capacity(config.n_pairs);

    for i in 0..config.n_pairs {
        let mut rng = pair_rng(config.seed, i as u64 + 1);

        let planted_km = law.sample(&mut rng);
        let home_a = GeoPoint {
            lat: rng.random_range(config.region.lat_min..=config.region.lat_max),
            lon: rng.random_range(config.region.lon_min..=config.region.lon_max),
        };
        let bearing = rng.random_range(0.0..360.0);
        let home_b = destination_point(home_a, bearing, planted_km, earth)?;
        let mover_a = rng.random::<f64>() < mover_probability;
        let mover_b = rng.random::<f64>() < mover_probability;

        let mut t = SYNTH_EPOCH + rng.random_range(0..=MAX_START_OFFSET_S);
        let mut mention_times = Vec::with_capacity(config.exchanges_per_pair);
        let mut reply_times = Vec::with_capacity(config.exchanges_per_pair);
        for _ in 0..config.exchanges_per_pair {
            let long = config.long_interval_fraction > 0.0
                && rng.random::<f64>() < config.long_interval_fraction;
            let interval = if long {
                rng.random_range(3600..=7199)
            } else {
                rng.random_range(1..=3599)
            };
            mention_times.push(t);
            reply_times.push(t + interval);
            t += rng.random_range(600..=3600);
        }
        let mut reply_sorted = reply_times.clone();
        reply_sorted.sort_unstable();

        let positions_a = walk_positions(&mut rng, home_a, &mention_times, mover_a, earth)?;
        let positions_b = walk_positions(&mut rng, home_b, &reply_sorted, mover_b, earth)?;

        let user_a = user_id(2 * i);
        let user_b = user_id(2 * i + 1);
        for (j, &mt) in mention_times.iter().enumerate() {
            let pa = positions_a[j];
            records.push(
                MentionRecord::new(user_a.clone(), user_b.clone(), pa.lat, pa.lon, mt)
                    .expect("generated mention is valid"),
            );
            let rt = reply_times[j];
            let sorted_idx = reply_sorted
                .binary_search(&rt)
                .expect("reply time is present");
            let pb = positions_b[sorted_idx];
            records.push(
                MentionRecord::new(user_b.clone(), user_a.clone(), pb.lat, pb.lon, rt)
                    .expect("generated reply is valid"),
            );
        }

        truth.push(PlantedPair {
            pair_index: i,
            user_a,
            user_b,
            planted_km,
        });
    }

    let mut shuffle_rng = pair_rng(config.seed, 0);
    records.shuffle(&mut shuffle_rng);
    Ok(SynthOutput { records, truth })
}

pub const TRUTH_TABLE_HEADER: &str = "pair_index\tuser_a\tuser_b\tplanted_km";

pub fn write_truth_table(truth: &[PlantedPair]) -> String {
    let mut out = String::from(TRUTH_TABLE_HEADER);
    out.push('\n');
    for p in truth {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.pair_index, p.user_a, p.user_b, p.planted_km
        ));
    }
    out
}
