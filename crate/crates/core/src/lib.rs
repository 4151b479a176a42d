//! Extraction of bidirectional friendships from geo-tagged mention streams,
//! two-stage estimation of inter-friend geographic distances, and double
//! power-law fitting of the resulting distance distribution.
//!
//! The pipeline is organized as small composable stages:
//!
//! * [`ingest`] — parse and validate newline-delimited mention records,
//!   filter by region, build per-user location histories.
//! * [`geodesy`] — great-circle distance and destination-point math on a
//!   spherical Earth.
//! * [`friendship`] — detect bidirectional friend pairs, match mentions
//!   with replies, and estimate per-pair distances.
//! * [`mobility`] — classify users as static or moving from their
//!   location histories.
//! * [`distfit`] — log-binned distance distributions and single/double
//!   power-law fits with breakpoint detection.
//! * [`synth`] — seeded generator of mention streams with planted
//!   double-Pareto distances, used to verify the whole pipeline.
//! * [`plot`] — SVG log-log rendering of a binned distribution and its fit.

pub mod distfit;
pub mod friendship;
pub mod geodesy;
pub mod ingest;
pub mod mobility;
pub mod plot;
pub mod synth;

pub use distfit::{
    fit_double_power_law, fit_single_power_law, log_bin, model_selection, BinnedDistribution,
    DoublePowerLawFit, FitConfig, FitError, FitReport, ModelChoice, PowerLawSegment,
};
pub use friendship::{
    build_friendship_distances, detect_friend_pairs, estimate_pair_distance, pair_exchanges,
    ExchangeEvent, FriendPair, FriendshipConfig,
};
pub use geodesy::{
    destination_point, great_circle_distance, EarthModel, GeoPoint, GeodesyError,
    MEAN_EARTH_RADIUS_KM,
};
pub use ingest::{
    build_location_history, filter_region, parse_mention_line, read_mentions,
    read_mentions_from_path, IngestBatch, LineFormat, LocationSample, MentionRecord, ParseError,
    RegionFilter, Rejection,
};
pub use mobility::{static_fraction, velocity_profile, MobilityMode, MobilityProfile};
pub use synth::{
    generate_mention_stream, generate_pairs, sample_distance, DoubleParetoLaw, PlantedPair,
    SynthConfig, SynthError, SynthOutput,
};
