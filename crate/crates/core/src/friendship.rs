//! Bidirectional friendship detection and two-stage distance estimation.
//!
//! Two users form a friendship when each has mentioned the other within
//! the configured window. A pair's distance is then estimated from its
//! exchanges: every mention is matched with the earliest strictly later
//! opposite-direction mention not already used as a reply (greedy FIFO),
//! the sender-to-sender great-circle distance is computed for each match,
//! and distances whose inter-mention interval is under the cutoff are
//! averaged.
//!
//! All operations sort records internally by a total content order
//! (timestamp, then the remaining fields), so output is invariant under
//! input permutation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::geodesy::{great_circle_distance, EarthModel, GeoPoint};
use crate::ingest::MentionRecord;

/// Mention-with-reply matching parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriendshipConfig {
    /// Max |t_reply - t_mention| for two users to count as befriended.
    /// `None` means the whole dataset span, i.e. any bidirectional pair
    /// qualifies.
    pub window_s: Option<i64>,
    /// Exchanges with an interval strictly below this qualify for
    /// distance estimation. Seconds, strictly positive.
    pub max_interval_s: i64,
}

impl Default for FriendshipConfig {
    fn default() -> Self {
        Self {
            window_s: None,
            max_interval_s: 3600,
        }
    }
}

/// A matched mention/reply pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeEvent {
    pub first: MentionRecord,
    pub reply: MentionRecord,
    /// reply.timestamp - first.timestamp, always > 0.
    pub interval_s: i64,
    /// Great-circle distance between the two sender positions.
    pub distance_km: f64,
}

/// An unordered befriended pair with its estimated distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FriendPair {
    /// Lexicographically smaller user id.
    pub user_a: String,
    pub user_b: String,
    /// Mean distance over qualifying exchanges; `None` when none qualify.
    pub estimated_distance_km: Option<f64>,
    pub n_exchanges_total: usize,
    pub n_exchanges_qualifying: usize,
}

/// Total order on records: by timestamp, then content. Used everywhere in
/// this module so results do not depend on input order.
fn record_order(a: &MentionRecord, b: &MentionRecord) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.sender_id.cmp(&b.sender_id))
        .then_with(|| a.receiver_id.cmp(&b.receiver_id))
        .then_with(|| a.lat.total_cmp(&b.lat))
        .then_with(|| a.lon.total_cmp(&b.lon))
}

fn canonical_pair(u: &str, v: &str) -> (String, String) {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

/// Smallest |a_i - b_j| between two ascending time lists.
fn min_abs_gap(a: &[i64], b: &[i64]) -> Option<i64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (mut i, mut j) = (0, 0);
    let mut best: Option<i64> = None;
    while i < a.len() && j < b.len() {
        let gap = (a[i] - b[j]).abs();
        best = Some(best.map_or(gap, |g| g.min(gap)));
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

/// Group everything by canonical unordered pair, with per-direction
/// records kept in content-sorted time order. `dir_ab` holds mentions
/// sent by the pair's `user_a`.
struct PairRecords {
    dir_ab: Vec<MentionRecord>,
    dir_ba: Vec<MentionRecord>,
}

fn group_by_pair(records: &[MentionRecord]) -> BTreeMap<(String, String), PairRecords> {
    let mut sorted: Vec<&MentionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| record_order(a, b));
    let mut pairs: BTreeMap<(String, String), PairRecords> = BTreeMap::new();
    for r in sorted {
        let key = canonical_pair(&r.sender_id, &r.receiver_id);
        let entry = pairs.entry(key.clone()).or_insert_with(|| PairRecords {
            dir_ab: Vec::new(),
            dir_ba: Vec::new(),
        });
        if r.sender_id == key.0 {
            entry.dir_ab.push(r.clone());
        } else {
            entry.dir_ba.push(r.clone());
        }
    }
    pairs
}

fn pair_is_befriended(recs: &PairRecords, window_s: Option<i64>) -> bool {
    if recs.dir_ab.is_empty() || recs.dir_ba.is_empty() {
        return false;
    }
    match window_s {
        None => true,
        Some(w) => {
            let ts_ab: Vec<i64> = recs.dir_ab.iter().map(|r| r.timestamp).collect();
            let ts_ba: Vec<i64> = recs.dir_ba.iter().map(|r| r.timestamp).collect();
            min_abs_gap(&ts_ab, &ts_ba).is_some_and(|g| g <= w)
        }
    }
}

/// Canonically ordered set of befriended pairs: (u, v) is present iff a
/// u→v mention and a v→u mention exist within the window of each other.
pub fn detect_friend_pairs(
    records: &[MentionRecord],
    config: &FriendshipConfig,
) -> Vec<(String, String)> {
    group_by_pair(records)
        .into_iter()
        .filter(|(_, recs)| pair_is_befriended(recs, config.window_s))
        .map(|(key, _)| key)
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum PairInputError {
    #[error("records span more than one unordered user pair")]
    MixedPairs,
}

/// Match mentions with replies for one pair's records (both directions).
///
/// Greedy FIFO: walking records in time order, each record first answers
/// the earliest still-unanswered opposite-direction mention that strictly
/// precedes it, then becomes itself eligible for a later reply. A record
/// answers at most one mention. Events come back ordered by the first
/// mention's position in time.
pub fn pair_exchanges(
    records: &[MentionRecord],
    earth: EarthModel,
) -> Result<Vec<ExchangeEvent>, PairInputError> {
    let mut pairs = group_by_pair(records);
    if pairs.len() > 1 {
        return Err(PairInputError::MixedPairs);
    }
    let Some((_, recs)) = pairs.pop_first() else {
        return Ok(Vec::new());
    };
    Ok(match_exchanges(&recs, earth))
}

fn match_exchanges(recs: &PairRecords, earth: EarthModel) -> Vec<ExchangeEvent> {
    // Merge the two direction lists back into global time order.
    let mut merged: Vec<(&MentionRecord, bool)> = recs
        .dir_ab
        .iter()
        .map(|r| (r, true))
        .chain(recs.dir_ba.iter().map(|r| (r, false)))
        .collect();
    merged.sort_by(|(a, _), (b, _)| record_order(a, b));

    let mut waiting_ab: VecDeque<&MentionRecord> = VecDeque::new();
    let mut waiting_ba: VecDeque<&MentionRecord> = VecDeque::new();
    let mut events = Vec::new();
    for (record, is_ab) in merged {
        let opposite = if is_ab { &mut waiting_ba } else { &mut waiting_ab };
        if opposite
            .front()
            .is_some_and(|first| first.timestamp < record.timestamp)
        {
            let first = opposite.pop_front().expect("front checked above");
            let a = GeoPoint {
                lat: first.lat,
                lon: first.lon,
            };
            let b = GeoPoint {
                lat: record.lat,
                lon: record.lon,
            };
            events.push(ExchangeEvent {
                first: first.clone(),
                reply: record.clone(),
                interval_s: record.timestamp - first.timestamp,
                distance_km: great_circle_distance(a, b, earth),
            });
        }
        let own = if is_ab { &mut waiting_ab } else { &mut waiting_ba };
        own.push_back(record);
    }
    // FIFO matching pairs earlier firsts with earlier replies, so this is
    // already ordered by first timestamp; sort anyway to pin the contract.
    events.sort_by(|a, b| record_order(&a.first, &b.first));
    events
}

/// Mean distance over exchanges with interval strictly under the cutoff;
/// `None` when no exchange qualifies. Summation runs in event order.
pub fn estimate_pair_distance(events: &[ExchangeEvent], max_interval_s: i64) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for e in events {
        if e.interval_s < max_interval_s {
            sum += e.distance_km;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Full per-pair pipeline: detect befriended pairs, match exchanges, and
/// estimate distances. Pairs with no qualifying exchange are kept with an
/// absent distance. Output is sorted by (user_a, user_b).
pub fn build_friendship_distances(
    records: &[MentionRecord],
    config: &FriendshipConfig,
    earth: EarthModel,
) -> Vec<FriendPair> {
    group_by_pair(records)
        .into_iter()
        .filter(|(_, recs)| pair_is_befriended(recs, config.window_s))
        .map(|((user_a, user_b), recs)| {
            let events = match_exchanges(&recs, earth);
            let estimated = estimate_pair_distance(&events, config.max_interval_s);
            let qualifying = events
                .iter()
                .filter(|e| e.interval_s < config.max_interval_s)
                .count();
            FriendPair {
                user_a,
                user_b,
                estimated_distance_km: estimated,
                n_exchanges_total: events.len(),
                n_exchanges_qualifying: qualifying,
            }
        })
        .collect()
}

pub const PAIRS_TABLE_HEADER: &str =
    "user_a\tuser_b\testimated_distance_km\tn_exchanges_total\tn_exchanges_qualifying";

/// Render the pair table as tab-separated text with a header row. Absent
/// distances serialize as an empty field.
pub fn write_pairs_table(pairs: &[FriendPair]) -> String {
    let mut out = String::from(PAIRS_TABLE_HEADER);
    out.push('\n');
    for p in pairs {
        let dist = p
            .estimated_distance_km
            .map(|d| d.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.user_a, p.user_b, dist, p.n_exchanges_total, p.n_exchanges_qualifying
        ));
    }
    out
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("missing or unrecognized header row")]
    Header,
    #[error("line {line_no}: {detail}")]
    Line { line_no: usize, detail: String },
}

/// Parse a table produced by [`write_pairs_table`].
pub fn read_pairs_table(text: &str) -> Result<Vec<FriendPair>, TableError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == PAIRS_TABLE_HEADER => {}
        _ => return Err(TableError::Header),
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(TableError::Line {
                line_no,
                detail: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let parse_err = |what: &str| TableError::Line {
            line_no,
            detail: format!("invalid {what}"),
        };
        let estimated = if fields[2].is_empty() {
            None
        } else {
            Some(fields[2].parse::<f64>().map_err(|_| parse_err("distance"))?)
        };
        pairs.push(FriendPair {
            user_a: fields[0].to_string(),
            user_b: fields[1].to_string(),
            estimated_distance_km: estimated,
            n_exchanges_total: fields[3].parse().map_err(|_| parse_err("count"))?,
            n_exchanges_qualifying: fields[4].parse().map_err(|_| parse_err("count"))?,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sender: &str, receiver: &str, t: i64) -> MentionRecord {
        MentionRecord::new(sender, receiver, 34.05, -118.24, t).unwrap()
    }

    fn rec_at(sender: &str, receiver: &str, t: i64, lat: f64, lon: f64) -> MentionRecord {
        MentionRecord::new(sender, receiver, lat, lon, t).unwrap()
    }

    #[test]
    fn bidirectional_pair_within_window_is_detected() {
        let records = vec![rec("u", "v", 1), rec("v", "u", 601)];
        let pairs = detect_friend_pairs(&records, &FriendshipConfig::default());
        assert_eq!(pairs, vec![("u".to_string(), "v".to_string())]);
    }

    #[test]
    fn unidirectional_mentions_are_not_friends() {
        let records = vec![rec("u", "v", 1), rec("u", "v", 100)];
        assert!(detect_friend_pairs(&records, &FriendshipConfig::default()).is_empty());
    }

    #[test]
    fn window_excludes_distant_mentions() {
        let records = vec![rec("u", "v", 1), rec("v", "u", 5000)];
        let tight = FriendshipConfig {
            window_s: Some(3600),
            ..Default::default()
        };
        assert!(detect_friend_pairs(&records, &tight).is_empty());
        let loose = FriendshipConfig {
            window_s: Some(5001),
            ..Default::default()
        };
        assert_eq!(detect_friend_pairs(&records, &loose).len(), 1);
    }

    #[test]
    fn window_is_direction_agnostic() {
        // reply before the mention still counts for detection
        let records = vec![rec("v", "u", 1), rec("u", "v", 100)];
        let cfg = FriendshipConfig {
            window_s: Some(200),
            ..Default::default()
        };
        assert_eq!(detect_friend_pairs(&records, &cfg).len(), 1);
    }

    #[test]
    fn single_exchange_matches() {
        let records = vec![rec("u", "v", 100), rec("v", "u", 1900)];
        let events = pair_exchanges(&records, EarthModel::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].interval_s, 1800);
        assert_eq!(events[0].first.sender_id, "u");
        assert_eq!(events[0].reply.sender_id, "v");
    }

    #[test]
    fn reply_matches_earliest_unmatched_mention_fifo() {
        let records = vec![rec("u", "v", 1), rec("u", "v", 101), rec("v", "u", 201)];
        let events = pair_exchanges(&records, EarthModel::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].first.timestamp, 1);
        assert_eq!(events[0].reply.timestamp, 201);
    }

    #[test]
    fn long_interval_event_still_exists() {
        let records = vec![rec("u", "v", 1), rec("v", "u", 5401)];
        let events = pair_exchanges(&records, EarthModel::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].interval_s, 5400);
    }

    #[test]
    fn simultaneous_records_never_match() {
        let records = vec![rec("u", "v", 100), rec("v", "u", 100)];
        let events = pair_exchanges(&records, EarthModel::default()).unwrap();
        assert!(events.is_empty());
        // but the pair is still befriended (|t - s| = 0 <= window)
        let cfg = FriendshipConfig {
            window_s: Some(10),
            ..Default::default()
        };
        assert_eq!(detect_friend_pairs(&records, &cfg).len(), 1);
    }

    #[test]
    fn chained_mentions_produce_overlapping_exchanges() {
        // u@10 -> v@20 -> u@30: the reply at 20 is also a first for 30.
        let records = vec![rec("u", "v", 10), rec("v", "u", 20), rec("u", "v", 30)];
        let events = pair_exchanges(&records, EarthModel::default()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(
            (events[0].first.timestamp, events[0].reply.timestamp),
            (10, 20)
        );
        assert_eq!(
            (events[1].first.timestamp, events[1].reply.timestamp),
            (20, 30)
        );
    }

    #[test]
    fn mixed_pair_input_is_rejected() {
        let records = vec![rec("u", "v", 1), rec("w", "u", 2)];
        assert_eq!(
            pair_exchanges(&records, EarthModel::default()).unwrap_err(),
            PairInputError::MixedPairs
        );
    }

    fn event_with(interval_s: i64, distance_km: f64) -> ExchangeEvent {
        ExchangeEvent {
            first: rec("u", "v", 1),
            reply: rec("v", "u", 1 + interval_s),
            interval_s,
            distance_km,
        }
    }

    #[test]
    fn estimate_is_mean_of_qualifying_distances() {
        let events = vec![event_with(100, 10.0), event_with(200, 20.0)];
        assert_eq!(estimate_pair_distance(&events, 3600), Some(15.0));
    }

    #[test]
    fn estimate_absent_when_nothing_qualifies() {
        let events = vec![event_with(5400, 10.0)];
        assert_eq!(estimate_pair_distance(&events, 3600), None);
    }

    #[test]
    fn boundary_interval_is_excluded() {
        let events = vec![
            event_with(100, 5.0),
            event_with(200, 5.0),
            event_with(3599, 5.0),
            event_with(3600, 99.0),
        ];
        assert_eq!(estimate_pair_distance(&events, 3600), Some(5.0));
    }

    #[test]
    fn full_pipeline_single_pair() {
        let records = vec![
            rec_at("u", "v", 100, 34.05, -118.24),
            rec_at("v", "u", 700, 34.15, -118.24),
        ];
        let pairs =
            build_friendship_distances(&records, &FriendshipConfig::default(), EarthModel::default());
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!((p.user_a.as_str(), p.user_b.as_str()), ("u", "v"));
        assert_eq!(p.n_exchanges_total, 1);
        assert_eq!(p.n_exchanges_qualifying, 1);
        let d = p.estimated_distance_km.unwrap();
        assert!((d - 11.12).abs() < 0.05, "d={d}"); // 0.1 deg of latitude
    }

    #[test]
    fn pair_without_qualifying_exchange_is_kept_without_distance() {
        let records = vec![rec("u", "v", 1), rec("v", "u", 360000)];
        let pairs =
            build_friendship_distances(&records, &FriendshipConfig::default(), EarthModel::default());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].estimated_distance_km, None);
        assert_eq!(pairs[0].n_exchanges_total, 1);
        assert_eq!(pairs[0].n_exchanges_qualifying, 0);
    }

    #[test]
    fn empty_stream_yields_empty_output() {
        assert!(
            build_friendship_distances(&[], &FriendshipConfig::default(), EarthModel::default())
                .is_empty()
        );
    }

    #[test]
    fn output_is_invariant_under_input_permutation() {
        let mut records = vec![
            rec_at("u", "v", 10, 34.0, -118.3),
            rec_at("v", "u", 500, 34.1, -118.2),
            rec_at("u", "v", 900, 34.0, -118.3),
            rec_at("w", "u", 50, 33.9, -118.4),
            rec_at("u", "w", 800, 34.0, -118.3),
        ];
        let cfg = FriendshipConfig::default();
        let earth = EarthModel::default();
        let baseline = build_friendship_distances(&records, &cfg, earth);
        records.reverse();
        assert_eq!(build_friendship_distances(&records, &cfg, earth), baseline);
        records.swap(0, 2);
        assert_eq!(build_friendship_distances(&records, &cfg, earth), baseline);
    }

    #[test]
    fn pairs_table_round_trips() {
        let pairs = vec![
            FriendPair {
                user_a: "a".into(),
                user_b: "b".into(),
                estimated_distance_km: Some(12.25),
                n_exchanges_total: 3,
                n_exchanges_qualifying: 2,
            },
            FriendPair {
                user_a: "a".into(),
                user_b: "c".into(),
                estimated_distance_km: None,
                n_exchanges_total: 1,
                n_exchanges_qualifying: 0,
            },
        ];
        let text = write_pairs_table(&pairs);
        assert_eq!(read_pairs_table(&text).unwrap(), pairs);
    }
}
