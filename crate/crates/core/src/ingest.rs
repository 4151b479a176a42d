//! Mention-stream ingestion.
//!
//! Input files are UTF-8 text with one record per line, in one of two
//! layouts auto-detected from the first non-empty line of each file:
//!
//! * tab-separated fields in the fixed order
//!   `sender_id  receiver_id  lat  lon  timestamp`, or
//! * a JSON object per line with exactly those keys.
//!
//! Malformed lines never abort a run: each is recorded with its line
//! number and a reason, and `accepted + rejected = total lines` always
//! holds so runs stay auditable.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One geo-tagged mention event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MentionRecord {
    pub sender_id: String,
    pub receiver_id: String,
    pub lat: f64,
    pub lon: f64,
    /// UTC seconds since the epoch, strictly positive.
    pub timestamp: i64,
}

impl MentionRecord {
    pub fn new(
        sender_id: impl Into<String>,
        receiver_id: impl Into<String>,
        lat: f64,
        lon: f64,
        timestamp: i64,
    ) -> Result<Self, ParseError> {
        let sender_id = sender_id.into();
        let receiver_id = receiver_id.into();
        if sender_id.is_empty() {
            return Err(ParseError::EmptyField("sender_id"));
        }
        if receiver_id.is_empty() {
            return Err(ParseError::EmptyField("receiver_id"));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ParseError::LatitudeRange(lat));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(ParseError::LongitudeRange(lon));
        }
        if timestamp <= 0 {
            return Err(ParseError::TimestampRange(timestamp));
        }
        if sender_id == receiver_id {
            return Err(ParseError::SelfMention(sender_id));
        }
        Ok(Self {
            sender_id,
            receiver_id,
            lat,
            lon,
            timestamp,
        })
    }

    /// Serialize back to the tab-separated line format. Floats use the
    /// shortest representation that round-trips exactly, so
    /// parse → serialize → parse reproduces all five fields bit-for-bit.
    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.sender_id, self.receiver_id, self.lat, self.lon, self.timestamp
        )
    }
}

/// One entry of a user's location history (sender positions only).
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSample {
    pub user_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("empty line")]
    EmptyLine,
    #[error("expected 5 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("invalid json: {0}")]
    Json(String),
    #[error("{field}: invalid number {value:?}")]
    InvalidNumber { field: &'static str, value: String },
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeRange(f64),
    #[error("longitude {0} out of range (-180, 180]")]
    LongitudeRange(f64),
    #[error("timestamp {0} is not strictly positive")]
    TimestampRange(i64),
    #[error("{0} is empty")]
    EmptyField(&'static str),
    #[error("sender and receiver are the same user: {0}")]
    SelfMention(String),
}

/// Per-file line layout, decided once from the first non-empty line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineFormat {
    Tsv,
    Jsonl,
}

impl LineFormat {
    pub fn detect(first_non_empty_line: &str) -> Self {
        if first_non_empty_line.trim_start().starts_with('{') {
            LineFormat::Jsonl
        } else {
            LineFormat::Tsv
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMention {
    sender_id: String,
    receiver_id: String,
    lat: f64,
    lon: f64,
    timestamp: i64,
}

/// Parse one line into a validated record.
pub fn parse_mention_line(line: &str, format: LineFormat) -> Result<MentionRecord, ParseError> {
    let line = line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() {
        return Err(ParseError::EmptyLine);
    }
    match format {
        LineFormat::Tsv => {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(ParseError::FieldCount(fields.len()));
            }
            let lat: f64 = fields[2].trim().parse().map_err(|_| ParseError::InvalidNumber {
                field: "lat",
                value: fields[2].to_string(),
            })?;
            let lon: f64 = fields[3].trim().parse().map_err(|_| ParseError::InvalidNumber {
                field: "lon",
                value: fields[3].to_string(),
            })?;
            let timestamp: i64 =
                fields[4].trim().parse().map_err(|_| ParseError::InvalidNumber {
                    field: "timestamp",
                    value: fields[4].to_string(),
                })?;
            MentionRecord::new(fields[0].trim(), fields[1].trim(), lat, lon, timestamp)
        }
        LineFormat::Jsonl => {
            let raw: RawMention =
                serde_json::from_str(line).map_err(|e| ParseError::Json(e.to_string()))?;
            MentionRecord::new(raw.sender_id, raw.receiver_id, raw.lat, raw.lon, raw.timestamp)
        }
    }
}

/// A rejected input line: its 1-based line number and the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line_no: u64,
    pub error: ParseError,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line_no, self.error)
    }
}

/// Result of reading one input: accepted records, rejected lines, and the
/// total line count. `records.len() + rejects.len() == total_lines`.
#[derive(Debug, Default)]
pub struct IngestBatch {
    pub records: Vec<MentionRecord>,
    pub rejects: Vec<Rejection>,
    pub total_lines: u64,
}

impl IngestBatch {
    pub fn summary(&self) -> String {
        format!(
            "accepted {}, rejected {} of {} lines",
            self.records.len(),
            self.rejects.len(),
            self.total_lines
        )
    }

    /// Fold another batch into this one (multi-file runs). Line numbers
    /// stay per-file.
    pub fn merge(&mut self, other: IngestBatch) {
        self.records.extend(other.records);
        self.rejects.extend(other.rejects);
        self.total_lines += other.total_lines;
    }
}

/// Read every line of `reader`, auto-detecting the format from the first
/// non-empty line. Blank lines count as rejected so totals reconcile.
pub fn read_mentions<R: BufRead>(reader: R) -> io::Result<IngestBatch> {
    let mut batch = IngestBatch::default();
    let mut format: Option<LineFormat> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx as u64 + 1;
        batch.total_lines = line_no;
        if line.trim().is_empty() {
            batch.rejects.push(Rejection {
                line_no,
                error: ParseError::EmptyLine,
            });
            continue;
        }
        let fmt = *format.get_or_insert_with(|| LineFormat::detect(&line));
        match parse_mention_line(&line, fmt) {
            Ok(record) => batch.records.push(record),
            Err(error) => batch.rejects.push(Rejection { line_no, error }),
        }
    }
    Ok(batch)
}

pub fn read_mentions_from_path(path: impl AsRef<Path>) -> io::Result<IngestBatch> {
    read_mentions(BufReader::new(File::open(path)?))
}

/// Serialize records to the tab-separated file format, one per line.
pub fn records_to_tsv(records: &[MentionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_tsv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum RegionConfigError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("region file: {0}")]
    Toml(String),
    #[error("region {name}: {what} bounds are not ordered ({lo} >= {hi})")]
    InvalidBounds {
        name: String,
        what: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("region {0:?} not found in region file")]
    NotFound(String),
}

/// Named axis-aligned bounding box, boundary inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFilter {
    pub name: String,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl RegionFilter {
    pub fn new(
        name: impl Into<String>,
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
    ) -> Result<Self, RegionConfigError> {
        let name = name.into();
        if !(lat_min < lat_max) {
            return Err(RegionConfigError::InvalidBounds {
                name,
                what: "latitude",
                lo: lat_min,
                hi: lat_max,
            });
        }
        if !(lon_min < lon_max) {
            return Err(RegionConfigError::InvalidBounds {
                name,
                what: "longitude",
                lo: lon_min,
                hi: lon_max,
            });
        }
        Ok(Self {
            name,
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

#[derive(Deserialize)]
struct RegionFileDoc {
    #[serde(default)]
    region: Vec<RegionFilter>,
}

/// Load all named regions from a TOML file of `[[region]]` tables.
pub fn load_regions(path: impl AsRef<Path>) -> Result<Vec<RegionFilter>, RegionConfigError> {
    let text = std::fs::read_to_string(path)?;
    let doc: RegionFileDoc =
        toml::from_str(&text).map_err(|e| RegionConfigError::Toml(e.to_string()))?;
    doc.region
        .into_iter()
        .map(|r| RegionFilter::new(r.name, r.lat_min, r.lat_max, r.lon_min, r.lon_max))
        .collect()
}

pub fn find_region<'a>(
    regions: &'a [RegionFilter],
    name: &str,
) -> Result<&'a RegionFilter, RegionConfigError> {
    regions
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| RegionConfigError::NotFound(name.to_string()))
}

/// Keep exactly the records whose sender position lies inside the box,
/// preserving order.
pub fn filter_region<'a, I>(
    records: I,
    region: &'a RegionFilter,
) -> impl Iterator<Item = MentionRecord> + 'a
where
    I: IntoIterator<Item = MentionRecord>,
    I::IntoIter: 'a,
{
    records
        .into_iter()
        .filter(move |r| region.contains(r.lat, r.lon))
}

/// Group records into per-sender location histories, each sorted by
/// timestamp ascending with input order preserved on ties.
pub fn build_location_history(
    records: &[MentionRecord],
) -> BTreeMap<String, Vec<LocationSample>> {
    let mut histories: BTreeMap<String, Vec<LocationSample>> = BTreeMap::new();
    for r in records {
        histories
            .entry(r.sender_id.clone())
            .or_default()
            .push(LocationSample {
                user_id: r.sender_id.clone(),
                lat: r.lat,
                lon: r.lon,
                timestamp: r.timestamp,
            });
    }
    for history in histories.values_mut() {
        history.sort_by_key(|s| s.timestamp); // stable: ties keep input order
    }
    histories
}
