//! Fixed-interval multi-channel time series: the data model shared by every
//! other module, plus CSV ingestion, aggregation, min-max normalization and
//! chronological splitting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Maps epoch seconds to civil hour-of-day and day-of-week in a fixed UTC offset.
/// No daylight-saving handling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CivilClock {
    pub utc_offset_seconds: i64,
}

impl CivilClock {
    pub fn utc() -> Self {
        Self::default()
    }

    pub fn with_offset_hours(hours: i64) -> Self {
        Self {
            utc_offset_seconds: hours * SECONDS_PER_HOUR,
        }
    }

    fn local(&self, timestamp: i64) -> i64 {
        timestamp + self.utc_offset_seconds
    }

    /// 0..=23
    pub fn hour_of_day(&self, timestamp: i64) -> usize {
        (self.local(timestamp).rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as usize
    }

    /// 0 = Monday ..= 6 = Sunday.
    pub fn day_of_week(&self, timestamp: i64) -> usize {
        // 1970-01-01 was a Thursday.
        (self.local(timestamp).div_euclid(SECONDS_PER_DAY) + 3).rem_euclid(7) as usize
    }
}

/// One time point: a timestamp (epoch seconds) and `m` channel readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: i64,
    pub values: Vec<f64>,
}

impl Frame {
    pub fn new(timestamp: i64, values: Vec<f64>) -> Self {
        Self { timestamp, values }
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for Frame {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Gap-free series with a fixed interval between consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    channel_names: Vec<String>,
    interval: i64,
    frames: Vec<Frame>,
}

impl TimeSeries {
    pub fn new(channel_names: Vec<String>, interval: i64, frames: Vec<Frame>) -> Result<Self> {
        if interval <= 0 {
            return Err(Error::Config(format!("interval must be positive, got {interval}")));
        }
        let m = channel_names.len();
        for (row, pair) in frames.windows(2).enumerate() {
            let step = pair[1].timestamp - pair[0].timestamp;
            if step <= 0 {
                return Err(Error::NonMonotonic { row: row + 1 });
            }
            if step != interval {
                return Err(Error::Gap {
                    missing: format_timestamp(pair[0].timestamp + interval),
                    interval,
                });
            }
        }
        if let Some(bad) = frames.iter().find(|f| f.values.len() != m) {
            return Err(Error::ChannelMismatch {
                expected: m,
                got: bad.values.len(),
            });
        }
        Ok(Self {
            channel_names,
            interval,
            frames,
        })
    }

    /// Builds a series from per-frame value rows on a regular grid.
    pub fn from_rows(
        channel_names: Vec<String>,
        start: i64,
        interval: i64,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let frames = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Frame::new(start + i as i64 * interval, values))
            .collect();
        Self::new(channel_names, interval, frames)
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn interval(&self) -> i64 {
        self.interval
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn start(&self) -> Option<i64> {
        self.frames.first().map(|f| f.timestamp)
    }

    /// All readings of channel `c`, in time order.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[c]).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// Owned copy of a contiguous range of frames.
    pub fn slice(&self, range: Range<usize>) -> TimeSeries {
        TimeSeries {
            channel_names: self.channel_names.clone(),
            interval: self.interval,
            frames: self.frames[range].to_vec(),
        }
    }

    /// The local sequence `S(start, end)`, both ends inclusive.
    pub fn local_sequence(&self, start: usize, end: usize) -> Result<LocalSequence<'_>> {
        if start > end || end >= self.frames.len() {
            return Err(Error::Shape(format!(
                "local sequence {start}..={end} outside series of length {}",
                self.frames.len()
            )));
        }
        Ok(LocalSequence {
            start_index: start,
            end_index: end,
            frames: &self.frames[start..=end],
        })
    }

    fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> TimeSeries {
        let frames = self
            .frames
            .iter()
            .map(|fr| {
                Frame::new(
                    fr.timestamp,
                    fr.values.iter().enumerate().map(|(c, &v)| f(c, v)).collect(),
                )
            })
            .collect();
        TimeSeries {
            channel_names: self.channel_names.clone(),
            interval: self.interval,
            frames,
        }
    }
}

/// A contiguous fragment `S(start_index, end_index)` of a series.
#[derive(Debug, Clone, Copy)]
pub struct LocalSequence<'a> {
    pub start_index: usize,
    pub end_index: usize,
    pub frames: &'a [Frame],
}

impl LocalSequence<'_> {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-frame binary annotation keyed by timestamp.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelTrack {
    pub timestamps: Vec<i64>,
    pub anomalous: Vec<bool>,
}

impl LabelTrack {
    pub fn new(timestamps: Vec<i64>, anomalous: Vec<bool>) -> Result<Self> {
        if timestamps.len() != anomalous.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: anomalous.len(),
            });
        }
        Ok(Self {
            timestamps,
            anomalous,
        })
    }

    pub fn len(&self) -> usize {
        self.anomalous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anomalous.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.anomalous.iter().filter(|&&a| a).count()
    }

    /// Looks up the label of every requested timestamp.
    pub fn aligned_to(&self, timestamps: &[i64]) -> Result<Vec<bool>> {
        let index: std::collections::HashMap<i64, bool> = self
            .timestamps
            .iter()
            .copied()
            .zip(self.anomalous.iter().copied())
            .collect();
        timestamps
            .iter()
            .map(|ts| {
                index.get(ts).copied().ok_or_else(|| {
                    Error::Alignment(format!("no label for timestamp {}", format_timestamp(*ts)))
                })
            })
            .collect()
    }

    pub fn slice(&self, range: Range<usize>) -> LabelTrack {
        LabelTrack {
            timestamps: self.timestamps[range.clone()].to_vec(),
            anomalous: self.anomalous[range].to_vec(),
        }
    }
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

/// Parses an ISO-8601 timestamp. Values without an offset are read as UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    NAIVE
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
        .or_else(|| {
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .map(|dt| dt.and_utc().timestamp())
        })
}

/// Column selection and gap policy for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// Channel columns to keep, by header name. `None` keeps every column after the first.
    pub channels: Option<Vec<String>>,
    /// Grid interval in seconds. `None` infers the smallest positive step.
    pub interval: Option<i64>,
    /// Fill missing grid points by per-channel linear interpolation instead of failing.
    pub fill_gaps: bool,
}

/// Reads `timestamp,ch1,..,chm` with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| csv_error(0, e))?
        .iter()
        .map(str::to_owned)
        .collect::<Vec<_>>();
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            column: header.len() + 1,
            message: "need a timestamp column and at least one channel".into(),
        });
    }
    let columns: Vec<usize> = match &schema.channels {
        None => (1..header.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                header.iter().skip(1).position(|h| h == n).map(|p| p + 1).ok_or_else(|| {
                    Error::Parse {
                        row: 1,
                        column: 0,
                        message: format!("no column named {n:?}"),
                    }
                })
            })
            .collect::<Result<_>>()?,
    };
    let names: Vec<String> = columns.iter().map(|&c| header[c].clone()).collect();

    let mut stamps = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header.
        let row = i + 2;
        let record = record.map_err(|e| csv_error(row, e))?;
        let ts_field = record.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_field).ok_or_else(|| Error::Parse {
            row,
            column: 1,
            message: format!("bad timestamp {ts_field:?}"),
        })?;
        let values = columns
            .iter()
            .map(|&c| {
                let field = record.get(c).unwrap_or("");
                field.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("bad number {field:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(&last) = stamps.last() {
            if ts <= last {
                return Err(Error::NonMonotonic { row });
            }
        }
        stamps.push(ts);
        rows.push(values);
    }
    if stamps.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let interval = match schema.interval {
        Some(i) => i,
        None => stamps.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(SECONDS_PER_HOUR),
    };
    let frames = regularize(&stamps, rows, interval, schema.fill_gaps)?;
    TimeSeries::new(names, interval, frames)
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

/// Places strictly increasing samples on the grid `start + k * interval`,
/// optionally interpolating missing points.
pub fn regularize(
    stamps: &[i64],
    rows: Vec<Vec<f64>>,
    interval: i64,
    fill_gaps: bool,
) -> Result<Vec<Frame>> {
    let Some(&start) = stamps.first() else {
        return Ok(Vec::new());
    };
    let mut frames: Vec<Frame> = Vec::with_capacity(rows.len());
    for (&ts, values) in stamps.iter().zip(rows) {
        if (ts - start) % interval != 0 {
            return Err(Error::OffGrid {
                got: ts,
                start,
                interval,
            });
        }
        if let Some(prev) = frames.last() {
            let steps = (ts - prev.timestamp) / interval;
            if steps > 1 {
                if !fill_gaps {
                    return Err(Error::Gap {
                        missing: format_timestamp(prev.timestamp + interval),
                        interval,
                    });
                }
                let from = prev.values.clone();
                let t0 = prev.timestamp;
                for k in 1..steps {
                    let w = k as f64 / steps as f64;
                    let filled = from
                        .iter()
                        .zip(&values)
                        .map(|(a, b)| a + (b - a) * w)
                        .collect();
                    frames.push(Frame::new(t0 + k * interval, filled));
                }
            }
        }
        frames.push(Frame::new(ts, values));
    }
    Ok(frames)
}

/// Writes the series as CSV with an ISO-8601 timestamp column.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(out, "timestamp")?;
        for name in &series.channel_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for frame in &series.frames {
            write!(out, "{}", format_timestamp(frame.timestamp))?;
            for v in &frame.values {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads `timestamp,label` rows where label is 0 or 1.
pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<LabelTrack> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut track = LabelTrack::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| csv_error(row, e))?;
        let ts_field = record.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_field).ok_or_else(|| Error::Parse {
            row,
            column: 1,
            message: format!("bad timestamp {ts_field:?}"),
        })?;
        let label = match record.get(1).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    row,
                    column: 2,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        track.timestamps.push(ts);
        track.anomalous.push(label);
    }
    if track.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(track)
}

pub fn write_labels_csv(labels: &LabelTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "timestamp,label")?;
        for (ts, a) in labels.timestamps.iter().zip(&labels.anomalous) {
            writeln!(out, "{},{}", format_timestamp(*ts), u8::from(*a))?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Sum,
    Mean,
}

/// Reduces consecutive windows of `target / interval` frames into one frame
/// stamped with the window start. A partial trailing window is dropped.
pub fn aggregate_to_interval(series: &TimeSeries, target: i64, reducer: Reducer) -> Result<TimeSeries> {
    if target <= 0 || target % series.interval != 0 {
        return Err(Error::IntervalMismatch {
            target,
            interval: series.interval,
        });
    }
    let width = (target / series.interval) as usize;
    let m = series.channels();
    let frames = series
        .frames
        .chunks_exact(width)
        .map(|window| {
            let mut acc = vec![0.0; m];
            for f in window {
                for (a, v) in acc.iter_mut().zip(&f.values) {
                    *a += v;
                }
            }
            if reducer == Reducer::Mean {
                acc.iter_mut().for_each(|a| *a /= width as f64);
            }
            Frame::new(window[0].timestamp, acc)
        })
        .collect();
    TimeSeries::new(series.channel_names.clone(), target, frames)
}

/// Per-channel min/max taken from a training span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// A channel with `max == min` carries no information and maps to 0.
    pub fn is_degenerate(&self, c: usize) -> bool {
        self.max[c] <= self.min[c]
    }

    pub fn normalize_value(&self, c: usize, x: f64) -> f64 {
        if self.is_degenerate(c) {
            0.0
        } else {
            ((x - self.min[c]) / (self.max[c] - self.min[c])).clamp(0.0, 1.0)
        }
    }

    pub fn denormalize_value(&self, c: usize, x: f64) -> f64 {
        if self.is_degenerate(c) {
            self.min[c]
        } else {
            self.min[c] + x * (self.max[c] - self.min[c])
        }
    }

    fn check(&self, series: &TimeSeries) -> Result<()> {
        if self.channels() != series.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                got: series.channels(),
            });
        }
        Ok(())
    }
}

/// Panics on an empty series (precondition).
pub fn fit_normalization(series: &TimeSeries) -> NormalizationParams {
    assert!(!series.is_empty(), "cannot fit normalization on an empty series");
    let m = series.channels();
    let mut min = vec![f64::INFINITY; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for f in &series.frames {
        for (c, &v) in f.values.iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    NormalizationParams { min, max }
}

/// Min-max scaling into [0, 1], clamping values outside the fitted range.
pub fn normalize(series: &TimeSeries, params: &NormalizationParams) -> Result<TimeSeries> {
    params.check(series)?;
    Ok(series.map_values(|c, v| params.normalize_value(c, v)))
}

pub fn denormalize(series: &TimeSeries, params: &NormalizationParams) -> Result<TimeSeries> {
    params.check(series)?;
    Ok(series.map_values(|c, v| params.denormalize_value(c, v)))
}

/// Frame ranges of a chronological train / validation / test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn new(len: usize, train: usize, validation: usize, test: usize) -> Result<Self> {
        let requested = train + validation + test;
        if requested > len {
            return Err(Error::SplitTooLong {
                requested,
                available: len,
            });
        }
        Ok(Self {
            train: 0..train,
            validation: train..train + validation,
            test: train + validation..requested,
        })
    }
}

/// Borrowed views of the three splits.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub train: &'a [Frame],
    pub validation: &'a [Frame],
    pub test: &'a [Frame],
}

pub fn split(series: &TimeSeries, train: usize, validation: usize, test: usize) -> Result<Split<'_>> {
    let r = SplitRanges::new(series.len(), train, validation, test)?;
    Ok(Split {
        train: &series.frames[r.train],
        validation: &series.frames[r.validation],
        test: &series.frames[r.test],
    })
}
