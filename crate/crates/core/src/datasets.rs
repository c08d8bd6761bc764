//! Readers for the raw UCI exports of the CalIt2 building-occupancy and
//! Dodgers loop-sensor datasets.
//!
//! Both readers return an hourly [`TimeSeries`] and a [`LabelTrack`] that marks
//! every hour overlapping an annotated event. Timestamps are the local wall
//! clock read as UTC, so a zero [`CivilClock`](crate::CivilClock) offset gives
//! local hour-of-day and day-of-week.

use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};
use crate::series::{aggregate_to_interval, Frame, LabelTrack, Reducer, TimeSeries, SECONDS_PER_DAY, SECONDS_PER_HOUR};

/// Event window in epoch seconds, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub start: i64,
    pub end: i64,
}

/// Marks every frame whose `[ts, ts + interval)` overlaps an event.
pub fn label_events(series: &TimeSeries, events: &[Event]) -> LabelTrack {
    let interval = series.interval();
    let timestamps = series.timestamps();
    let anomalous = timestamps
        .iter()
        .map(|&ts| events.iter().any(|e| ts < e.end && e.start < ts + interval))
        .collect();
    LabelTrack {
        timestamps,
        anomalous,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_date(s: &str, row: usize, column: usize) -> Result<NaiveDate> {
    let s = s.trim();
    let four_digit_year = s.rsplit('/').next().is_some_and(|y| y.len() == 4);
    let fmt = if four_digit_year { "%m/%d/%Y" } else { "%m/%d/%y" };
    NaiveDate::parse_from_str(s, fmt).map_err(|_| Error::Parse {
        row,
        column,
        message: format!("bad date {s:?}"),
    })
}

fn parse_time(s: &str, row: usize, column: usize) -> Result<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| Error::Parse {
            row,
            column,
            message: format!("bad time {s:?}"),
        })
}

fn stamp(date: NaiveDate, time: NaiveTime) -> i64 {
    NaiveDateTime::new(date, time).and_utc().timestamp()
}

/// Parses `date,start,end,...` event rows. An end before the start wraps past midnight.
pub fn parse_events(text: &str) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                row,
                column: fields.len() + 1,
                message: "expected date,start,end".into(),
            });
        }
        let date = parse_date(fields[0], row, 1)?;
        let start = stamp(date, parse_time(fields[1], row, 2)?);
        let mut end = stamp(date, parse_time(fields[2], row, 3)?);
        if end <= start {
            end += SECONDS_PER_DAY;
        }
        events.push(Event { start, end });
    }
    Ok(events)
}

pub mod calit2 {
    //! `CalIt2.data` rows are `flow,MM/DD/YY,HH:MM:SS,count` with flow 7 (out)
    //! or 9 (in), sampled every 30 minutes.

    use super::*;

    pub const FLOW_OUT: u32 = 7;
    pub const FLOW_IN: u32 = 9;
    /// Hourly frames kept after dropping the trailing 120 hours of the 2520-hour export.
    pub const HOURLY_FRAMES: usize = 2400;

    /// Half-hourly `[in, out]` series from the raw export.
    pub fn parse_data(text: &str) -> Result<TimeSeries> {
        let mut inflow: Vec<(i64, f64)> = Vec::new();
        let mut outflow: Vec<(i64, f64)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let row = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    row,
                    column: fields.len(),
                    message: "expected flow,date,time,count".into(),
                });
            }
            let flow: u32 = fields[0].trim().parse().map_err(|_| Error::Parse {
                row,
                column: 1,
                message: format!("bad flow id {:?}", fields[0]),
            })?;
            let ts = stamp(parse_date(fields[1], row, 2)?, parse_time(fields[2], row, 3)?);
            let count: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
                row,
                column: 4,
                message: format!("bad count {:?}", fields[3]),
            })?;
            match flow {
                FLOW_IN => inflow.push((ts, count)),
                FLOW_OUT => outflow.push((ts, count)),
                other => {
                    return Err(Error::Parse {
                        row,
                        column: 1,
                        message: format!("unknown flow id {other}"),
                    })
                }
            }
        }
        if inflow.len() != outflow.len() || inflow.is_empty() {
            return Err(Error::Alignment(format!(
                "in-flow has {} rows, out-flow has {}",
                inflow.len(),
                outflow.len()
            )));
        }
        inflow.sort_by_key(|r| r.0);
        outflow.sort_by_key(|r| r.0);
        let frames = inflow
            .iter()
            .zip(&outflow)
            .map(|(a, b)| {
                if a.0 != b.0 {
                    return Err(Error::Alignment(format!("in/out timestamps differ: {} vs {}", a.0, b.0)));
                }
                Ok(Frame::new(a.0, vec![a.1, b.1]))
            })
            .collect::<Result<Vec<_>>>()?;
        TimeSeries::new(vec!["in".into(), "out".into()], 1800, frames)
    }

    /// Hourly series (summed, truncated to 2400 frames) and event labels.
    pub fn load(dir: impl AsRef<Path>) -> Result<(TimeSeries, LabelTrack)> {
        let dir = dir.as_ref();
        let raw = parse_data(&read(&dir.join("CalIt2.data"))?)?;
        let events = parse_events(&read(&dir.join("CalIt2.events"))?)?;
        let hourly = aggregate_to_interval(&raw, SECONDS_PER_HOUR, Reducer::Sum)?;
        let keep = hourly.len().min(HOURLY_FRAMES);
        let hourly = hourly.slice(0..keep);
        let labels = label_events(&hourly, &events);
        Ok((hourly, labels))
    }
}

pub mod dodgers {
    //! `Dodgers.data` rows are `M/D/YYYY H:MM,count` every 5 minutes, with
    //! `-1` marking a missing reading.

    use super::*;

    pub fn parse_data(text: &str) -> Result<TimeSeries> {
        let mut stamps = Vec::new();
        let mut counts: Vec<Option<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let row = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (when, count) = line.split_once(',').ok_or_else(|| Error::Parse {
                row,
                column: 1,
                message: "expected datetime,count".into(),
            })?;
            let (date, time) = when.trim().split_once(' ').ok_or_else(|| Error::Parse {
                row,
                column: 1,
                message: format!("bad datetime {when:?}"),
            })?;
            let ts = stamp(parse_date(date, row, 1)?, parse_time(time, row, 1)?);
            let count: f64 = count.trim().parse().map_err(|_| Error::Parse {
                row,
                column: 2,
                message: format!("bad count {count:?}"),
            })?;
            stamps.push(ts);
            counts.push((count >= 0.0).then_some(count));
        }
        let filled = interpolate_missing(&counts);
        let frames = stamps
            .into_iter()
            .zip(filled)
            .map(|(ts, v)| Frame::new(ts, vec![v]))
            .collect();
        TimeSeries::new(vec!["cars".into()], 300, frames)
    }

    /// Linear interpolation between valid neighbours; edges copy the nearest
    /// valid value. An all-missing input becomes zeros.
    pub fn interpolate_missing(values: &[Option<f64>]) -> Vec<f64> {
        let valid: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
        if valid.is_empty() {
            return vec![0.0; values.len()];
        }
        let mut out = vec![0.0; values.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = match values[i] {
                Some(v) => v,
                None => {
                    let next = valid.partition_point(|&j| j < i);
                    match (next.checked_sub(1).map(|p| valid[p]), valid.get(next)) {
                        (Some(a), Some(&b)) => {
                            let (va, vb) = (values[a].unwrap(), values[b].unwrap());
                            va + (vb - va) * (i - a) as f64 / (b - a) as f64
                        }
                        (Some(a), None) => values[a].unwrap(),
                        (None, Some(&b)) => values[b].unwrap(),
                        (None, None) => unreachable!(),
                    }
                }
            };
        }
        out
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(TimeSeries, LabelTrack)> {
        let dir = dir.as_ref();
        let raw = parse_data(&read(&dir.join("Dodgers.data"))?)?;
        let events = parse_events(&read(&dir.join("Dodgers.events"))?)?;
        let hourly = aggregate_to_interval(&raw, SECONDS_PER_HOUR, Reducer::Sum)?;
        let labels = label_events(&hourly, &events);
        Ok((hourly, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calit2_rows() {
        let text = "7,07/24/05,00:00:00,0\n9,07/24/05,00:00:00,1\n7,07/24/05,00:30:00,2\n9,07/24/05,00:30:00,3\n";
        let s = calit2::parse_data(text).unwrap();
        assert_eq!(s.channels(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.frames()[1].values, vec![3.0, 2.0]);
        assert_eq!(s.interval(), 1800);
        let h = aggregate_to_interval(&s, 3600, Reducer::Sum).unwrap();
        assert_eq!(h.frames()[0].values, vec![4.0, 2.0]);
    }

    #[test]
    fn calit2_unknown_flow() {
        assert!(calit2::parse_data("8,07/24/05,00:00:00,0\n").is_err());
    }

    #[test]
    fn events_label_overlapping_hours() {
        let rows = (0..24).map(|_| vec![0.0]).collect();
        let day = stamp(NaiveDate::from_ymd_opt(2005, 7, 26).unwrap(), NaiveTime::MIN);
        let s = TimeSeries::from_rows(vec!["x".into()], day, 3600, rows).unwrap();
        let events = parse_events("07/26/05,11:00:00,14:00:00,Epoch Seminar\n07/26/05,23:30:00,00:30:00,Late\n").unwrap();
        let labels = label_events(&s, &events);
        let marked: Vec<usize> = (0..24).filter(|&i| labels.anomalous[i]).collect();
        assert_eq!(marked, vec![11, 12, 13, 23]);
    }

    #[test]
    fn dodgers_missing_values_interpolated() {
        let text = "4/10/2005 0:00,-1\n4/10/2005 0:05,4\n4/10/2005 0:10,-1\n4/10/2005 0:15,8\n4/10/2005 0:20,-1\n";
        let s = dodgers::parse_data(text).unwrap();
        assert_eq!(s.channel(0), vec![4.0, 4.0, 6.0, 8.0, 8.0]);
        assert_eq!(s.interval(), 300);
        let ts = s.start().unwrap();
        assert_eq!(crate::series::format_timestamp(ts), "2005-04-10T00:00:00Z");
    }

    #[test]
    fn dodgers_events_with_attendance() {
        let e = parse_events("04/12/05,13:10:00,16:23:00,55892,W 4-1\n").unwrap();
        assert_eq!(e[0].end - e[0].start, 3 * 3600 + 13 * 60);
    }
}
