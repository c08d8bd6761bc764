use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{CivilClock, LabelTrack, TimeSeries, SECONDS_PER_HOUR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub level: f64,
    /// Change per frame.
    pub trend: f64,
    pub daily_amplitude: f64,
    /// Offset between weekday and weekend level.
    pub weekly_amplitude: f64,
    /// Scales the daily cycle on weekends; 1 keeps it unchanged.
    pub weekend_daily_factor: f64,
    /// Hour of the daily peak.
    pub peak_hour: f64,
}

impl ChannelSpec {
    pub fn flat(name: impl Into<String>, level: f64) -> Self {
        Self {
            name: name.into(),
            level,
            trend: 0.0,
            daily_amplitude: 0.0,
            weekly_amplitude: 0.0,
            weekend_daily_factor: 1.0,
            peak_hour: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub index: usize,
    /// Added to every affected channel, in channel units.
    pub magnitude: f64,
    pub duration: usize,
    /// Affected channels; all when empty.
    #[serde(default)]
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub channels: Vec<ChannelSpec>,
    pub length: usize,
    pub start: i64,
    pub interval: i64,
    pub noise_std: f64,
    pub injections: Vec<Injection>,
    pub seed: u64,
    pub clock: CivilClock,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.length == 0 || self.interval <= 0 {
            return Err(Error::Config("synthetic spec needs channels, length and a positive interval".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        for inj in &self.injections {
            if inj.duration == 0 || inj.index + inj.duration > self.length {
                return Err(Error::Config(format!(
                    "injection at {} for {} frames exceeds length {}",
                    inj.index, inj.duration, self.length
                )));
            }
            if let Some(c) = inj.channels.iter().find(|&&c| c >= self.channels.len()) {
                return Err(Error::Config(format!("injection targets missing channel {c}")));
            }
        }
        Ok(())
    }

    /// Fraction of frames covered by injections.
    pub fn contamination(&self) -> f64 {
        let mut hit = vec![false; self.length];
        for inj in &self.injections {
            hit[inj.index..inj.index + inj.duration].iter_mut().for_each(|h| *h = true);
        }
        hit.iter().filter(|&&h| h).count() as f64 / self.length as f64
    }
}

/// Smooth step between weekday (1) and weekend (0) over a few hours either side of midnight.
fn weekday_level(day: usize, hour: f64) -> f64 {
    let is_weekday = |d: usize| if d < 5 { 1.0 } else { 0.0 };
    let today = is_weekday(day);
    let ramp = |x: f64| 0.5 + 0.5 * (std::f64::consts::PI * x).sin();
    if hour < 3.0 {
        let yesterday = is_weekday((day + 6) % 7);
        let w = ramp((hour + 3.0) / 6.0 - 0.5);
        yesterday + (today - yesterday) * w
    } else if hour > 21.0 {
        let tomorrow = is_weekday((day + 1) % 7);
        let w = ramp((hour - 21.0) / 6.0 - 0.5);
        today + (tomorrow - today) * w
    } else {
        today
    }
}

/// Trend plus daily cycle plus weekday/weekend plateau plus Gaussian noise,
/// with injected offsets. Labels mark every injected frame.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TimeSeries, LabelTrack)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let m = spec.channels.len();
    let mut rows = Vec::with_capacity(spec.length);
    for i in 0..spec.length {
        let ts = spec.start + i as i64 * spec.interval;
        let secs = (ts + spec.clock.utc_offset_seconds).rem_euclid(86_400) as f64;
        let hour = secs / SECONDS_PER_HOUR as f64;
        let day = spec.clock.day_of_week(ts);
        let weekday = weekday_level(day, hour);
        let row: Vec<f64> = spec
            .channels
            .iter()
            .map(|c| {
                let daily_gain = c.weekend_daily_factor + (1.0 - c.weekend_daily_factor) * weekday;
                let daily = c.daily_amplitude * daily_gain * (TAU * (hour - c.peak_hour) / 24.0).cos();
                let weekly = c.weekly_amplitude * (weekday - 5.0 / 7.0);
                c.level + c.trend * i as f64 + daily + weekly + noise.sample(&mut rng)
            })
            .collect();
        rows.push(row);
    }
    let mut labels = vec![false; spec.length];
    for inj in &spec.injections {
        for i in inj.index..inj.index + inj.duration {
            labels[i] = true;
            for c in 0..m {
                if inj.channels.is_empty() || inj.channels.contains(&c) {
                    rows[i][c] += inj.magnitude;
                }
            }
        }
    }
    let names = spec.channels.iter().map(|c| c.name.clone()).collect();
    let series = TimeSeries::from_rows(names, spec.start, spec.interval, rows)?;
    let labels = LabelTrack::new(series.timestamps(), labels)?;
    Ok((series, labels))
}

/// Non-overlapping injections covering roughly `fraction` of `[from, length)`,
/// with random signs, durations in `durations`, and magnitudes in `magnitudes`.
pub fn random_injections(
    seed: u64,
    length: usize,
    from: usize,
    fraction: f64,
    durations: std::ops::RangeInclusive<usize>,
    magnitudes: std::ops::Range<f64>,
    channels: usize,
) -> Vec<Injection> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = ((length - from) as f64 * fraction).round() as usize;
    let mut taken = vec![false; length];
    let mut covered = 0;
    let mut out = Vec::new();
    let mut attempts = 0;
    while covered < target && attempts < 100_000 {
        attempts += 1;
        let duration = rng.random_range(durations.clone()).min(target - covered).max(1);
        let index = rng.random_range(from..length - duration);
        // Keep a gap so events stay distinct.
        let lo = index.saturating_sub(6);
        let hi = (index + duration + 6).min(length);
        if taken[lo..hi].iter().any(|&t| t) {
            continue;
        }
        taken[index..index + duration].iter_mut().for_each(|t| *t = true);
        covered += duration;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let magnitude = sign * rng.random_range(magnitudes.clone());
        let picked = if channels > 1 && rng.random_bool(0.5) {
            vec![rng.random_range(0..channels)]
        } else {
            Vec::new()
        };
        out.push(Injection {
            index,
            magnitude,
            duration,
            channels: picked,
        });
    }
    out.sort_by_key(|i| i.index);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MONDAY: i64 = 1_704_067_200;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            channels: vec![ChannelSpec::flat("a", 3.0), ChannelSpec::flat("b", -1.0)],
            length: 1000,
            start: MONDAY,
            interval: SECONDS_PER_HOUR,
            noise_std: 0.0,
            injections: Vec::new(),
            seed: 1,
            clock: CivilClock::utc(),
        }
    }

    #[test]
    fn flat_spec_is_constant_and_normal() {
        let (s, l) = generate_synthetic(&spec()).unwrap();
        assert!(s.frames().iter().all(|f| f.values == vec![3.0, -1.0]));
        assert_eq!(l.anomaly_count(), 0);
    }

    #[test]
    fn injection_labels_exact_span() {
        let mut sp = spec();
        sp.injections.push(Injection {
            index: 500,
            magnitude: 2.0,
            duration: 4,
            channels: vec![1],
        });
        let (s, l) = generate_synthetic(&sp).unwrap();
        let hit: Vec<usize> = (0..1000).filter(|&i| l.anomalous[i]).collect();
        assert_eq!(hit, vec![500, 501, 502, 503]);
        assert_eq!(s.frames()[501].values, vec![3.0, 1.0]);
        assert_eq!(s.frames()[504].values, vec![3.0, -1.0]);
    }

    #[test]
    fn same_seed_same_output() {
        let mut sp = spec();
        sp.noise_std = 0.1;
        sp.channels[0].daily_amplitude = 1.0;
        sp.channels[0].weekly_amplitude = 0.5;
        let a = generate_synthetic(&sp).unwrap();
        let b = generate_synthetic(&sp).unwrap();
        assert_eq!(a, b);
        sp.seed = 2;
        assert_ne!(generate_synthetic(&sp).unwrap().0, a.0);
    }

    #[test]
    fn rejects_out_of_range_injection() {
        let mut sp = spec();
        sp.injections.push(Injection {
            index: 998,
            magnitude: 1.0,
            duration: 5,
            channels: vec![],
        });
        assert!(generate_synthetic(&sp).is_err());
    }

    #[test]
    fn weekday_plateau_is_smooth_and_bounded() {
        for day in 0..7 {
            for h in 0..24 {
                let v = weekday_level(day, h as f64);
                assert!((0.0..=1.0).contains(&v));
            }
            // Continuous across midnight.
            let before = weekday_level(day, 23.999_999);
            let after = weekday_level((day + 1) % 7, 0.0);
            assert!((before - after).abs() < 1e-5);
        }
        assert_eq!(weekday_level(2, 12.0), 1.0);
        assert_eq!(weekday_level(6, 12.0), 0.0);
    }

    #[test]
    fn random_injections_hit_fraction() {
        let inj = random_injections(3, 2400, 100, 0.12, 2..=6, 0.5..1.0, 2);
        let mut sp = spec();
        sp.length = 2400;
        sp.injections = inj;
        let c = sp.contamination();
        assert!((c - 0.12 * 2300.0 / 2400.0).abs() < 0.01, "{c}");
        assert!(sp.validate().is_ok());
    }
}
