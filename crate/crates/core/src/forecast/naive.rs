use super::{Forecaster, PredictedSequence};
use crate::decomp::SeasonalProfile;
use crate::error::{Error, Result};
use crate::series::{Frame, TimeSeries};

/// Forecasts each future frame as trend plus daily and weekly terms of the
/// fitted profile, ignoring the observed values.
#[derive(Debug, Clone)]
pub struct SeasonalNaive {
    profile: SeasonalProfile,
    interval: i64,
    horizon: usize,
}

impl SeasonalNaive {
    pub fn new(profile: SeasonalProfile, interval: i64, horizon: usize) -> Self {
        Self {
            profile,
            interval,
            horizon,
        }
    }

    fn predict(&self, timestamp: i64) -> Vec<Vec<f64>> {
        (1..=self.horizon as i64)
            .map(|j| {
                let ts = timestamp + j * self.interval;
                (0..self.profile.channel_count())
                    .map(|c| self.profile.reconstruct(c, ts))
                    .collect()
            })
            .collect()
    }
}

impl Forecaster for SeasonalNaive {
    fn channels(&self) -> usize {
        self.profile.channel_count()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn forecast(&mut self, frame: &Frame) -> Result<Vec<Vec<f64>>> {
        if frame.channels() != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                got: frame.channels(),
            });
        }
        Ok(self.predict(frame.timestamp))
    }

    fn reset(&mut self) {}
}

/// Seasonal-naive forecast of frames `source_index+1 ..= source_index+L`.
pub fn seasonal_naive_forecast(
    profile: &SeasonalProfile,
    series: &TimeSeries,
    source_index: usize,
    horizon: usize,
) -> PredictedSequence {
    let naive = SeasonalNaive::new(profile.clone(), series.interval(), horizon);
    PredictedSequence {
        source_index,
        frames: naive.predict(series.frames()[source_index].timestamp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{fit_decomposition, DecompositionConfig};
    use crate::series::{CivilClock, SECONDS_PER_HOUR};
    use std::f64::consts::TAU;

    const MONDAY: i64 = 1_704_067_200;

    fn hourly(n: usize, f: impl Fn(usize) -> f64) -> TimeSeries {
        TimeSeries::from_rows(vec!["x".into()], MONDAY, SECONDS_PER_HOUR, (0..n).map(|i| vec![f(i)]).collect()).unwrap()
    }

    #[test]
    fn exact_model_gives_exact_forecasts() {
        let gen = |i: usize| {
            0.2 + 0.001 * i as f64
                + 0.1 * (TAU * (i % 24) as f64 / 24.0).cos()
                + if (i / 24) % 7 >= 5 { -0.05 } else { 0.02 }
        };
        let s = hourly(24 * 21, gen);
        let p = fit_decomposition(&s, &DecompositionConfig::default()).unwrap();
        for source in [0, 100, 400] {
            let f = seasonal_naive_forecast(&p, &s, source, 5);
            assert_eq!(f.frames.len(), 5);
            for (j, frame) in f.frames.iter().enumerate() {
                assert!((frame[0] - gen(source + j + 1)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn constant_series_constant_forecast() {
        let names = vec!["x".to_string()];
        let mut p = SeasonalProfile::zero(&names, CivilClock::utc());
        p.channels[0].trend.intercept = 0.3;
        let s = hourly(10, |_| 0.3);
        let f = seasonal_naive_forecast(&p, &s, 2, 4);
        assert!(f.frames.iter().all(|fr| fr == &vec![0.3]));
    }

    #[test]
    fn sinusoid_error_within_residual_std() {
        let s = hourly(24 * 21, |i| 0.5 + 0.3 * (TAU * i as f64 / 24.0).sin());
        let p = fit_decomposition(&s, &DecompositionConfig::default()).unwrap();
        let bound = p.channel(0).residual_std + 1e-9;
        for source in (0..s.len() - 5).step_by(13) {
            let f = seasonal_naive_forecast(&p, &s, source, 5);
            for (j, frame) in f.frames.iter().enumerate() {
                assert!((frame[0] - s.frames()[source + j + 1].values[0]).abs() <= bound);
            }
        }
    }
}
