//! Short-horizon forecasters. Each call consumes one observed frame and
//! returns the next `L` frames.

mod gru;
mod model;
mod naive;
mod train;

pub use gru::{gru_cell_forward, GruCell, GruCellParams};
pub use model::{ForecastModel, HiddenState, NetworkTopology, ParamGroup, ParamLayout, TrainingMetadata};
pub use naive::{seasonal_naive_forecast, SeasonalNaive};
pub use train::{build_input, mse, train, window_loss_and_gradient, Adam, TrainOutcome, TrainingConfig, TrainingSet};

use crate::decomp::SeasonalProfile;
use crate::error::{Error, Result};
use crate::series::Frame;

/// Forecast of frames `source_index+1 ..= source_index+L`, issued at `source_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSequence {
    pub source_index: usize,
    pub frames: Vec<Vec<f64>>,
}

pub trait Forecaster {
    fn channels(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Consumes the frame observed now and returns `horizon()` predicted frames.
    fn forecast(&mut self, frame: &Frame) -> Result<Vec<Vec<f64>>>;
    fn reset(&mut self);
}

/// Stateful wrapper running a [`ForecastModel`] one frame at a time.
#[derive(Debug, Clone)]
pub struct GruForecaster {
    model: ForecastModel,
    profile: Option<SeasonalProfile>,
    state: HiddenState,
    last_timestamp: Option<i64>,
}

impl GruForecaster {
    pub fn new(model: ForecastModel, profile: Option<SeasonalProfile>) -> Result<Self> {
        if model.topology.seasonal {
            match &profile {
                None => return Err(Error::Config("seasonal model needs a seasonal profile".into())),
                Some(p) if p.channel_count() != model.topology.channels => {
                    return Err(Error::ChannelMismatch {
                        expected: model.topology.channels,
                        got: p.channel_count(),
                    })
                }
                _ => {}
            }
        }
        let state = HiddenState::zeros(&model.topology);
        Ok(Self {
            model,
            profile,
            state,
            last_timestamp: None,
        })
    }

    pub fn model(&self) -> &ForecastModel {
        &self.model
    }

    pub fn state(&self) -> &HiddenState {
        &self.state
    }
}

impl Forecaster for GruForecaster {
    fn channels(&self) -> usize {
        self.model.topology.channels
    }

    fn horizon(&self) -> usize {
        self.model.topology.horizon
    }

    fn forecast(&mut self, frame: &Frame) -> Result<Vec<Vec<f64>>> {
        if frame.channels() != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                got: frame.channels(),
            });
        }
        if let Some(last) = self.last_timestamp {
            if frame.timestamp <= last {
                return Err(Error::OutOfOrder {
                    got: frame.timestamp,
                    last,
                });
            }
        }
        let input = build_input(&self.model.topology, self.profile.as_ref(), frame.timestamp, &frame.values)?;
        let y = self.model.step(&mut self.state, &input)?;
        self.last_timestamp = Some(frame.timestamp);
        Ok(y.chunks_exact(self.channels())
            .map(|c| c.iter().map(|v| v.clamp(0.0, 1.0)).collect())
            .collect())
    }

    fn reset(&mut self) {
        self.state = HiddenState::zeros(&self.model.topology);
        self.last_timestamp = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::CivilClock;

    fn frames(n: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame::new(i as i64 * 3600, vec![(i % 7) as f64 / 7.0, 0.5]))
            .collect()
    }

    #[test]
    fn output_shape_and_bounds() {
        let t = NetworkTopology::new(2, false, 6, 2, 4).unwrap();
        let mut f = GruForecaster::new(ForecastModel::initialized(t, 5), None).unwrap();
        for fr in frames(10) {
            let out = f.forecast(&fr).unwrap();
            assert_eq!(out.len(), 4);
            assert!(out.iter().all(|r| r.len() == 2 && r.iter().all(|v| (0.0..=1.0).contains(v))));
        }
    }

    #[test]
    fn reset_replays_identically() {
        let t = NetworkTopology::new(2, true, 5, 1, 3).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let profile = SeasonalProfile::zero(&names, CivilClock::utc());
        let mut f = GruForecaster::new(ForecastModel::initialized(t, 8), Some(profile)).unwrap();
        let first: Vec<_> = frames(12).iter().map(|fr| f.forecast(fr).unwrap()).collect();
        f.reset();
        let second: Vec<_> = frames(12).iter().map(|fr| f.forecast(fr).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn state_carries_between_calls() {
        let t = NetworkTopology::new(2, false, 5, 1, 2).unwrap();
        let mut f = GruForecaster::new(ForecastModel::initialized(t, 2), None).unwrap();
        let fr = frames(3);
        f.forecast(&fr[0]).unwrap();
        let warm = f.forecast(&fr[1]).unwrap();
        f.reset();
        let cold = f.forecast(&Frame::new(10_000, fr[1].values.clone())).unwrap();
        assert_ne!(warm, cold);
    }

    #[test]
    fn rejects_regressing_timestamps_and_bad_width() {
        let t = NetworkTopology::new(2, false, 3, 1, 2).unwrap();
        let mut f = GruForecaster::new(ForecastModel::initialized(t, 0), None).unwrap();
        f.forecast(&Frame::new(100, vec![0.1, 0.2])).unwrap();
        assert!(matches!(f.forecast(&Frame::new(100, vec![0.1, 0.2])), Err(Error::OutOfOrder { .. })));
        assert!(matches!(f.forecast(&Frame::new(200, vec![0.1])), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn zero_weights_forecast_zero() {
        let t = NetworkTopology::new(2, false, 4, 2, 5).unwrap();
        let mut f = GruForecaster::new(ForecastModel::zeros(t), None).unwrap();
        let out = f.forecast(&Frame::new(0, vec![0.7, 0.2])).unwrap();
        assert_eq!(out, vec![vec![0.0; 2]; 5]);
    }

    #[test]
    fn seasonal_model_requires_profile() {
        let t = NetworkTopology::new(2, true, 3, 1, 2).unwrap();
        assert!(GruForecaster::new(ForecastModel::zeros(t), None).is_err());
    }
}
