//! Fixtures for the detection benchmarks.

use lti_core::forecast::{ForecastModel, GruForecaster, NetworkTopology};
use lti_core::{Frame, PredictionBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A warm buffer of uniform random frames and forecasts, with the index of
/// its newest frame.
pub fn random_buffer(seed: u64, horizon: usize, channels: usize) -> (PredictionBuffer, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buffer = PredictionBuffer::new(horizon, channels).expect("valid shape");
    let t = horizon;
    for i in 0..=t {
        let values = (0..channels).map(|_| rng.random::<f64>()).collect();
        buffer.push_actual(Frame::new(i as i64, values)).expect("in order");
        if i < t {
            let fc = (0..horizon)
                .map(|_| (0..channels).map(|_| rng.random::<f64>()).collect())
                .collect();
            buffer.push_forecast(fc, rng.random_range(0.0..0.5)).expect("alternating");
        }
    }
    (buffer, t)
}

/// Hourly frames of phase-shifted daily waves around 0.5.
pub fn wave_frames(n: usize, channels: usize) -> Vec<Frame> {
    (0..n)
        .map(|t| {
            let values = (0..channels)
                .map(|c| 0.5 + 0.4 * ((t as f64 + 3.0 * c as f64) * std::f64::consts::TAU / 24.0).sin())
                .collect();
            Frame::new(t as i64 * 3600, values)
        })
        .collect()
}

/// Randomly initialized forecaster without seasonal inputs.
pub fn plain_forecaster(channels: usize, hidden: usize, depth: usize, horizon: usize) -> GruForecaster {
    let topology = NetworkTopology::new(channels, false, hidden, depth, horizon).expect("valid topology");
    GruForecaster::new(ForecastModel::initialized(topology, 1), None).expect("plain model")
}

#[cfg(test)]
mod tests {
    use super::*;
    use lti_core::forecast::Forecaster;

    #[test]
    fn fixtures_are_warm_and_shaped() {
        let (b, t) = random_buffer(3, 5, 4);
        assert!(b.is_warm());
        assert_eq!(t, 5);
        let frames = wave_frames(30, 3);
        assert!(frames.iter().flat_map(|f| &f.values).all(|v| (0.0..=1.0).contains(v)));
        let mut f = plain_forecaster(3, 4, 1, 5);
        assert_eq!(f.forecast(&frames[0]).unwrap().len(), 5);
    }
}
