use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::Forecaster;
use crate::lti::Lanes;
use crate::score::{Detector, ScoringParams};
use crate::series::Frame;

/// Per-frame detection latency for one lane count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub horizon: usize,
    pub channels: usize,
    pub lanes: usize,
    pub frames: usize,
    /// Hash of the produced anomaly-score bits.
    pub score_checksum: String,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[rank]
}

fn fnv1a(values: impl Iterator<Item = f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Times each detection step (score, forecast, buffer) over `frames`, once
/// for every lane count in `1..=max_lanes`. Lane pools are forced on
/// regardless of problem size.
pub fn bench_detection<F: Forecaster + Clone>(
    forecaster: &F,
    frames: &[Frame],
    params: &ScoringParams,
    max_lanes: usize,
) -> Result<Vec<BenchReport>> {
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut reports = Vec::new();
    for lanes in 1..=max_lanes.max(1) {
        let pool = Lanes::new(lanes)?.with_min_work(0);
        let mut f = forecaster.clone();
        f.reset();
        let mut detector = Detector::new(f, params.clone(), pool)?;
        let mut times = Vec::with_capacity(frames.len());
        for frame in frames {
            let start = Instant::now();
            let record = detector.step(frame)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            if record.is_some() {
                times.push(elapsed);
            }
        }
        if times.is_empty() {
            return Err(Error::TooShort {
                needed: forecaster.horizon() + 1,
                have: frames.len(),
            });
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        times.sort_by(f64::total_cmp);
        reports.push(BenchReport {
            mean_ms: mean,
            p50_ms: percentile(&times, 0.5),
            p99_ms: percentile(&times, 0.99),
            horizon: forecaster.horizon(),
            channels: forecaster.channels(),
            lanes,
            frames: times.len(),
            score_checksum: fnv1a(detector.stream().anomaly_scores().into_iter()),
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{ForecastModel, GruForecaster, NetworkTopology};

    #[test]
    fn reports_per_lane_with_identical_scores() {
        let t = NetworkTopology::new(2, false, 8, 2, 5).unwrap();
        let f = GruForecaster::new(ForecastModel::initialized(t, 1), None).unwrap();
        let frames: Vec<Frame> = (0..60)
            .map(|i| Frame::new(i * 3600, vec![(i % 5) as f64 / 5.0, 0.3]))
            .collect();
        let reports = bench_detection(&f, &frames, &ScoringParams::default(), 2).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].score_checksum, reports[1].score_checksum);
        for r in &reports {
            assert_eq!(r.frames, 55);
            assert!(r.mean_ms > 0.0 && r.p50_ms <= r.p99_ms);
        }
    }
}
