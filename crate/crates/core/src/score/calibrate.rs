use serde::{Deserialize, Serialize};

use super::logistic::{phi, ScoringParams};
use crate::error::{Error, Result};
use crate::lti::{combine_terms, decay_weights, wlsdist_matrix, Lanes, PredictionBuffer};
use crate::series::Frame;

/// Smallest LTI standard deviation that can set `k`.
pub const STDEV_FLOOR: f64 = 1e-9;
/// Relative change in both `k` and `x0` that counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub c: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub iterations: usize,
    pub k: f64,
    pub x0: f64,
    /// `(k, x0)` after each sweep.
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
    /// LTI values of the last sweep, frames `L..r`.
    #[serde(skip)]
    pub lti: Vec<f64>,
    /// Anomaly scores of the last sweep, frames `L..r`.
    #[serde(skip)]
    pub anomaly_scores: Vec<f64>,
}

/// Per-frame source distances of a reference run, frames `L..r`.
pub fn reference_terms(frames: &[Frame], forecasts: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    if frames.len() != forecasts.len() {
        return Err(Error::LengthMismatch {
            left: frames.len(),
            right: forecasts.len(),
        });
    }
    let horizon = forecasts.first().ok_or(Error::EmptySequence)?.len();
    if frames.len() <= horizon {
        return Err(Error::TooShort {
            needed: horizon + 1,
            have: frames.len(),
        });
    }
    let decay = decay_weights(horizon)?;
    let lanes = Lanes::sequential();
    let mut buffer = PredictionBuffer::new(horizon, frames[0].values.len())?;
    let mut out = Vec::with_capacity(frames.len() - horizon);
    for (frame, fc) in frames.iter().zip(forecasts) {
        let t = buffer.push_actual(frame.clone())?;
        if buffer.is_warm() {
            out.push(wlsdist_matrix(t, &buffer, &decay, &lanes)?);
        }
        buffer.push_forecast(fc.clone(), 0.0)?;
    }
    Ok(out)
}

fn mean_and_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn relative_change(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((new - old) / old).abs()
    }
}

/// Fixed-point fit of `(k, x0)` on a reference run.
///
/// Starts from `k = 1`, `x0 = 0.5` and all scores 0. Each sweep scores frames
/// `L..r` in order, overwriting their scores so later frames see them, then
/// sets `k = c / stdev(LTI)` and `x0 = mean(LTI)`.
pub fn calibrate(
    frames: &[Frame],
    forecasts: &[Vec<Vec<f64>>],
    options: &CalibrationOptions,
) -> Result<(ScoringParams, CalibrationReport)> {
    let terms = reference_terms(frames, forecasts)?;
    calibrate_terms(&terms, options)
}

/// [`calibrate`] over precomputed per-frame source distances.
pub fn calibrate_terms(terms: &[Vec<f64>], options: &CalibrationOptions) -> Result<(ScoringParams, CalibrationReport)> {
    if !(options.c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {}", options.c)));
    }
    if options.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    let horizon = terms.first().ok_or(Error::EmptySequence)?.len();
    let mut params = ScoringParams {
        c: options.c,
        ..Default::default()
    };
    // Score history indexed by frame; frames before L stay 0.
    let mut scores = vec![0.0; horizon + terms.len()];
    let mut lti = vec![0.0; terms.len()];
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..options.max_iterations {
        for (j, row) in terms.iter().enumerate() {
            let t = horizon + j;
            let value = match combine_terms(&scores[t - horizon..t], row) {
                Ok((v, _)) => v,
                Err(Error::DegenerateWeights { .. }) => row.iter().sum::<f64>() / row.len() as f64,
                Err(e) => return Err(e),
            };
            lti[j] = value;
            scores[t] = phi(value, &params);
        }
        let (mean, stdev) = mean_and_stdev(&lti);
        if stdev < STDEV_FLOOR {
            return Err(Error::DegenerateReference { stdev });
        }
        let k = options.c / stdev;
        let done = relative_change(k, params.k) < CONVERGENCE_TOLERANCE
            && relative_change(mean, params.x0) < CONVERGENCE_TOLERANCE;
        params.k = k;
        params.x0 = mean;
        trace.push((k, mean));
        if done {
            converged = true;
            break;
        }
    }

    params.iterations = trace.len();
    let report = CalibrationReport {
        iterations: trace.len(),
        k: params.k,
        x0: params.x0,
        trace,
        converged,
        anomaly_scores: scores[horizon..].to_vec(),
        lti,
    };
    Ok((params, report))
}
