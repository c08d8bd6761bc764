//! Anomaly scores from LTI: logistic mapping, its self-calibration, and the
//! chronological detection loop.

mod calibrate;
mod detect;
mod logistic;

pub use calibrate::{
    calibrate, calibrate_terms, reference_terms, CalibrationOptions, CalibrationReport, CONVERGENCE_TOLERANCE,
    STDEV_FLOOR,
};
pub use detect::{detect_precomputed, detect_with_overrides, Detector, Flags, ScoreEngine, ScoreRecord, ScoreStream};
pub use logistic::{phi, ScoringParams};
