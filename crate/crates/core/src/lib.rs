//! Streaming, unsupervised anomaly detection for multi-channel time series
//! with daily and weekly seasonality.
//!
//! The pipeline has four stages:
//!
//! 1. [`series`] ingests, aggregates, normalizes and splits fixed-interval series.
//! 2. [`decomp`] fits an additive trend + Fourier model per channel and exports
//!    24-hour and 7-day seasonal lookup tables.
//! 3. [`forecast`] turns every arriving frame (plus its seasonal features) into a
//!    forecast of the next `L` frames with a stacked GRU network.
//! 4. [`lti`] and [`score`] compare each new frame with the `L` forecasts that
//!    cover it (local trend inconsistency), weight each forecast by how normal its
//!    source frame looked, and map the result to an anomaly probability.
//!
//! [`eval`] holds ROC/AUC evaluation, a synthetic data generator and the
//! per-frame overhead benchmark.

pub mod datasets;
pub mod decomp;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod lti;
pub mod score;
pub mod series;

pub use decomp::{fit_decomposition, seasonal_features, DecompositionConfig, SeasonalProfile, TrendKind};
pub use error::{Error, ErrorKind, Result};
pub use eval::{generate_synthetic, roc_auc, BenchReport, RocCurve, SyntheticSpec};
pub use forecast::{
    ForecastModel, Forecaster, GruForecaster, NetworkTopology, PredictedSequence, SeasonalNaive,
    TrainingConfig,
};
pub use lti::{decay_weights, dfdist, lsdist, lti_matrix, lti_scalar, wlsdist, DecayVector, Lanes, PredictionBuffer};
pub use score::{calibrate, phi, CalibrationOptions, CalibrationReport, Detector, ScoreRecord, ScoreStream, ScoringParams};
pub use series::{CivilClock, Frame, LabelTrack, LocalSequence, NormalizationParams, TimeSeries};
