//! Pipeline stages shared by the commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lti_core::datasets::{calit2, dodgers};
use lti_core::eval::{generate_synthetic, random_injections, ChannelSpec, SyntheticSpec};
use lti_core::forecast::{mse, train, ForecastModel, Forecaster, GruForecaster, TrainingSet};
use lti_core::lti::Lanes;
use lti_core::score::{calibrate, CalibrationOptions, CalibrationReport, Detector, ScoreStream, ScoringParams};
use lti_core::series::{
    aggregate_to_interval, fit_normalization, load_csv, load_labels_csv, normalize, CivilClock, CsvSchema, LabelTrack,
    NormalizationParams, Reducer, SplitRanges, TimeSeries, SECONDS_PER_HOUR,
};
use lti_core::{fit_decomposition, Error, Result, SeasonalProfile};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

/// Monday 2024-01-01 00:00 UTC.
const SYNTHETIC_START: i64 = 1_704_067_200;
const SYNTHETIC_LENGTH: usize = 2400;

/// Environment variable naming a directory with one sub-directory per public dataset.
pub const DATA_DIR_ENV: &str = "LTI_DATA_DIR";

fn office_channel(name: &str, level: f64, daily: f64, weekly: f64, peak_hour: f64) -> ChannelSpec {
    ChannelSpec {
        name: name.into(),
        level,
        trend: 0.0005,
        daily_amplitude: daily,
        weekly_amplitude: weekly,
        weekend_daily_factor: 0.15,
        peak_hour,
    }
}

/// Built-in synthetic datasets: two office-like flow channels, or five
/// server-like channels with about 12% injected contamination.
pub fn synthetic_spec(name: &str, seed: u64) -> Result<SyntheticSpec> {
    let (channels, fraction, magnitudes) = match name {
        "synthetic2" => (
            vec![
                office_channel("in", 10.0, 6.0, 4.0, 9.0),
                office_channel("out", 10.0, 6.0, 4.0, 17.0),
            ],
            0.04,
            4.0..8.0,
        ),
        "synthetic5" => (
            vec![
                office_channel("requests", 20.0, 8.0, 5.0, 14.0),
                office_channel("cpu", 40.0, 12.0, 6.0, 15.0),
                office_channel("memory", 50.0, 5.0, 3.0, 16.0),
                office_channel("io", 15.0, 4.0, 4.0, 11.0),
                office_channel("errors", 5.0, 2.0, 1.0, 13.0),
            ],
            0.12,
            6.0..14.0,
        ),
        other => return Err(Error::Config(format!("no synthetic dataset named {other:?}"))),
    };
    let m = channels.len();
    Ok(SyntheticSpec {
        channels,
        length: SYNTHETIC_LENGTH,
        start: SYNTHETIC_START,
        interval: SECONDS_PER_HOUR,
        noise_std: 0.5,
        injections: random_injections(seed ^ 0x5eed, SYNTHETIC_LENGTH, 24, fraction, 1..=4, magnitudes, m),
        seed,
        clock: CivilClock::utc(),
    })
}

fn dataset_dir(config: &PipelineConfig) -> PathBuf {
    if let Some(d) = &config.data {
        return d.clone();
    }
    let root = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    root.join(&config.dataset)
}

/// Raw series and labels named by the configuration.
pub fn load_dataset(config: &PipelineConfig) -> Result<(TimeSeries, Option<LabelTrack>)> {
    let (series, labels) = match config.dataset.as_str() {
        "calit2" => calit2::load(dataset_dir(config)).map(|(s, l)| (s, Some(l)))?,
        "dodgers" => dodgers::load(dataset_dir(config)).map(|(s, l)| (s, Some(l)))?,
        "synthetic2" | "synthetic5" => {
            let (s, l) = generate_synthetic(&synthetic_spec(&config.dataset, config.seed)?)?;
            (s, Some(l))
        }
        "csv" => {
            let path = config
                .data
                .as_ref()
                .ok_or_else(|| Error::Config("dataset csv needs data = <file>".into()))?;
            let schema = CsvSchema {
                fill_gaps: config.fill_gaps,
                ..Default::default()
            };
            let s = load_csv(path, &schema)?;
            let l = config.labels.as_ref().map(load_labels_csv).transpose()?;
            (s, l)
        }
        other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
    };
    let series = match config.aggregate {
        Some(target) if target != series.interval() => {
            let reducer = if config.reducer == "mean" { Reducer::Mean } else { Reducer::Sum };
            aggregate_to_interval(&series, target, reducer)?
        }
        _ => series,
    };
    Ok((series, labels))
}

/// Normalized series with its splits; normalization is fitted on the training span.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: TimeSeries,
    pub labels: Option<LabelTrack>,
    pub ranges: SplitRanges,
    pub normalization: NormalizationParams,
}

impl Prepared {
    pub fn train(&self) -> TimeSeries {
        self.series.slice(self.ranges.train.clone())
    }

    /// Labels of the test span, aligned by timestamp.
    pub fn test_labels(&self) -> Result<LabelTrack> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config("dataset has no labels".into()))?;
        let ts = self.series.slice(self.ranges.test.clone()).timestamps();
        LabelTrack::new(ts.clone(), labels.aligned_to(&ts)?)
    }
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    let (raw, labels) = load_dataset(config)?;
    let ranges = SplitRanges::new(raw.len(), config.train_len, config.val_len, config.test_len)?;
    let normalization = fit_normalization(&raw.slice(ranges.train.clone()));
    let series = normalize(&raw, &normalization)?;
    Ok(Prepared {
        series,
        labels,
        ranges,
        normalization,
    })
}

pub fn fit_profile(config: &PipelineConfig, prepared: &Prepared) -> Result<SeasonalProfile> {
    fit_decomposition(&prepared.train(), &config.decomposition())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub seasonal: bool,
    pub test_mse: f64,
    pub validation_mse: Option<f64>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub wall_seconds: f64,
    pub output_width: usize,
}

/// Trains a forecaster on the training span with early stopping on validation.
pub fn train_model(
    config: &PipelineConfig,
    prepared: &Prepared,
    profile: &SeasonalProfile,
    seasonal: bool,
) -> Result<(ForecastModel, TrainMetrics)> {
    let topology = config.topology(prepared.series.channels(), seasonal)?;
    let set = TrainingSet::new(&prepared.series, seasonal.then_some(profile), topology)?;
    let start = Instant::now();
    let outcome = train(
        ForecastModel::initialized(topology, config.seed),
        &set,
        prepared.ranges.train.clone(),
        prepared.ranges.validation.clone(),
        &config.training(),
    )?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let model = outcome.model;
    let test_mse = mse(&model, &set, prepared.ranges.test.clone())?;
    let metrics = TrainMetrics {
        seasonal,
        test_mse,
        validation_mse: model.metadata.best_validation_mse,
        epochs: model.metadata.epochs_run,
        best_epoch: model.metadata.best_epoch,
        wall_seconds,
        output_width: topology.output_width,
    };
    Ok((model, metrics))
}

fn forecaster(model: &ForecastModel, profile: &SeasonalProfile) -> Result<GruForecaster> {
    let profile = model.topology.seasonal.then(|| profile.clone());
    GruForecaster::new(model.clone(), profile)
}

/// Forecasts issued at every frame of `prepared.series[..end]`, hidden state carried from frame 0.
pub fn forecasts_until(model: &ForecastModel, profile: &SeasonalProfile, prepared: &Prepared, end: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut f = forecaster(model, profile)?;
    prepared.series.frames()[..end].iter().map(|frame| f.forecast(frame)).collect()
}

/// Fits the logistic on the validation span.
pub fn calibrate_validation(
    config: &PipelineConfig,
    prepared: &Prepared,
    model: &ForecastModel,
    profile: &SeasonalProfile,
) -> Result<(ScoringParams, CalibrationReport)> {
    let range = prepared.ranges.validation.clone();
    let forecasts = forecasts_until(model, profile, prepared, range.end)?;
    let options = CalibrationOptions {
        c: config.c,
        max_iterations: config.max_iterations,
    };
    let (mut params, report) = calibrate(&prepared.series.frames()[range.clone()], &forecasts[range], &options)?;
    params.calibrated_on = Some("validation".into());
    Ok((params, report))
}

/// Runs the detection loop over the test span, with the forecaster's state
/// warmed on every earlier frame.
pub fn detect_test(
    config: &PipelineConfig,
    prepared: &Prepared,
    model: &ForecastModel,
    profile: &SeasonalProfile,
    params: &ScoringParams,
) -> Result<ScoreStream> {
    let mut f = forecaster(model, profile)?;
    let range = prepared.ranges.test.clone();
    for frame in &prepared.series.frames()[..range.start] {
        f.forecast(frame)?;
    }
    let mut detector = Detector::new(f, params.clone(), Lanes::new(config.lanes)?)?;
    detector.run(&prepared.series.frames()[range])?;
    Ok(detector.into_stream())
}

/// `dir/name`, creating `dir` first.
pub fn artifact(config: &PipelineConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    Ok(config.out.join(name))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
