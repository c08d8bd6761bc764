use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lti_core::eval::{bench_detection, generate_synthetic, roc_auc_stream, BenchReport};
use lti_core::forecast::{ForecastModel, GruForecaster};
use lti_core::score::{CalibrationReport, ScoreStream, ScoringParams};
use lti_core::series::{format_timestamp, load_labels_csv, write_csv, write_labels_csv, LabelTrack};
use lti_core::{Error, ErrorKind, Result, SeasonalProfile};
use serde_json::{json, Value};

use crate::config::{Overrides, PipelineConfig};
use crate::pipeline::{self, artifact, read_json, write_json, TrainMetrics};

#[derive(Debug, Parser)]
#[command(name = "lti", version, about = "Streaming anomaly detection with local trend inconsistency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig> {
        PipelineConfig::resolve(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit trend and seasonal tables on the training split.
    Decompose(Common),
    /// Train the forecaster; `--seasonal off` trains the ablation model.
    Train(Common),
    /// Fit the logistic score mapping on the validation split.
    Calibrate(Common),
    /// Score the test split.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Also write per-frame source distances as JSON lines.
        #[arg(long)]
        diagnostics: bool,
        /// List frames whose anomaly score reaches this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// ROC curve and AUC of a score file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Score CSV; defaults to the detect output.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Label CSV; defaults to the dataset labels.
        #[arg(long = "label-file")]
        label_file: Option<PathBuf>,
        /// Also time the detection loop.
        #[arg(long)]
        bench: bool,
    },
    /// Write a built-in synthetic dataset as CSV.
    Generate(Common),
    /// Per-frame detection overhead across horizons.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,30")]
        horizons: Vec<usize>,
        /// Frames timed per horizon.
        #[arg(long, default_value_t = 500)]
        frames: usize,
    },
    /// decompose, train, calibrate, detect and evaluate for a preset.
    Repro {
        /// calit2, dodgers, synthetic2 or synthetic5.
        preset: String,
        #[command(flatten)]
        common: Common,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data | ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
    }
}

fn model_file(seasonal: bool) -> &'static str {
    if seasonal {
        "model.json"
    } else {
        "model-plain.json"
    }
}

fn load_profile(config: &PipelineConfig) -> Result<SeasonalProfile> {
    SeasonalProfile::load(config.out.join("profile.json"))
}

fn load_model(config: &PipelineConfig) -> Result<ForecastModel> {
    ForecastModel::load(config.out.join(model_file(config.seasonal)))
}

pub fn decompose(config: &PipelineConfig) -> Result<PathBuf> {
    let prepared = pipeline::prepare(config)?;
    let start = Instant::now();
    let profile = pipeline::fit_profile(config, &prepared)?;
    let elapsed = start.elapsed().as_secs_f64();
    let path = artifact(config, "profile.json")?;
    profile.save(&path)?;
    println!(
        "profile: {} channels x (24 + 7) entries, fitted in {:.3} s -> {}",
        profile.channel_count(),
        elapsed,
        path.display()
    );
    Ok(path)
}

pub fn train(config: &PipelineConfig) -> Result<TrainMetrics> {
    let prepared = pipeline::prepare(config)?;
    let profile = load_profile(config)?;
    let (model, metrics) = pipeline::train_model(config, &prepared, &profile, config.seasonal)?;
    let path = artifact(config, model_file(config.seasonal))?;
    model.save(&path)?;

    let metrics_path = artifact(config, "metrics.json")?;
    let mut all: Value = if metrics_path.exists() {
        read_json(&metrics_path)?
    } else {
        json!({})
    };
    let key = if config.seasonal { "seasonal" } else { "plain" };
    all[key] = serde_json::to_value(&metrics)?;
    if let (Some(s), Some(p)) = (all["seasonal"]["test_mse"].as_f64(), all["plain"]["test_mse"].as_f64()) {
        all["improvement"] = json!(1.0 - s / p);
    }
    write_json(&metrics_path, &all)?;
    println!(
        "trained {key} model: test mse {:.6}, {} epochs (best {}), {:.1} s -> {}",
        metrics.test_mse,
        metrics.epochs,
        metrics.best_epoch,
        metrics.wall_seconds,
        path.display()
    );
    Ok(metrics)
}

pub fn calibrate(config: &PipelineConfig) -> Result<(ScoringParams, CalibrationReport)> {
    let prepared = pipeline::prepare(config)?;
    let profile = load_profile(config)?;
    let model = load_model(config)?;
    let (params, report) = pipeline::calibrate_validation(config, &prepared, &model, &profile)?;
    write_json(&artifact(config, "params.json")?, &params)?;
    write_json(&artifact(config, "calibration.json")?, &report)?;
    println!(
        "calibrated: k {:.6}, x0 {:.6}, {} iterations{}",
        params.k,
        params.x0,
        report.iterations,
        if report.converged { "" } else { " (not converged)" }
    );
    Ok((params, report))
}

pub fn detect(config: &PipelineConfig, diagnostics: bool, threshold: Option<f64>) -> Result<ScoreStream> {
    if let Some(th) = threshold {
        if !(0.0..=1.0).contains(&th) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {th}")));
        }
    }
    let prepared = pipeline::prepare(config)?;
    let profile = load_profile(config)?;
    let model = load_model(config)?;
    let params: ScoringParams = read_json(&config.out.join("params.json"))?;
    params.validate()?;
    let stream = pipeline::detect_test(config, &prepared, &model, &profile, &params)?;
    let path = artifact(config, "scores.csv")?;
    stream.write_csv(&path)?;
    if diagnostics {
        let diag = artifact(config, "diagnostics.jsonl")?;
        let file = std::fs::File::create(&diag).map_err(|e| Error::io(&diag, e))?;
        stream.write_diagnostics(std::io::BufWriter::new(file))?;
    }
    let low = stream.records.iter().filter(|r| r.flags.low_confidence).count();
    println!(
        "scored {} frames ({} warm-up, {} low-confidence) -> {}",
        stream.len(),
        stream.warm_up.len(),
        low,
        path.display()
    );
    if let Some(th) = threshold {
        let alarms: Vec<_> = stream.records.iter().filter(|r| r.anomaly_score >= th).collect();
        println!("{} frames with score >= {th}", alarms.len());
        for r in alarms {
            println!("  {} {:.6}", format_timestamp(r.timestamp), r.anomaly_score);
        }
    }
    Ok(stream)
}

pub fn evaluate(config: &PipelineConfig, scores: Option<&Path>, label_file: Option<&Path>, bench: bool) -> Result<f64> {
    let scores_path = scores.map(Path::to_path_buf).unwrap_or_else(|| config.out.join("scores.csv"));
    let stream = ScoreStream::read_csv(&scores_path, config.horizon)?;
    let labels: LabelTrack = match label_file {
        Some(p) => load_labels_csv(p)?,
        None => pipeline::prepare(config)?.test_labels()?,
    };
    let curve = roc_auc_stream(&stream, &labels)?;
    let path = artifact(config, "roc.csv")?;
    curve.write_csv(&path)?;
    println!("auc {:.6} over {} frames -> {}", curve.auc, stream.len(), path.display());
    if bench {
        let reports = bench_trained(config)?;
        write_json(&artifact(config, "bench.json")?, &reports)?;
        for r in &reports {
            println!("lanes {}: mean {:.4} ms/frame, p99 {:.4} ms", r.lanes, r.mean_ms, r.p99_ms);
        }
    }
    Ok(curve.auc)
}

fn bench_trained(config: &PipelineConfig) -> Result<Vec<BenchReport>> {
    let prepared = pipeline::prepare(config)?;
    let profile = load_profile(config)?;
    let model = load_model(config)?;
    let params: ScoringParams = read_json(&config.out.join("params.json"))?;
    let forecaster = GruForecaster::new(model, config.seasonal.then_some(profile))?;
    bench_detection(
        &forecaster,
        &prepared.series.frames()[prepared.ranges.test.clone()],
        &params,
        config.lanes,
    )
}

/// Untrained models of the configured topology, timed on the dataset frames.
pub fn bench(config: &PipelineConfig, horizons: &[usize], frames: usize) -> Result<Vec<BenchReport>> {
    let prepared = pipeline::prepare(config)?;
    let profile = pipeline::fit_profile(config, &prepared)?;
    let n = frames.min(prepared.series.len());
    let mut reports = Vec::new();
    for &h in horizons {
        let c = PipelineConfig {
            horizon: h,
            ..config.clone()
        };
        let model = ForecastModel::initialized(c.topology(prepared.series.channels(), c.seasonal)?, c.seed);
        let forecaster = GruForecaster::new(model, c.seasonal.then(|| profile.clone()))?;
        let params = ScoringParams::default();
        for r in bench_detection(&forecaster, &prepared.series.frames()[..n], &params, c.lanes)? {
            println!("L {:>3}, lanes {}: mean {:.4} ms/frame, p99 {:.4} ms", h, r.lanes, r.mean_ms, r.p99_ms);
            reports.push(r);
        }
    }
    write_json(&artifact(config, "bench.json")?, &reports)?;
    Ok(reports)
}

pub fn generate(config: &PipelineConfig) -> Result<()> {
    let spec = pipeline::synthetic_spec(&config.dataset, config.seed)?;
    let (series, labels) = generate_synthetic(&spec)?;
    let series_path = artifact(config, "series.csv")?;
    let labels_path = artifact(config, "labels.csv")?;
    write_csv(&series, &series_path)?;
    write_labels_csv(&labels, &labels_path)?;
    println!(
        "{} frames x {} channels, {:.1}% anomalous -> {}",
        series.len(),
        series.channels(),
        100.0 * labels.anomaly_count() as f64 / labels.len() as f64,
        series_path.display()
    );
    Ok(())
}

pub fn repro(config: &PipelineConfig) -> Result<f64> {
    decompose(config)?;
    train(config)?;
    calibrate(config)?;
    detect(config, false, None)?;
    evaluate(config, None, None, false)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose(c) => decompose(&c.resolve()?).map(drop),
        Command::Train(c) => train(&c.resolve()?).map(drop),
        Command::Calibrate(c) => calibrate(&c.resolve()?).map(drop),
        Command::Detect {
            common,
            diagnostics,
            threshold,
        } => detect(&common.resolve()?, diagnostics, threshold).map(drop),
        Command::Evaluate {
            common,
            scores,
            label_file,
            bench,
        } => evaluate(&common.resolve()?, scores.as_deref(), label_file.as_deref(), bench).map(drop),
        Command::Generate(c) => generate(&c.resolve()?),
        Command::Bench {
            common,
            horizons,
            frames,
        } => bench(&common.resolve()?, &horizons, frames).map(drop),
        Command::Repro { preset, mut common } => {
            if common.overrides.dataset.is_none() {
                common.overrides.dataset = Some(preset);
            }
            repro(&common.resolve()?).map(drop)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::io("/missing", std::io::ErrorKind::NotFound.into())), 3);
        assert_eq!(exit_code(&Error::EmptySequence), 3);
        assert_eq!(exit_code(&Error::DegenerateReference { stdev: 0.0 }), 4);
    }

    #[test]
    fn model_files_per_ablation_arm() {
        assert_ne!(model_file(true), model_file(false));
    }

    #[test]
    fn threshold_outside_unit_interval_is_config_error() {
        let config = PipelineConfig::preset("synthetic2").unwrap();
        let err = detect(&config, false, Some(1.5)).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
