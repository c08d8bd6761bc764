//! Flat key-value pipeline configuration.
//!
//! Values are layered: preset defaults, then an optional TOML file, then
//! command-line flags. Every key has a flag of the same name.

use std::path::{Path, PathBuf};

use clap::Args;
use lti_core::decomp::{DecompositionConfig, TrendKind};
use lti_core::forecast::{NetworkTopology, TrainingConfig};
use lti_core::series::CivilClock;
use lti_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PipelineConfig {
    /// calit2, dodgers, synthetic2, synthetic5 or csv.
    pub dataset: String,
    /// Dataset directory, or the series CSV for `csv`.
    pub data: Option<PathBuf>,
    /// Label CSV for `csv`.
    pub labels: Option<PathBuf>,
    /// Output directory for every artifact.
    pub out: PathBuf,
    /// Aggregate to this interval (seconds) before anything else.
    pub aggregate: Option<i64>,
    /// sum or mean.
    pub reducer: String,
    pub fill_gaps: bool,
    pub utc_offset_hours: i64,
    pub train_len: usize,
    pub val_len: usize,
    pub test_len: usize,
    pub daily_order: usize,
    pub weekly_order: usize,
    /// Hinge knots spread evenly over the training span; 0 for a straight line.
    pub trend_knots: usize,
    /// Forecast horizon and number of sources per frame.
    pub horizon: usize,
    pub time_steps: usize,
    pub hidden: usize,
    pub depth: usize,
    pub seasonal: bool,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub c: f64,
    pub max_iterations: usize,
    pub lanes: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: "csv".into(),
            data: None,
            labels: None,
            out: PathBuf::from("out"),
            aggregate: None,
            reducer: "sum".into(),
            fill_gaps: false,
            utc_offset_hours: 0,
            train_len: 0,
            val_len: 0,
            test_len: 0,
            daily_order: 4,
            weekly_order: 3,
            trend_knots: 0,
            horizon: 5,
            time_steps: 72,
            hidden: 20,
            depth: 2,
            seasonal: true,
            epochs: 200,
            patience: 10,
            learning_rate: 0.001,
            weight_decay: 6e-6,
            seed: 7,
            c: 1.0,
            max_iterations: 100,
            lanes: 1,
        }
    }
}

pub const PRESETS: [&str; 4] = ["calit2", "dodgers", "synthetic2", "synthetic5"];

impl PipelineConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            dataset: name.into(),
            out: PathBuf::from("out").join(name),
            ..Default::default()
        };
        let config = match name {
            "calit2" => Self {
                train_len: 1600,
                val_len: 300,
                test_len: 500,
                ..base
            },
            "dodgers" => Self {
                train_len: 2500,
                val_len: 500,
                test_len: 1000,
                ..base
            },
            "synthetic2" => Self {
                train_len: 1600,
                val_len: 300,
                test_len: 500,
                ..base
            },
            "synthetic5" => Self {
                train_len: 1600,
                val_len: 300,
                test_len: 500,
                depth: 3,
                ..base
            },
            "csv" => base,
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(config)
    }

    /// Preset for `dataset` (or the file's own `dataset` key), then the file, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let file_table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let flag_table = toml::Table::try_from(overrides).map_err(|e| Error::Config(e.to_string()))?;
        let dataset = flag_table
            .get("dataset")
            .or_else(|| file_table.get("dataset"))
            .and_then(|v| v.as_str())
            .unwrap_or("csv")
            .to_string();
        let mut table = toml::Table::try_from(Self::preset(&dataset)?).map_err(|e| Error::Config(e.to_string()))?;
        table.extend(file_table);
        table.extend(flag_table);
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.time_steps == 0 {
            return fail("time-steps must be at least 1".into());
        }
        if self.hidden == 0 || self.depth == 0 {
            return fail("hidden and depth must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return fail("learning-rate must be positive and weight-decay non-negative".into());
        }
        if !(self.c > 0.0) {
            return fail("c must be positive".into());
        }
        if self.lanes == 0 || self.max_iterations == 0 {
            return fail("lanes and max-iterations must be at least 1".into());
        }
        if !matches!(self.reducer.as_str(), "sum" | "mean") {
            return fail(format!("reducer must be sum or mean, got {:?}", self.reducer));
        }
        if self.train_len == 0 {
            return fail("train-len must be positive".into());
        }
        Ok(())
    }

    pub fn clock(&self) -> CivilClock {
        CivilClock::with_offset_hours(self.utc_offset_hours)
    }

    pub fn decomposition(&self) -> DecompositionConfig {
        let trend = match self.trend_knots {
            0 => TrendKind::Linear,
            knots => TrendKind::PiecewiseLinear { knots },
        };
        DecompositionConfig {
            daily_fourier_order: self.daily_order,
            weekly_fourier_order: self.weekly_order,
            trend,
            clock: self.clock(),
        }
    }

    pub fn topology(&self, channels: usize, seasonal: bool) -> Result<NetworkTopology> {
        NetworkTopology::new(channels, seasonal, self.hidden, self.depth, self.horizon)
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            time_steps: self.time_steps,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Same-named flags for every configuration key.
#[derive(Debug, Clone, Default, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Overrides {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reducer: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill_gaps: Option<bool>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utc_offset_hours: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_len: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub daily_order: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weekly_order: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend_knots: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// on or off.
    #[arg(long, value_parser = parse_switch)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seasonal: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lanes: Option<usize>,
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let c = PipelineConfig::preset(name).unwrap();
            assert!(c.validate().is_ok(), "{name}");
        }
        assert!(PipelineConfig::preset("nope").is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "dataset = \"dodgers\"\nhorizon = 10\nc = 2.0\n").unwrap();
        let flags = Overrides {
            horizon: Some(20),
            ..Default::default()
        };
        let c = PipelineConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!(c.dataset, "dodgers");
        assert_eq!(c.train_len, 2500);
        assert_eq!(c.horizon, 20);
        assert_eq!(c.c, 2.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "dataset = \"calit2\"\nwhat = 1\n").unwrap();
        assert!(matches!(
            PipelineConfig::resolve(Some(&path), &Overrides::default()),
            Err(Error::Config(_))
        ));
        let flags = Overrides {
            dataset: Some("calit2".into()),
            time_steps: Some(0),
            ..Default::default()
        };
        assert!(matches!(PipelineConfig::resolve(None, &flags), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let c = PipelineConfig::preset("synthetic5").unwrap();
        let back: PipelineConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn trend_knots_select_trend() {
        let mut c = PipelineConfig::preset("calit2").unwrap();
        assert_eq!(c.decomposition().trend, TrendKind::Linear);
        c.trend_knots = 3;
        assert_eq!(c.decomposition().trend, TrendKind::PiecewiseLinear { knots: 3 });
    }
}
