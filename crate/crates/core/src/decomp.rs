//! Additive trend + seasonality decomposition.
//!
//! Each channel is fitted independently by ordinary least squares on
//!
//! ```text
//! x(t) = g(t) + daily(hour(t)) + weekly(day(t)) + e
//! ```
//!
//! where `g` is a linear (optionally piecewise-linear) trend, `daily` is a
//! Fourier series of period 24 evaluated at the civil hour-of-day and `weekly`
//! a Fourier series of period 7 evaluated at the civil day-of-week. Evaluating
//! both series at integer hour/day indices makes the fitted model identical to
//! the exported 24- and 7-entry lookup tables.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{CivilClock, TimeSeries, SECONDS_PER_DAY};

pub const HOURS_PER_DAY: usize = 24;
pub const DAYS_PER_WEEK: usize = 7;

/// Relative singular-value floor below which the design matrix counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrendKind {
    Linear,
    /// Continuous piecewise-linear trend with `knots` evenly spaced interior knots.
    PiecewiseLinear { knots: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub daily_fourier_order: usize,
    pub weekly_fourier_order: usize,
    pub trend: TrendKind,
    pub clock: CivilClock,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            daily_fourier_order: 4,
            weekly_fourier_order: 3,
            trend: TrendKind::Linear,
            clock: CivilClock::utc(),
        }
    }
}

impl DecompositionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.daily_fourier_order == 0 || self.weekly_fourier_order == 0 {
            return Err(Error::Config("Fourier orders must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trend `g(t) = intercept + slope * u + sum_j hinge_j * max(0, u - knot_j)`
/// with `u = (t - origin) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    pub origin: i64,
    pub scale: f64,
    pub intercept: f64,
    pub slope: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hinge_slopes: Vec<f64>,
}

impl TrendParams {
    pub fn constant(level: f64) -> Self {
        Self {
            origin: 0,
            scale: 1.0,
            intercept: level,
            slope: 0.0,
            knots: Vec::new(),
            hinge_slopes: Vec::new(),
        }
    }

    fn position(&self, timestamp: i64) -> f64 {
        (timestamp - self.origin) as f64 / self.scale
    }

    pub fn eval(&self, timestamp: i64) -> f64 {
        let u = self.position(timestamp);
        let hinges: f64 = self
            .knots
            .iter()
            .zip(&self.hinge_slopes)
            .map(|(k, s)| s * (u - k).max(0.0))
            .sum();
        self.intercept + self.slope * u + hinges
    }
}

/// Fitted seasonal lookup tables and trend for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub daily: Vec<f64>,
    pub weekly: Vec<f64>,
    pub trend: TrendParams,
    pub residual_std: f64,
}

impl ChannelProfile {
    pub fn zero() -> Self {
        Self {
            daily: vec![0.0; HOURS_PER_DAY],
            weekly: vec![0.0; DAYS_PER_WEEK],
            trend: TrendParams::constant(0.0),
            residual_std: 0.0,
        }
    }
}

/// Daily (24) and weekly (7) seasonal terms plus trend, per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalProfile {
    pub clock: CivilClock,
    pub channels: IndexMap<String, ChannelProfile>,
}

impl SeasonalProfile {
    /// All-zero tables for the given channels.
    pub fn zero(channel_names: &[String], clock: CivilClock) -> Self {
        Self {
            clock,
            channels: channel_names
                .iter()
                .map(|n| (n.clone(), ChannelProfile::zero()))
                .collect(),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &ChannelProfile {
        &self.channels[c]
    }

    /// Seasonal part only: `daily[hour] + weekly[day]`.
    pub fn seasonal(&self, c: usize, timestamp: i64) -> f64 {
        let p = &self.channels[c];
        p.daily[self.clock.hour_of_day(timestamp)] + p.weekly[self.clock.day_of_week(timestamp)]
    }

    /// Trend plus seasonal terms.
    pub fn reconstruct(&self, c: usize, timestamp: i64) -> f64 {
        self.channels[c].trend.eval(timestamp) + self.seasonal(c, timestamp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: SeasonalProfile = serde_json::from_str(text)?;
        for (name, p) in &profile.channels {
            if p.daily.len() != HOURS_PER_DAY || p.weekly.len() != DAYS_PER_WEEK {
                return Err(Error::Shape(format!("channel {name}: tables must have 24 and 7 entries")));
            }
        }
        Ok(profile)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `2m` features for one timestamp: `(daily[hour], weekly[day])` per channel.
pub fn seasonal_features(timestamp: i64, profile: &SeasonalProfile) -> Vec<f64> {
    let hour = profile.clock.hour_of_day(timestamp);
    let day = profile.clock.day_of_week(timestamp);
    profile
        .channels
        .values()
        .flat_map(|p| [p.daily[hour], p.weekly[day]])
        .collect()
}

struct Design {
    trend_columns: usize,
    daily_order: usize,
    weekly_order: usize,
    knots: Vec<f64>,
    origin: i64,
    scale: f64,
}

impl Design {
    fn new(series: &TimeSeries, config: &DecompositionConfig) -> Self {
        let origin = series.start().unwrap_or(0);
        let span = (series.len().saturating_sub(1) as i64 * series.interval()).max(1);
        let knots = match config.trend {
            TrendKind::Linear => Vec::new(),
            TrendKind::PiecewiseLinear { knots } => {
                (1..=knots).map(|j| j as f64 / (knots + 1) as f64).collect()
            }
        };
        Self {
            trend_columns: 2 + knots.len(),
            daily_order: config.daily_fourier_order,
            weekly_order: config.weekly_fourier_order,
            knots,
            origin,
            scale: span as f64,
        }
    }

    fn columns(&self) -> usize {
        self.trend_columns + 2 * self.daily_order + 2 * self.weekly_order
    }

    fn daily_start(&self) -> usize {
        self.trend_columns
    }

    fn weekly_start(&self) -> usize {
        self.trend_columns + 2 * self.daily_order
    }

    fn row(&self, timestamp: i64, clock: &CivilClock, out: &mut [f64]) {
        let u = (timestamp - self.origin) as f64 / self.scale;
        out[0] = 1.0;
        out[1] = u;
        for (j, k) in self.knots.iter().enumerate() {
            out[2 + j] = (u - k).max(0.0);
        }
        fourier_terms(
            clock.hour_of_day(timestamp) as f64 / HOURS_PER_DAY as f64,
            self.daily_order,
            &mut out[self.daily_start()..self.weekly_start()],
        );
        fourier_terms(
            clock.day_of_week(timestamp) as f64 / DAYS_PER_WEEK as f64,
            self.weekly_order,
            &mut out[self.weekly_start()..],
        );
    }
}

/// `[cos(2πkφ), sin(2πkφ)]` for `k = 1..=order`.
fn fourier_terms(phase: f64, order: usize, out: &mut [f64]) {
    for k in 1..=order {
        let angle = TAU * k as f64 * phase;
        out[2 * (k - 1)] = angle.cos();
        out[2 * (k - 1) + 1] = angle.sin();
    }
}

fn fourier_eval(coefs: &[f64], phase: f64, order: usize) -> f64 {
    let mut basis = vec![0.0; 2 * order];
    fourier_terms(phase, order, &mut basis);
    basis.iter().zip(coefs).map(|(b, c)| b * c).sum()
}

fn center(table: &mut [f64]) -> f64 {
    let mean = table.iter().sum::<f64>() / table.len() as f64;
    table.iter_mut().for_each(|v| *v -= mean);
    mean
}

/// Fits trend and seasonal lookup tables for every channel of a (normalized)
/// series spanning at least two weeks.
pub fn fit_decomposition(series: &TimeSeries, config: &DecompositionConfig) -> Result<SeasonalProfile> {
    config.validate()?;
    let interval = series.interval();
    let needed = ((2 * 7 * SECONDS_PER_DAY + interval - 1) / interval) as usize;
    if series.len() < needed {
        return Err(Error::TooShort {
            needed,
            have: series.len(),
        });
    }
    let design = Design::new(series, config);
    let p = design.columns();
    let mut x = DMatrix::<f64>::zeros(series.len(), p);
    let mut row = vec![0.0; p];
    for (i, frame) in series.frames().iter().enumerate() {
        design.row(frame.timestamp, &config.clock, &mut row);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }

    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let rank_ok = max_sv > 0.0 && min_sv / max_sv > RANK_TOLERANCE;

    let fits: Vec<Result<ChannelProfile>> = (0..series.channels())
        .into_par_iter()
        .map(|c| {
            if !rank_ok {
                return Err(Error::RankDeficient {
                    channel: series.channel_names()[c].clone(),
                });
            }
            let y = DVector::from_vec(series.channel(c));
            let beta = svd
                .solve(&y, 0.0)
                .map_err(|e| Error::Shape(e.to_string()))?;
            let residual = &y - &x * &beta;
            let residual_std = (residual.norm_squared() / series.len() as f64).sqrt();
            Ok(channel_profile(&design, beta.as_slice(), residual_std))
        })
        .collect();

    let mut channels = IndexMap::new();
    for (name, fit) in series.channel_names().iter().zip(fits) {
        channels.insert(name.clone(), fit?);
    }
    Ok(SeasonalProfile {
        clock: config.clock,
        channels,
    })
}

fn channel_profile(design: &Design, beta: &[f64], residual_std: f64) -> ChannelProfile {
    let daily_coefs = &beta[design.daily_start()..design.weekly_start()];
    let weekly_coefs = &beta[design.weekly_start()..];
    let mut daily: Vec<f64> = (0..HOURS_PER_DAY)
        .map(|h| fourier_eval(daily_coefs, h as f64 / HOURS_PER_DAY as f64, design.daily_order))
        .collect();
    let mut weekly: Vec<f64> = (0..DAYS_PER_WEEK)
        .map(|d| fourier_eval(weekly_coefs, d as f64 / DAYS_PER_WEEK as f64, design.weekly_order))
        .collect();
    // Any table offset moves into the intercept so reconstruction is unchanged.
    let offset = center(&mut daily) + center(&mut weekly);
    ChannelProfile {
        daily,
        weekly,
        trend: TrendParams {
            origin: design.origin,
            scale: design.scale,
            intercept: beta[0] + offset,
            slope: beta[1],
            knots: design.knots.clone(),
            hinge_slopes: beta[2..design.trend_columns].to_vec(),
        },
        residual_std,
    }
}
