use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logistic::{phi, ScoringParams};
use crate::error::{Error, Result};
use crate::forecast::Forecaster;
use crate::lti::{combine_terms, decay_weights, wlsdist_matrix, DecayVector, Lanes, PredictionBuffer};
use crate::series::{format_timestamp, Frame};

/// Per-frame condition markers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// `Z_t` fell below the floor and uniform weights were used.
    pub low_confidence: bool,
}

impl Flags {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.low_confidence {
            out.push("low-confidence");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub t: usize,
    pub timestamp: i64,
    pub lti: f64,
    pub anomaly_score: f64,
    pub wlsdist: Vec<f64>,
    pub z_t: f64,
    pub flags: Flags,
}

/// Scores of a chronological run. Warm-up frames are listed separately and
/// carry no score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreStream {
    pub horizon: usize,
    pub warm_up: Vec<i64>,
    pub records: Vec<ScoreRecord>,
}

#[derive(Serialize)]
struct DiagnosticLine<'a> {
    t: usize,
    lti: f64,
    wlsdist: &'a [f64],
    z_t: f64,
    flags: Vec<&'static str>,
}

impl ScoreStream {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.records.iter().map(|r| r.timestamp).collect()
    }

    pub fn anomaly_scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.anomaly_score).collect()
    }

    pub fn lti_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lti).collect()
    }

    /// `timestamp,lti,as,flags`, one row per scored frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,lti,as,flags\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:?},{:?},{}\n",
                format_timestamp(r.timestamp),
                r.lti,
                r.anomaly_score,
                r.flags.labels().join("|")
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// One JSON object per scored frame.
    pub fn write_diagnostics(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            let line = DiagnosticLine {
                t: r.t,
                lti: r.lti,
                wlsdist: &r.wlsdist,
                z_t: r.z_t,
                flags: r.flags.labels(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io("<diagnostics>", e))?;
        }
        Ok(())
    }

    /// Loads `timestamp,lti,as,flags`. Rows with an empty score count as warm-up.
    pub fn read_csv(path: impl AsRef<Path>, horizon: usize) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let mut stream = ScoreStream {
            horizon,
            ..Default::default()
        };
        for (i, row) in reader.records().enumerate() {
            let row_no = i + 2;
            let row = row.map_err(|e| Error::Parse {
                row: row_no,
                column: 0,
                message: e.to_string(),
            })?;
            let field = |c: usize| row.get(c).unwrap_or("").trim();
            let ts = crate::series::parse_timestamp(field(0)).ok_or_else(|| Error::Parse {
                row: row_no,
                column: 1,
                message: format!("bad timestamp {:?}", field(0)),
            })?;
            if field(1).is_empty() {
                stream.warm_up.push(ts);
                continue;
            }
            let num = |c: usize| {
                field(c).parse::<f64>().map_err(|e| Error::Parse {
                    row: row_no,
                    column: c + 1,
                    message: e.to_string(),
                })
            };
            stream.records.push(ScoreRecord {
                t: horizon.max(stream.warm_up.len()) + stream.records.len(),
                timestamp: ts,
                lti: num(1)?,
                anomaly_score: num(2)?,
                wlsdist: Vec::new(),
                z_t: f64::NAN,
                flags: Flags {
                    low_confidence: field(3).contains("low-confidence"),
                },
            });
        }
        Ok(stream)
    }
}

/// The scoring half of the detection loop: buffers forecasts and scores each
/// arriving frame against them.
#[derive(Debug, Clone)]
pub struct ScoreEngine {
    buffer: PredictionBuffer,
    decay: DecayVector,
    params: ScoringParams,
    lanes: Lanes,
    last_score: f64,
}

impl ScoreEngine {
    pub fn new(horizon: usize, channels: usize, params: ScoringParams, lanes: Lanes) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            buffer: PredictionBuffer::new(horizon, channels)?,
            decay: decay_weights(horizon)?,
            params,
            lanes,
            last_score: 0.0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.buffer.horizon()
    }

    pub fn params(&self) -> &ScoringParams {
        &self.params
    }

    pub fn buffer(&self) -> &PredictionBuffer {
        &self.buffer
    }

    /// Overrides a buffered source's anomaly score.
    pub fn set_anomaly_score(&mut self, source_index: usize, value: f64) -> Result<()> {
        self.buffer.set_anomaly_score(source_index, value)
    }

    /// Adds frame `t` and scores it once `L` sources are buffered.
    pub fn observe(&mut self, frame: Frame) -> Result<Option<ScoreRecord>> {
        let timestamp = frame.timestamp;
        let t = self.buffer.push_actual(frame)?;
        if !self.buffer.is_warm() {
            self.last_score = 0.0;
            return Ok(None);
        }
        let terms = wlsdist_matrix(t, &self.buffer, &self.decay, &self.lanes)?;
        let (lti, z_t, flags) = match combine_terms(&self.buffer.anomaly_scores(), &terms) {
            Ok((lti, z)) => (lti, z, Flags::default()),
            Err(Error::DegenerateWeights { z }) => {
                let mean = terms.iter().sum::<f64>() / terms.len() as f64;
                (mean, z, Flags { low_confidence: true })
            }
            Err(e) => return Err(e),
        };
        let anomaly_score = phi(lti, &self.params);
        self.last_score = anomaly_score;
        Ok(Some(ScoreRecord {
            t,
            timestamp,
            lti,
            anomaly_score,
            wlsdist: terms,
            z_t,
            flags,
        }))
    }

    /// Stores the forecast issued at the newest frame together with that
    /// frame's score (0 during warm-up).
    pub fn push_forecast(&mut self, frames: Vec<Vec<f64>>) -> Result<()> {
        self.buffer.push_forecast(frames, self.last_score)
    }
}

/// Full detection loop: score the frame, forecast from it, buffer the forecast.
pub struct Detector<F: Forecaster> {
    forecaster: F,
    engine: ScoreEngine,
    stream: ScoreStream,
}

impl<F: Forecaster> Detector<F> {
    pub fn new(forecaster: F, params: ScoringParams, lanes: Lanes) -> Result<Self> {
        let horizon = forecaster.horizon();
        let engine = ScoreEngine::new(horizon, forecaster.channels(), params, lanes)?;
        Ok(Self {
            forecaster,
            engine,
            stream: ScoreStream {
                horizon,
                ..Default::default()
            },
        })
    }

    pub fn step(&mut self, frame: &Frame) -> Result<Option<ScoreRecord>> {
        let record = self.engine.observe(frame.clone())?;
        let forecast = self.forecaster.forecast(frame)?;
        self.engine.push_forecast(forecast)?;
        match &record {
            Some(r) => self.stream.records.push(r.clone()),
            None => self.stream.warm_up.push(frame.timestamp),
        }
        Ok(record)
    }

    pub fn run<'a>(&mut self, frames: impl IntoIterator<Item = &'a Frame>) -> Result<()> {
        for f in frames {
            self.step(f)?;
        }
        Ok(())
    }

    pub fn stream(&self) -> &ScoreStream {
        &self.stream
    }

    pub fn into_stream(self) -> ScoreStream {
        self.stream
    }

    pub fn engine(&self) -> &ScoreEngine {
        &self.engine
    }
}

/// Detection over forecasts computed ahead of time; `forecasts[i]` is the
/// forecast issued at frame `i`.
pub fn detect_precomputed(
    frames: &[Frame],
    forecasts: &[Vec<Vec<f64>>],
    params: &ScoringParams,
    lanes: &Lanes,
) -> Result<ScoreStream> {
    detect_with_overrides(frames, forecasts, params, lanes, &[])
}

/// As [`detect_precomputed`], replacing the score of each listed source
/// `(index, value)` right after that source is buffered.
pub fn detect_with_overrides(
    frames: &[Frame],
    forecasts: &[Vec<Vec<f64>>],
    params: &ScoringParams,
    lanes: &Lanes,
    overrides: &[(usize, f64)],
) -> Result<ScoreStream> {
    if frames.len() != forecasts.len() {
        return Err(Error::LengthMismatch {
            left: frames.len(),
            right: forecasts.len(),
        });
    }
    let first = forecasts.first().ok_or(Error::EmptySequence)?;
    let horizon = first.len();
    let channels = frames[0].values.len();
    let mut engine = ScoreEngine::new(horizon, channels, params.clone(), lanes.clone())?;
    let mut stream = ScoreStream {
        horizon,
        ..Default::default()
    };
    for (i, (frame, fc)) in frames.iter().zip(forecasts).enumerate() {
        match engine.observe(frame.clone())? {
            Some(r) => stream.records.push(r),
            None => stream.warm_up.push(frame.timestamp),
        }
        engine.push_forecast(fc.clone())?;
        for &(_, v) in overrides.iter().filter(|(s, _)| *s == i) {
            engine.set_anomaly_score(i, v)?;
        }
    }
    Ok(stream)
}
