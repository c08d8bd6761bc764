use std::collections::VecDeque;

use super::distance::{dfdist_unchecked, DecayVector};
use crate::error::{Error, Result};
use crate::series::Frame;

/// Forecast issued by one source frame, with the anomaly score that frame received.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferedSource {
    pub index: usize,
    pub frames: Vec<Vec<f64>>,
    pub anomaly_score: f64,
}

/// Frame distances between each buffered forecast and the actual frames it
/// covers. Row `k` belongs to the `k`-th oldest source and holds
/// `df(u+1), .., df(t)`; rows of recent sources are shorter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameDistanceMatrix {
    horizon: usize,
    rows: VecDeque<Vec<f64>>,
}

impl FrameDistanceMatrix {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            rows: VecDeque::with_capacity(horizon + 1),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    /// Row `k` left-padded with zeros to `L` columns, so column `j` lines up
    /// with frame `t - L + 1 + j`.
    pub fn padded_row(&self, k: usize) -> Vec<f64> {
        let row = &self.rows[k];
        let mut out = vec![0.0; self.horizon - row.len()];
        out.extend_from_slice(row);
        out
    }

    /// Dense `rows × L` view.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows.len()).map(|k| self.padded_row(k)).collect()
    }

    fn push_source(&mut self) {
        self.rows.push_back(Vec::with_capacity(self.horizon));
    }

    fn pop_source(&mut self) {
        self.rows.pop_front();
    }

    fn append(&mut self, k: usize, value: f64) {
        self.rows[k].push(value);
    }
}

/// Sliding store of the last `L` forecasts, their sources' anomaly scores, and
/// the recent actual frames. Written by a single chronological detector.
///
/// Each step is `push_actual` for frame `t`, optionally scoring, then
/// `push_forecast` with the forecast issued at `t` and its score.
#[derive(Debug, Clone)]
pub struct PredictionBuffer {
    horizon: usize,
    channels: usize,
    sources: VecDeque<BufferedSource>,
    actuals: VecDeque<Frame>,
    distances: FrameDistanceMatrix,
    next_index: usize,
    awaiting_forecast: bool,
}

impl PredictionBuffer {
    pub fn new(horizon: usize, channels: usize) -> Result<Self> {
        if horizon == 0 || channels == 0 {
            return Err(Error::Config("buffer needs L ≥ 1 and m ≥ 1".into()));
        }
        Ok(Self {
            horizon,
            channels,
            sources: VecDeque::with_capacity(horizon + 1),
            actuals: VecDeque::with_capacity(horizon + 2),
            distances: FrameDistanceMatrix::new(horizon),
            next_index: 0,
            awaiting_forecast: false,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Index of the newest actual frame.
    pub fn current_index(&self) -> Option<usize> {
        self.next_index.checked_sub(1)
    }

    pub fn sources(&self) -> impl ExactSizeIterator<Item = &BufferedSource> {
        self.sources.iter()
    }

    pub fn actuals(&self) -> impl ExactSizeIterator<Item = &Frame> {
        self.actuals.iter()
    }

    pub fn distances(&self) -> &FrameDistanceMatrix {
        &self.distances
    }

    /// Anomaly scores of the buffered sources, oldest first.
    pub fn anomaly_scores(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.anomaly_score).collect()
    }

    /// Overrides the stored score of a buffered source.
    pub fn set_anomaly_score(&mut self, source_index: usize, value: f64) -> Result<()> {
        check_score(value)?;
        let s = self
            .sources
            .iter_mut()
            .find(|s| s.index == source_index)
            .ok_or_else(|| Error::Alignment(format!("source {source_index} is not buffered")))?;
        s.anomaly_score = value;
        Ok(())
    }

    /// True when the newest frame `t` has all `L` sources `t-L..t-1` buffered.
    pub fn is_warm(&self) -> bool {
        match (self.current_index(), self.sources.front()) {
            (Some(t), Some(first)) => self.awaiting_forecast && self.sources.len() == self.horizon && first.index + self.horizon == t,
            _ => false,
        }
    }

    pub fn push_actual(&mut self, frame: Frame) -> Result<usize> {
        if self.awaiting_forecast {
            return Err(Error::Alignment(format!(
                "frame {} has no forecast yet",
                self.next_index - 1
            )));
        }
        if frame.values.len() != self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: frame.values.len(),
            });
        }
        if let Some(last) = self.actuals.back() {
            if frame.timestamp <= last.timestamp {
                return Err(Error::OutOfOrder {
                    got: frame.timestamp,
                    last: last.timestamp,
                });
            }
        }
        let t = self.next_index;
        for (k, s) in self.sources.iter().enumerate() {
            let predicted = &s.frames[t - s.index - 1];
            self.distances.append(k, dfdist_unchecked(&frame.values, predicted));
        }
        self.actuals.push_back(frame);
        if self.actuals.len() > self.horizon + 1 {
            self.actuals.pop_front();
        }
        self.next_index += 1;
        self.awaiting_forecast = true;
        Ok(t)
    }

    /// Stores the forecast issued at the newest frame, evicting the oldest
    /// source once more than `L` are held.
    pub fn push_forecast(&mut self, frames: Vec<Vec<f64>>, anomaly_score: f64) -> Result<()> {
        if !self.awaiting_forecast {
            return Err(Error::Alignment("forecast pushed before its source frame".into()));
        }
        if frames.len() != self.horizon {
            return Err(Error::Shape(format!(
                "forecast has {} frames, expected {}",
                frames.len(),
                self.horizon
            )));
        }
        if let Some(bad) = frames.iter().find(|f| f.len() != self.channels) {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: bad.len(),
            });
        }
        check_score(anomaly_score)?;
        self.sources.push_back(BufferedSource {
            index: self.next_index - 1,
            frames,
            anomaly_score,
        });
        self.distances.push_source();
        if self.sources.len() > self.horizon {
            self.sources.pop_front();
            self.distances.pop_source();
        }
        self.awaiting_forecast = false;
        Ok(())
    }

    fn require_warm(&self, t: usize, decay: &DecayVector) -> Result<()> {
        if decay.len() != self.horizon {
            return Err(Error::Shape(format!(
                "decay length {} differs from buffer horizon {}",
                decay.len(),
                self.horizon
            )));
        }
        if self.current_index() != Some(t) {
            return Err(Error::Alignment(format!(
                "buffer is at frame {:?}, asked for {t}",
                self.current_index()
            )));
        }
        if !self.is_warm() {
            return Err(Error::WarmUp { t });
        }
        Ok(())
    }

    /// Per-source weighted sequence distances for frame `t`, evaluated
    /// directly from the stored actual and predicted frames.
    pub(crate) fn wlsdist_direct(&self, t: usize, decay: &DecayVector) -> Result<Vec<f64>> {
        self.require_warm(t, decay)?;
        let actuals: Vec<&[f64]> = self.actuals.iter().map(|f| f.values.as_slice()).collect();
        Ok(self
            .sources
            .iter()
            .map(|s| {
                let len = t - s.index;
                let actual = &actuals[actuals.len() - len..];
                let predicted = &s.frames[..len];
                let mut acc = 0.0;
                for (j, (x, y)) in actual.iter().zip(predicted).enumerate() {
                    acc += decay.weight(len, j) * dfdist_unchecked(x, y);
                }
                acc / decay.normalizer(len)
            })
            .collect())
    }

    pub(crate) fn check_for_matrix(&self, t: usize, decay: &DecayVector) -> Result<()> {
        self.require_warm(t, decay)
    }

    /// Window length of source row `k` at the current frame.
    pub(crate) fn window_len(&self, k: usize) -> usize {
        self.distances.row(k).len()
    }
}

fn check_score(value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Shape(format!("anomaly score {value} outside [0, 1]")))
    }
}
