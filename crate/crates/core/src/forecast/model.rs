//! Stacked GRU with a linear output head, stored as one flat parameter vector.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::gru::{matvec_add, GruCell};
use super::train::TrainingConfig;
use crate::error::{Error, Result};

/// Layer widths of the forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    /// Channels `m` of the modelled series.
    pub channels: usize,
    /// Whether the input carries `2m` seasonal features after the `m` raw values.
    pub seasonal: bool,
    pub input_width: usize,
    pub hidden_width: usize,
    pub depth: usize,
    /// Forecast horizon `L`.
    pub horizon: usize,
    pub output_width: usize,
}

impl NetworkTopology {
    pub fn new(channels: usize, seasonal: bool, hidden_width: usize, depth: usize, horizon: usize) -> Result<Self> {
        if channels == 0 || hidden_width == 0 || depth == 0 || horizon == 0 {
            return Err(Error::Config(format!(
                "topology widths must be positive (m={channels}, hidden={hidden_width}, depth={depth}, L={horizon})"
            )));
        }
        Ok(Self {
            channels,
            seasonal,
            input_width: if seasonal { 3 * channels } else { channels },
            hidden_width,
            depth,
            horizon,
            output_width: channels * horizon,
        })
    }

    fn validate(&self) -> Result<()> {
        let expected = Self::new(self.channels, self.seasonal, self.hidden_width, self.depth, self.horizon)?;
        if &expected != self {
            return Err(Error::Checkpoint(format!("inconsistent topology {self:?}")));
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerOffsets {
    pub input: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub b_ih: usize,
    pub b_hh: usize,
    pub end: usize,
}

/// Where each weight block lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub(crate) layers: Vec<LayerOffsets>,
    pub(crate) hidden: usize,
    pub(crate) output: usize,
    pub(crate) head_w: usize,
    pub(crate) head_b: usize,
    pub(crate) total: usize,
}

/// Named parameter group, used when reporting gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    InputGates { layer: usize },
    HiddenGates { layer: usize },
    GateBiases { layer: usize },
    Head,
}

impl ParamLayout {
    fn new(t: &NetworkTopology) -> Self {
        let h = t.hidden_width;
        let mut offset = 0;
        let layers = (0..t.depth)
            .map(|l| {
                let input = if l == 0 { t.input_width } else { h };
                let w_ih = offset;
                let w_hh = w_ih + 3 * h * input;
                let b_ih = w_hh + 3 * h * h;
                let b_hh = b_ih + 3 * h;
                let end = b_hh + 3 * h;
                offset = end;
                LayerOffsets {
                    input,
                    w_ih,
                    w_hh,
                    b_ih,
                    b_hh,
                    end,
                }
            })
            .collect();
        let head_w = offset;
        let head_b = head_w + t.output_width * h;
        Self {
            layers,
            hidden: h,
            output: t.output_width,
            head_w,
            head_b,
            total: head_b + t.output_width,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub(crate) fn cell<'a>(&self, params: &'a [f64], l: usize) -> GruCell<'a> {
        let o = self.layers[l];
        GruCell {
            input_width: o.input,
            hidden_width: self.hidden,
            w_ih: &params[o.w_ih..o.w_hh],
            w_hh: &params[o.w_hh..o.b_ih],
            b_ih: &params[o.b_ih..o.b_hh],
            b_hh: &params[o.b_hh..o.end],
        }
    }

    pub(crate) fn head<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        (&params[self.head_w..self.head_b], &params[self.head_b..self.total])
    }

    pub fn group_of(&self, index: usize) -> ParamGroup {
        if index >= self.head_w {
            return ParamGroup::Head;
        }
        for (l, o) in self.layers.iter().enumerate() {
            if index < o.w_hh {
                return ParamGroup::InputGates { layer: l };
            }
            if index < o.b_ih {
                return ParamGroup::HiddenGates { layer: l };
            }
            if index < o.end {
                return ParamGroup::GateBiases { layer: l };
            }
        }
        ParamGroup::Head
    }
}

/// Recurrent state of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub Vec<Vec<f64>>);

impl HiddenState {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        Self(vec![vec![0.0; topology.hidden_width]; topology.depth])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_mse: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub training: Option<TrainingConfig>,
}

/// A trained (or freshly initialized) forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub topology: NetworkTopology,
    #[serde(with = "le_f64_base64")]
    pub params: Vec<f64>,
    #[serde(default)]
    pub metadata: TrainingMetadata,
    #[serde(skip)]
    layout: Option<ParamLayout>,
}

mod le_f64_base64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(params: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = params.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&BASE64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = BASE64.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom("parameter blob is not a whole number of f64"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl ForecastModel {
    pub fn zeros(topology: NetworkTopology) -> Self {
        let layout = topology.layout();
        Self {
            topology,
            params: vec![0.0; layout.total],
            metadata: TrainingMetadata::default(),
            layout: Some(layout),
        }
    }

    /// Uniform initialization in `[-1/√H, 1/√H]` from a seeded generator.
    pub fn initialized(topology: NetworkTopology, seed: u64) -> Self {
        let mut model = Self::zeros(topology);
        let bound = 1.0 / (topology.hidden_width as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            *p = rng.random_range(-bound..=bound);
        }
        model
    }

    pub fn layout(&self) -> &ParamLayout {
        self.layout.as_ref().expect("layout is set on construction")
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Advances the hidden state with one input vector and returns the raw
    /// (unclamped) `m·L` head output.
    pub fn step(&self, state: &mut HiddenState, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.topology.input_width {
            return Err(Error::Shape(format!(
                "model expects input width {}, got {}",
                self.topology.input_width,
                input.len()
            )));
        }
        Ok(self.step_unchecked(state, input))
    }

    pub(crate) fn step_unchecked(&self, state: &mut HiddenState, input: &[f64]) -> Vec<f64> {
        let layout = self.layout();
        let mut x = input.to_vec();
        for (l, h) in state.0.iter_mut().enumerate() {
            let next = layout.cell(&self.params, l).forward_unchecked(&x, h);
            *h = next.clone();
            x = next;
        }
        self.head_output(&x)
    }

    pub(crate) fn head_output(&self, top: &[f64]) -> Vec<f64> {
        let (w, b) = self.layout().head(&self.params);
        let mut y = b.to_vec();
        matvec_add(w, self.topology.hidden_width, top, &mut y);
        y
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: ForecastModel = serde_json::from_str(text)?;
        model.topology.validate()?;
        let layout = model.topology.layout();
        if model.params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "topology needs {} parameters, file has {}",
                layout.total,
                model.params.len()
            )));
        }
        model.layout = Some(layout);
        Ok(model)
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_widths() {
        let t = NetworkTopology::new(2, true, 20, 2, 5).unwrap();
        assert_eq!((t.input_width, t.output_width), (6, 10));
        let t = NetworkTopology::new(5, true, 20, 3, 5).unwrap();
        assert_eq!((t.input_width, t.output_width), (15, 25));
        let t = NetworkTopology::new(1, true, 20, 2, 5).unwrap();
        assert_eq!((t.input_width, t.output_width), (3, 5));
        assert_eq!(NetworkTopology::new(2, false, 20, 2, 5).unwrap().input_width, 2);
        assert!(NetworkTopology::new(2, true, 0, 2, 5).is_err());
    }

    #[test]
    fn parameter_count_matches_shapes() {
        let t = NetworkTopology::new(2, true, 20, 2, 5).unwrap();
        let expected = (3 * 20 * 6 + 3 * 20 * 20 + 6 * 20) + (3 * 20 * 20 + 3 * 20 * 20 + 6 * 20) + (10 * 20 + 10);
        assert_eq!(ForecastModel::zeros(t).parameter_count(), expected);
    }

    #[test]
    fn groups_cover_layout() {
        let t = NetworkTopology::new(1, false, 2, 2, 1).unwrap();
        let l = t.layout();
        assert_eq!(l.group_of(0), ParamGroup::InputGates { layer: 0 });
        assert_eq!(l.group_of(l.layers[1].w_hh), ParamGroup::HiddenGates { layer: 1 });
        assert_eq!(l.group_of(l.layers[1].b_ih), ParamGroup::GateBiases { layer: 1 });
        assert_eq!(l.group_of(l.total - 1), ParamGroup::Head);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let t = NetworkTopology::new(2, true, 4, 2, 3).unwrap();
        let m = ForecastModel::initialized(t, 7);
        let back = ForecastModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   m.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back.topology, t);
    }

    #[test]
    fn checkpoint_shape_is_validated() {
        let t = NetworkTopology::new(2, true, 4, 2, 3).unwrap();
        let mut m = ForecastModel::initialized(t, 7);
        m.params.pop();
        assert!(matches!(ForecastModel::from_json(&m.to_json().unwrap()), Err(Error::Checkpoint(_))));
        let mut m = ForecastModel::initialized(t, 7);
        m.topology.output_width = 5;
        assert!(matches!(ForecastModel::from_json(&m.to_json().unwrap()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let t = NetworkTopology::new(2, true, 20, 2, 5).unwrap();
        let a = ForecastModel::initialized(t, 1);
        assert_eq!(a, ForecastModel::initialized(t, 1));
        assert_ne!(a.params, ForecastModel::initialized(t, 2).params);
        let bound = 1.0 / 20f64.sqrt();
        assert!(a.params.iter().all(|p| p.abs() <= bound));
    }
}
