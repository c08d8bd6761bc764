//! Truncated backpropagation through time with Adam.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::gru::{matvec_t_add, outer_add, CellGrads, StepCache};
use super::model::{ForecastModel, HiddenState, NetworkTopology};
use crate::decomp::{seasonal_features, SeasonalProfile};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// TBPTT window length.
    pub time_steps: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 6e-6,
            time_steps: 72,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_steps == 0 {
            return Err(Error::Config("time_steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Network inputs and `L`-frame targets for every frame of a normalized series.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub topology: NetworkTopology,
    /// One input vector per frame: raw values, then seasonal features when enabled.
    pub inputs: Vec<Vec<f64>>,
    /// Raw frame values, used to build targets.
    pub frames: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn new(series: &TimeSeries, profile: Option<&SeasonalProfile>, topology: NetworkTopology) -> Result<Self> {
        if series.channels() != topology.channels {
            return Err(Error::ChannelMismatch {
                expected: topology.channels,
                got: series.channels(),
            });
        }
        let inputs = series
            .frames()
            .iter()
            .map(|f| build_input(&topology, profile, f.timestamp, &f.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            topology,
            inputs,
            frames: series.frames().iter().map(|f| f.values.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Flattened frames `t+1..=t+L`.
    pub fn target(&self, t: usize) -> Vec<f64> {
        let l = self.topology.horizon;
        self.frames[t + 1..=t + l].iter().flatten().copied().collect()
    }
}

/// Raw values followed by seasonal features when the topology uses them.
pub fn build_input(
    topology: &NetworkTopology,
    profile: Option<&SeasonalProfile>,
    timestamp: i64,
    values: &[f64],
) -> Result<Vec<f64>> {
    let mut input = values.to_vec();
    if topology.seasonal {
        let profile = profile.ok_or_else(|| Error::Config("seasonal topology needs a seasonal profile".into()))?;
        if profile.channel_count() != topology.channels {
            return Err(Error::ChannelMismatch {
                expected: topology.channels,
                got: profile.channel_count(),
            });
        }
        input.extend(seasonal_features(timestamp, profile));
    }
    Ok(input)
}

/// Mean squared error over a TBPTT window and its gradient with respect to
/// every parameter. `hidden` is the detached initial state and is advanced to
/// the state after the window.
pub fn window_loss_and_gradient(
    model: &ForecastModel,
    hidden: &mut HiddenState,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let layout = model.layout();
    let depth = model.topology.depth;
    let hw = model.topology.hidden_width;
    let steps = inputs.len();
    let out_w = model.topology.output_width;
    let scale = 1.0 / (steps * out_w) as f64;

    let mut caches: Vec<Vec<StepCache>> = vec![Vec::with_capacity(steps); depth];
    let mut tops = Vec::with_capacity(steps);
    let mut residuals = Vec::with_capacity(steps);
    let mut loss = 0.0;
    for (x, target) in inputs.iter().zip(targets) {
        let mut layer_in = x.clone();
        for l in 0..depth {
            let (h, cache) = layout.cell(&model.params, l).forward_cached(&layer_in, &hidden.0[l]);
            caches[l].push(cache);
            hidden.0[l] = h.clone();
            layer_in = h;
        }
        let y = model.head_output(&layer_in);
        let r: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
        loss += r.iter().map(|v| v * v).sum::<f64>();
        residuals.push(r);
        tops.push(layer_in);
    }
    loss *= scale;

    let mut grad = vec![0.0; layout.total];
    let mut dh_next = vec![vec![0.0; hw]; depth];
    for t in (0..steps).rev() {
        let dy: Vec<f64> = residuals[t].iter().map(|r| 2.0 * r * scale).collect();
        let (head_w, _) = layout.head(&model.params);
        {
            let (gw, gb) = grad[layout.head_w..].split_at_mut(layout.head_b - layout.head_w);
            outer_add(gw, hw, &dy, &tops[t]);
            for (b, d) in gb.iter_mut().zip(&dy) {
                *b += d;
            }
        }
        let mut dh = dh_next[depth - 1].clone();
        matvec_t_add(head_w, hw, &dy, &mut dh);
        for l in (0..depth).rev() {
            if l < depth - 1 {
                for (a, b) in dh.iter_mut().zip(&dh_next[l]) {
                    *a += b;
                }
            }
            let o = layout.layers[l];
            let cell = layout.cell(&model.params, l);
            let block = &mut grad[o.w_ih..o.end];
            let (w_ih, rest) = block.split_at_mut(o.w_hh - o.w_ih);
            let (w_hh, rest) = rest.split_at_mut(o.b_ih - o.w_hh);
            let (b_ih, b_hh) = rest.split_at_mut(o.b_hh - o.b_ih);
            let (dx, dh_prev) = cell.backward(&caches[l][t], &dh, CellGrads { w_ih, w_hh, b_ih, b_hh });
            dh_next[l] = dh_prev;
            dh = dx;
        }
    }
    (loss, grad)
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: ForecastModel,
    pub train_losses: Vec<f64>,
    pub validation_mse: Vec<f64>,
}

/// Trains on `train` frames of `set`, early-stopping on `validation` MSE.
///
/// An epoch walks the training span once in TBPTT windows of
/// `config.time_steps` steps, carrying the hidden state forward detached and
/// taking one Adam step per window.
pub fn train(
    model: ForecastModel,
    set: &TrainingSet,
    train: Range<usize>,
    validation: Range<usize>,
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.topology != set.topology {
        return Err(Error::Shape("model topology differs from training set".into()));
    }
    let horizon = model.topology.horizon;
    let needed = config.time_steps + horizon;
    if train.len() < needed || train.end > set.len() {
        return Err(Error::TooShort {
            needed,
            have: train.len(),
        });
    }
    // Sources whose whole target lies inside the training span.
    let sources = train.start..train.end - horizon;
    let targets: Vec<Vec<f64>> = sources.clone().map(|t| set.target(t)).collect();

    let mut model = model;
    let mut adam = Adam::new(model.parameter_count(), config.learning_rate, config.weight_decay);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut train_losses = Vec::new();
    let mut validation_mse = Vec::new();

    for epoch in 0..config.max_epochs {
        let mut hidden = HiddenState::zeros(&model.topology);
        let mut weighted = 0.0;
        let mut start = 0;
        while start < targets.len() {
            let end = (start + config.time_steps).min(targets.len());
            let window = sources.start + start..sources.start + end;
            let (loss, grad) = window_loss_and_gradient(&model, &mut hidden, &set.inputs[window], &targets[start..end]);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut model.params, &grad);
            weighted += loss * (end - start) as f64;
            start = end;
        }
        let epoch_loss = weighted / targets.len() as f64;
        train_losses.push(epoch_loss);

        let score = if validation.len() > horizon {
            let v = mse(&model, set, validation.clone())?;
            validation_mse.push(v);
            v
        } else {
            epoch_loss
        };
        if !score.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let improved = best.as_ref().is_none_or(|(b, _, _)| score < *b);
        if improved {
            best = Some((score, epoch, model.params.clone()));
        } else if epoch - best.as_ref().map_or(0, |b| b.1) >= config.patience {
            break;
        }
    }

    let (best_score, best_epoch, params) = best.expect("at least one epoch runs");
    model.params = params;
    model.metadata.epochs_run = train_losses.len();
    model.metadata.best_epoch = best_epoch;
    model.metadata.best_validation_mse = (!validation_mse.is_empty()).then_some(best_score);
    model.metadata.final_train_loss = train_losses.last().copied();
    model.metadata.training = Some(config.clone());
    Ok(TrainOutcome {
        model,
        train_losses,
        validation_mse,
    })
}

/// MSE of clamped `L`-step forecasts for sources in `range` whose targets also
/// fall inside `range`. The network is run from the first frame of the set so
/// the hidden state is warm when `range` starts.
pub fn mse(model: &ForecastModel, set: &TrainingSet, range: Range<usize>) -> Result<f64> {
    let horizon = model.topology.horizon;
    if range.len() <= horizon || range.end > set.len() {
        return Err(Error::TooShort {
            needed: horizon + 1,
            have: range.len(),
        });
    }
    let mut hidden = HiddenState::zeros(&model.topology);
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..range.end - horizon {
        let y = model.step_unchecked(&mut hidden, &set.inputs[t]);
        if t < range.start {
            continue;
        }
        for (p, a) in y.iter().zip(set.target(t)) {
            total += (p.clamp(0.0, 1.0) - a).powi(2);
        }
        count += y.len();
    }
    Ok(total / count as f64)
}
