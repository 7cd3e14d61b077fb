//! Full-batch Adam training.

use serde::{Deserialize, Serialize};

use crate::dataset::PairSet;
use crate::error::{Error, Result};
use crate::model::{CoLpNet, TrainingRecord};
use crate::rng::{seeded, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Standard deviation of the initial weights; biases start at zero.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            epochs: 10_000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// First and second moments plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: CoLpNet,
    /// Mean-per-sample loss before each update and after the last one
    /// (`epochs + 1` entries).
    pub history: Vec<f64>,
}

/// Draw initial weights from the seed's init stream.
pub fn initialize(model: &mut CoLpNet, config: &TrainConfig) {
    model.initialize(config.init_scale, &mut seeded(config.seed, Stream::Init));
    model.seed = Some(config.seed);
}

/// Train an already-initialized model. `progress` is called after every
/// epoch with `(epoch, mean loss before the update)`.
pub fn train_with<F>(mut model: CoLpNet, pairs: &PairSet, config: &TrainConfig, mut progress: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, f64),
{
    config.validate()?;
    model.check_pairs(pairs)?;
    if pairs.is_empty() {
        return Err(Error::Config("cannot train on an empty pair set".into()));
    }
    let m = pairs.len() as f64;
    let mut state = AdamState::new(model.num_params());
    let mut history = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let (loss, grad) = model.loss_and_grad(pairs).map_err(|_| Error::NonFinite {
            context: format!("loss at epoch {epoch}"),
        })?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient at epoch {epoch}"),
            });
        }
        history.push(loss / m);
        progress(epoch, loss / m);
        adam_step(&mut model.params, &grad, &mut state, config);
    }
    let final_loss = model.loss(pairs).map_err(|_| Error::NonFinite {
        context: format!("loss at epoch {}", config.epochs),
    })?;
    history.push(final_loss / m);
    model.training = Some(TrainingRecord {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        init_scale: config.init_scale,
        seed: config.seed,
        num_pairs: pairs.len(),
        initial_mean_loss: history[0],
        final_mean_loss: final_loss / m,
    });
    Ok(TrainOutcome { model, history })
}

/// Initialize from the config's seed and train.
pub fn train(mut model: CoLpNet, pairs: &PairSet, config: &TrainConfig) -> Result<TrainOutcome> {
    initialize(&mut model, config);
    train_with(model, pairs, config, |_, _| {})
}
