//! Mini-batch Adam training with learning-rate halving and early stopping.

mod adam;
mod dataset;
mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{split_indices, Dataset, Split, DEFAULT_FRACTIONS};
pub use schedule::{Schedule, ScheduleAction};

use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, backward, build, forward, forward_trace, Checkpoint, ModelConfig};
use crate::nncore::mse_loss;
use crate::tensor::{Element, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub adam: AdamConfig,
    pub lr_patience_epochs: usize,
    pub stop_patience_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            initial_lr: 1e-4,
            adam: AdamConfig::default(),
            lr_patience_epochs: 20,
            stop_patience_epochs: 40,
            max_epochs: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::config("initial learning rate must be positive"));
        }
        if self.lr_patience_epochs == 0 || self.stop_patience_epochs < self.lr_patience_epochs {
            return Err(Error::config(
                "patience values must be positive with stop patience at least the halving patience",
            ));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(Error::config("Adam betas must lie in [0, 1) and epsilon be positive"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

/// Mutable state owned by the training loop.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub epoch: usize,
    pub schedule: Schedule,
    pub adam: AdamState<T>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Weights with the lowest validation loss.
    pub best: Checkpoint<T>,
    /// Weights after the last epoch.
    pub last: Checkpoint<T>,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// MSE of the network on `indices`, each batch weighted by its size.
pub fn evaluate_loss<T: Element>(ckpt: &Checkpoint<T>, data: &Dataset, indices: &[usize], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in indices.chunks(batch.max(1)) {
        let (x, y) = data.batch::<T>(chunk);
        let out = forward(ckpt, &x)?;
        total += mse_loss(&out, &y)?.0.to_f64() * chunk.len() as f64;
    }
    Ok(total / indices.len() as f64)
}

/// Loss and parameter gradients of one batch.
pub fn batch_gradients<T: Element>(ckpt: &Checkpoint<T>, x: &Tensor<T>, y: &Tensor<T>) -> Result<(f64, Vec<Tensor<T>>)> {
    let trace = forward_trace(ckpt, x)?;
    let (loss, grad) = mse_loss(&trace.output, y)?;
    Ok((loss.to_f64(), backward(ckpt, &trace, &grad)?))
}

/// Trains a freshly initialized network (Xavier weights from `cfg.seed`).
pub fn train<T: Element>(
    config: &ModelConfig,
    data: &Dataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    let ckpt = build::<T>(config, cfg.seed)?;
    train_from(ckpt, data, cfg, on_epoch)
}

/// Continues training from `ckpt`, taking its epoch, learning rate and best
/// validation loss from the checkpoint metadata. Adam moments start from zero.
pub fn train_from<T: Element>(
    mut ckpt: Checkpoint<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if data.split.train.is_empty() || data.split.val.is_empty() {
        return Err(Error::invalid("training needs non-empty train and validation splits"));
    }
    if ckpt.config.input_channels != data.input_channels() {
        return Err(Error::shape(format!(
            "model takes {} transmits, dataset provides {}",
            ckpt.config.input_channels,
            data.input_channels()
        )));
    }
    let resumed = ckpt.meta.epoch > 0;
    let mut state = TrainState {
        epoch: ckpt.meta.epoch,
        schedule: Schedule::new(
            if resumed { ckpt.meta.learning_rate } else { cfg.initial_lr },
            cfg.lr_patience_epochs,
            cfg.stop_patience_epochs,
        ),
        adam: AdamState::new(&ckpt.params()),
    };
    state.schedule.best_val_loss = if resumed { ckpt.meta.best_val_loss } else { None };
    ckpt.meta.input_scale = data.scale;
    ckpt.meta.seed = cfg.seed;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ba7c4);
    let mut order = data.split.train.clone();
    let mut best = ckpt.clone();
    let mut log = Vec::new();
    let mut stopped_early = false;

    while state.epoch < cfg.max_epochs {
        let started = Instant::now();
        let epoch = state.epoch + 1;
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = data.batch::<T>(chunk);
            let (loss, grads) = batch_gradients(&ckpt, &x, &y)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged(epoch, &best));
            }
            train_total += loss * chunk.len() as f64;
            let lr = state.schedule.lr;
            adam_step(&mut ckpt.params_mut(), &grads, &mut state.adam, lr, &cfg.adam)?;
        }
        let train_loss = train_total / order.len() as f64;
        let val_loss = evaluate_loss(&ckpt, data, &data.split.val, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(diverged(epoch, &best));
        }

        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: state.schedule.lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        let action = state.schedule.update(val_loss);
        state.epoch = epoch;
        ckpt.meta.epoch = epoch;
        ckpt.meta.learning_rate = state.schedule.lr;
        ckpt.meta.best_val_loss = state.schedule.best_val_loss;
        if action == ScheduleAction::Improved {
            best = ckpt.clone();
        }
        info!(
            "epoch {epoch}: train {train_loss:.4e} val {val_loss:.4e} lr {:.2e} ({:.1}s)",
            record.lr, record.seconds
        );
        on_epoch(&record);
        log.push(record);
        if action == ScheduleAction::Halved {
            info!("learning rate halved to {:.2e}", state.schedule.lr);
        }
        if action == ScheduleAction::Stop {
            stopped_early = true;
            break;
        }
    }
    // the best snapshot carries the schedule position reached at the end
    best.meta.epoch = state.epoch;
    best.meta.learning_rate = state.schedule.lr;
    Ok(TrainOutcome {
        best,
        last: ckpt,
        log,
        stopped_early,
    })
}

fn diverged<T: Element>(epoch: usize, last_good: &Checkpoint<T>) -> Error {
    Error::Diverged {
        epoch,
        checkpoint: model::to_bytes(last_good).ok(),
    }
}
