use serde::{Deserialize, Serialize};

/// Best-so-far tracking for learning-rate halving and early stopping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lr: f64,
    pub best_val_loss: Option<f64>,
    pub epochs_since_improvement: usize,
    pub lr_patience: usize,
    pub stop_patience: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleAction {
    /// New best validation loss.
    Improved,
    Continue,
    /// The learning rate was just halved.
    Halved,
    Stop,
}

impl Schedule {
    pub fn new(lr: f64, lr_patience: usize, stop_patience: usize) -> Self {
        Self {
            lr,
            best_val_loss: None,
            epochs_since_improvement: 0,
            lr_patience,
            stop_patience,
        }
    }

    /// Feeds one epoch's validation loss.
    ///
    /// Only a strict decrease of the best loss counts as improvement. The
    /// counter keeps running across halvings: the rate halves every
    /// `lr_patience` epochs without improvement and training stops once the
    /// counter reaches `stop_patience`.
    pub fn update(&mut self, val_loss: f64) -> ScheduleAction {
        if self.best_val_loss.is_none_or(|b| val_loss < b) {
            self.best_val_loss = Some(val_loss);
            self.epochs_since_improvement = 0;
            return ScheduleAction::Improved;
        }
        self.epochs_since_improvement += 1;
        let n = self.epochs_since_improvement;
        if n >= self.stop_patience {
            ScheduleAction::Stop
        } else if n % self.lr_patience == 0 {
            self.lr /= 2.0;
            ScheduleAction::Halved
        } else {
            ScheduleAction::Continue
        }
    }
}
