//! The traditional epoch loop and the loss-ranked hard-mini-batch loop.
//!
//! Both loops count parameter updates with one global back-propagation
//! counter. A checkpoint is taken every time that counter reaches a multiple
//! of `N`, so records of the two loops line up on equal update budgets.

mod ledger;
mod loops;
mod schedule;

pub use self::ledger::{select_hard_batches, LedgerEntry, LossLedger};
pub use self::loops::{train, train_proposed, train_traditional, ProposedRun};
pub use self::schedule::{compute_schedule, Schedule};

use crate::metrics::{EvalResult, MetricsRecord};
use crate::optim::{DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `E`.
    pub epochs: usize,
    /// `B`.
    pub batch_size: usize,
    /// `δ`, the fraction of mini-batches trained per selection round.
    pub delta: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Evaluate the test batches at the start of every selection round, in
    /// addition to the epoch-equivalent checkpoints.
    pub eval_every_round: bool,
}

pub const DEFAULT_BATCH_SIZE: usize = 512;
pub const DEFAULT_EPOCHS: usize = 30;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            delta: 1.0,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            seed: 0,
            eval_every_round: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        check_delta(self.delta)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("delta must be in (0,1], got {delta}")))
    }
}

/// One selection round of the loss-ranked loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEvent {
    pub round_index: u64,
    /// Counter value when the round started.
    pub backprop_count: u64,
    /// Trained batch ids, in training order.
    pub selected: Vec<usize>,
    /// Ledger losses of `selected` at sort time.
    pub selected_losses: Vec<f64>,
    /// Test metrics at the start of the round, when per-round evaluation is on.
    pub test: Option<EvalResult>,
}

/// Receives checkpoints and round events as a run progresses.
pub trait MetricsSink {
    fn record(&mut self, record: &MetricsRecord);

    fn round(&mut self, _event: &RoundEvent) {}
}

/// Keeps everything it is given.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordingSink {
    pub records: Vec<MetricsRecord>,
    pub rounds: Vec<RoundEvent>,
}

impl MetricsSink for RecordingSink {
    fn record(&mut self, record: &MetricsRecord) {
        self.records.push(record.clone());
    }

    fn round(&mut self, event: &RoundEvent) {
        self.rounds.push(event.clone());
    }
}

impl MetricsSink for Vec<MetricsRecord> {
    fn record(&mut self, record: &MetricsRecord) {
        self.push(record.clone());
    }
}

/// Final state of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub backprop_count: u64,
    pub schedule: Schedule,
    pub train_seconds: f64,
    pub sort_seconds: f64,
    /// Present for loss-ranked runs.
    pub ledger: Option<LossLedger>,
}
