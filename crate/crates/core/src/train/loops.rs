use std::time::Instant;

use super::{
    compute_schedule, select_hard_batches, LedgerEntry, LossLedger, MetricsSink, RoundEvent,
    RunOutcome, Schedule, TrainConfig,
};
use crate::data::BatchPlan;
use crate::metrics::{evaluate, MetricsRecord};
use crate::nn::Mlp;
use crate::optim::{sgd_momentum_step, OptimizerState};
use crate::{Error, Result, Scalar};

/// State shared by both loops: the network, its optimizer, the update
/// counter and the training clock.
struct Session<'a, T> {
    net: &'a mut Mlp<T>,
    plan: &'a BatchPlan<T>,
    sink: &'a mut dyn MetricsSink,
    optimizer: OptimizerState<T>,
    backprop_count: u64,
    train_seconds: f64,
    sort_seconds: f64,
    round_index: Option<u64>,
}

impl<'a, T: Scalar> Session<'a, T> {
    fn new(
        net: &'a mut Mlp<T>,
        plan: &'a BatchPlan<T>,
        config: &TrainConfig,
        sink: &'a mut dyn MetricsSink,
    ) -> Result<Self> {
        config.validate()?;
        if config.batch_size != plan.batch_size() {
            return Err(Error::Config(format!(
                "config batch size {} but plan was cut at {}",
                config.batch_size,
                plan.batch_size()
            )));
        }
        if net.input_dim() != plan.dim() || net.output_dim() != plan.num_classes() {
            return Err(Error::Shape(format!(
                "network maps {} → {} but data has {} features and {} classes",
                net.input_dim(),
                net.output_dim(),
                plan.dim(),
                plan.num_classes()
            )));
        }
        let optimizer = OptimizerState::new(net, config.learning_rate, config.momentum)?;
        Ok(Self {
            net,
            plan,
            sink,
            optimizer,
            backprop_count: 0,
            train_seconds: 0.0,
            sort_seconds: 0.0,
            round_index: None,
        })
    }

    fn n(&self) -> u64 {
        self.plan.num_train_batches() as u64
    }

    /// Forward, backward and update on one training batch. Returns the
    /// batch loss measured before the update.
    fn backprop(&mut self, batch_id: usize) -> Result<f64> {
        let batch = &self.plan.train_batches()[batch_id];
        let start = Instant::now();
        let (loss, grads) = self.net.backward(&batch.x, &batch.y)?;
        let loss = loss.as_f64();
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Divergence {
                batch_id,
                backprop_count: self.backprop_count,
                loss,
            });
        }
        sgd_momentum_step(self.net, &grads, &mut self.optimizer)?;
        self.train_seconds += start.elapsed().as_secs_f64();
        self.backprop_count += 1;
        if self.backprop_count % self.n() == 0 {
            self.checkpoint()?;
        }
        Ok(loss)
    }

    /// Train and test metrics both come from a forward pass over every batch
    /// of the split with the current weights, so runs that train different
    /// batch subsets are measured on the same samples.
    fn checkpoint(&mut self) -> Result<()> {
        let train = evaluate(self.net, self.plan.train_batches())?;
        let test = evaluate(self.net, self.plan.test_batches())?;
        let record = MetricsRecord {
            backprop_count: self.backprop_count,
            epoch_equivalent: self.backprop_count as f64 / self.n() as f64,
            train_loss: train.loss,
            train_top1: train.top1,
            test_loss: test.loss,
            test_top1: test.top1,
            wall_seconds: self.train_seconds,
            round_index: self.round_index,
        };
        self.sink.record(&record);
        Ok(())
    }

    fn finish(self, schedule: Schedule, ledger: Option<LossLedger>) -> RunOutcome {
        RunOutcome {
            backprop_count: self.backprop_count,
            schedule,
            train_seconds: self.train_seconds,
            sort_seconds: self.sort_seconds,
            ledger,
        }
    }
}

/// `E` epochs over all `N` batches in id order, with a checkpoint (train and
/// test evaluation) after each epoch.
pub fn train_traditional<T: Scalar>(
    net: &mut Mlp<T>,
    plan: &BatchPlan<T>,
    config: &TrainConfig,
    sink: &mut dyn MetricsSink,
) -> Result<RunOutcome> {
    let mut session = Session::new(net, plan, config, sink)?;
    let n = plan.num_train_batches();
    for _ in 0..config.epochs {
        for id in 0..n {
            session.backprop(id)?;
        }
    }
    Ok(session.finish(Schedule::traditional(config.epochs, n), None))
}

/// The loss-ranked loop stepped one phase at a time: [`warm_up`] once, then
/// [`round`] `ζ` times, then [`finish`].
///
/// [`warm_up`]: ProposedRun::warm_up
/// [`round`]: ProposedRun::round
/// [`finish`]: ProposedRun::finish
pub struct ProposedRun<'a, T> {
    session: Session<'a, T>,
    schedule: Schedule,
    eval_every_round: bool,
    ledger: Option<LossLedger>,
    rounds_done: usize,
}

impl<'a, T: Scalar> ProposedRun<'a, T> {
    pub fn new(
        net: &'a mut Mlp<T>,
        plan: &'a BatchPlan<T>,
        config: &TrainConfig,
        sink: &'a mut dyn MetricsSink,
    ) -> Result<Self> {
        let session = Session::new(net, plan, config, sink)?;
        let schedule = compute_schedule(config.epochs, config.delta, plan.num_train_batches())?;
        Ok(Self {
            session,
            schedule,
            eval_every_round: config.eval_every_round,
            ledger: None,
            rounds_done: 0,
        })
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn backprop_count(&self) -> u64 {
        self.session.backprop_count
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// `None` until the warm-up pass has run.
    pub fn ledger(&self) -> Option<&LossLedger> {
        self.ledger.as_ref()
    }

    /// Back-propagates every batch once in id order and fills the ledger
    /// with the losses seen.
    pub fn warm_up(&mut self) -> Result<&LossLedger> {
        if self.ledger.is_some() {
            return Err(Error::Config("warm-up pass already done".into()));
        }
        let n = self.schedule.num_batches;
        let mut entries = Vec::with_capacity(n);
        for batch_id in 0..n {
            let last_loss = self.session.backprop(batch_id)?;
            entries.push(LedgerEntry {
                batch_id,
                last_loss,
                last_updated_backprop: self.session.backprop_count,
            });
        }
        Ok(self.ledger.insert(LossLedger::new(entries)?))
    }

    /// One selection round: optional test evaluation, sort the ledger,
    /// train the top `S` batches in sorted order and refresh their entries.
    /// Entries of unselected batches are left as they were.
    pub fn round(&mut self) -> Result<RoundEvent> {
        if self.ledger.is_none() {
            return Err(Error::Config("selection round before warm-up".into()));
        }
        if self.rounds_done >= self.schedule.zeta {
            return Err(Error::Config(format!(
                "all {} rounds already done",
                self.schedule.zeta
            )));
        }
        let round_index = self.rounds_done as u64;
        self.session.round_index = Some(round_index);
        let test = if self.eval_every_round {
            Some(evaluate(self.session.net, self.session.plan.test_batches())?)
        } else {
            None
        };
        let started_at = self.session.backprop_count;

        let ledger = self.ledger.as_mut().expect("checked above");
        let start = Instant::now();
        let selected = select_hard_batches(ledger, self.schedule.selection_size);
        let sort_time = start.elapsed().as_secs_f64();
        self.session.sort_seconds += sort_time;
        self.session.train_seconds += sort_time;
        let selected_losses = selected.iter().map(|&id| ledger.loss(id)).collect();

        for &id in &selected {
            let loss = self.session.backprop(id)?;
            let at = self.session.backprop_count;
            self.ledger.as_mut().expect("checked above").update(id, loss, at);
        }
        self.rounds_done += 1;
        let event = RoundEvent {
            round_index,
            backprop_count: started_at,
            selected,
            selected_losses,
            test,
        };
        self.session.sink.round(&event);
        Ok(event)
    }

    /// Adds a last checkpoint when the final count is not a multiple of `N`.
    pub fn finish(mut self) -> Result<RunOutcome> {
        if self.ledger.is_none() || self.rounds_done != self.schedule.zeta {
            return Err(Error::Config(format!(
                "run stopped after {} of {} rounds",
                self.rounds_done, self.schedule.zeta
            )));
        }
        if self.session.backprop_count % self.session.n() != 0 {
            self.session.checkpoint()?;
        }
        Ok(self.session.finish(self.schedule, self.ledger))
    }
}

/// Warm-up pass over all `N` batches, then `ζ` rounds of training the `S`
/// highest-loss batches. `δ = 1` runs [`train_traditional`] instead.
pub fn train_proposed<T: Scalar>(
    net: &mut Mlp<T>,
    plan: &BatchPlan<T>,
    config: &TrainConfig,
    sink: &mut dyn MetricsSink,
) -> Result<RunOutcome> {
    if config.delta == 1.0 {
        return train_traditional(net, plan, config, sink);
    }
    let mut run = ProposedRun::new(net, plan, config, sink)?;
    run.warm_up()?;
    for _ in 0..run.schedule().zeta {
        run.round()?;
    }
    run.finish()
}

/// Runs the loop selected by `config.delta`.
pub fn train<T: Scalar>(
    net: &mut Mlp<T>,
    plan: &BatchPlan<T>,
    config: &TrainConfig,
    sink: &mut dyn MetricsSink,
) -> Result<RunOutcome> {
    train_proposed(net, plan, config, sink)
}
