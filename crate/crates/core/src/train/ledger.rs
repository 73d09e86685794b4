use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub batch_id: usize,
    /// Loss of the batch at its most recent back-propagation, measured
    /// before that update was applied.
    pub last_loss: f64,
    /// Counter value right after that back-propagation.
    pub last_updated_backprop: u64,
}

/// The `(batch, loss)` list driving hard-batch selection, indexed by batch
/// id.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLedger {
    entries: Vec<LedgerEntry>,
}

impl LossLedger {
    /// Entry `i` must describe batch `i`.
    pub fn new(entries: Vec<LedgerEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("ledger needs at least one batch".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.batch_id != i {
                return Err(Error::Data(format!("ledger slot {i} holds batch {}", e.batch_id)));
            }
            if !(e.last_loss >= 0.0) {
                return Err(Error::Data(format!(
                    "ledger loss {} for batch {i} is not a non-negative number",
                    e.last_loss
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Ledger with `losses[i]` for batch `i`, all stamped at counter 0.
    pub fn from_losses(losses: &[f64]) -> Result<Self> {
        Self::new(
            losses
                .iter()
                .enumerate()
                .map(|(batch_id, &last_loss)| LedgerEntry {
                    batch_id,
                    last_loss,
                    last_updated_backprop: 0,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn loss(&self, batch_id: usize) -> f64 {
        self.entries[batch_id].last_loss
    }

    pub fn update(&mut self, batch_id: usize, loss: f64, backprop_count: u64) {
        let e = &mut self.entries[batch_id];
        e.last_loss = loss;
        e.last_updated_backprop = backprop_count;
    }
}

/// Ids of the `s` entries with the largest loss, in descending loss order.
/// Equal losses keep ascending id order.
pub fn select_hard_batches(ledger: &LossLedger, s: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..ledger.len()).collect();
    // stable sort over ascending ids
    ids.sort_by(|&a, &b| ledger.loss(b).total_cmp(&ledger.loss(a)));
    ids.truncate(s.min(ledger.len()));
    ids
}
