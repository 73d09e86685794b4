use super::check_delta;
use crate::{Error, Result};

/// Round structure of a loss-ranked run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    /// Number of training mini-batches, `N`.
    pub num_batches: usize,
    /// Batches trained per round, `S = max(1, round(δ·N))`.
    pub selection_size: usize,
    /// Number of rounds after the warm-up pass, `ζ`.
    pub zeta: usize,
}

impl Schedule {
    /// The traditional loop expressed as a schedule: every batch, `E − 1`
    /// times after the first epoch.
    pub fn traditional(epochs: usize, num_batches: usize) -> Self {
        Self {
            num_batches,
            selection_size: num_batches,
            zeta: epochs - 1,
        }
    }

    /// `N + ζ·S`.
    pub fn total_backprops(&self) -> u64 {
        (self.num_batches + self.zeta * self.selection_size) as u64
    }
}

/// `S = max(1, round(δ·N))` and `ζ = round((E − 1)·N / S)`, which makes
/// `N + ζ·S` the closest reachable count to `E·N` (off by at most `S/2`).
/// When `δ·N` and `(E − 1)/δ` are integers this is `ζ = (E − 1)/δ` exactly.
pub fn compute_schedule(epochs: usize, delta: f64, num_batches: usize) -> Result<Schedule> {
    check_delta(delta)?;
    if epochs == 0 || num_batches == 0 {
        return Err(Error::Config(format!(
            "need at least one epoch and one batch, got E={epochs}, N={num_batches}"
        )));
    }
    let selection_size = ((delta * num_batches as f64).round() as usize).clamp(1, num_batches);
    let budget = (epochs - 1) * num_batches;
    // round-half-up of budget / S in integers
    let zeta = (2 * budget + selection_size) / (2 * selection_size);
    Ok(Schedule {
        num_batches,
        selection_size,
        zeta,
    })
}
