//! Mini-batch training engine with two schedulers over a fixed batch plan:
//!
//! * the traditional epoch loop, which back-propagates every mini-batch once
//!   per epoch, and
//! * the loss-ranked loop, which after one warm-up pass repeatedly trains only
//!   the `δ·N` mini-batches with the highest recorded loss, for as many rounds
//!   as it takes to match the traditional back-propagation budget.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root pin the common choices.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod train;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating-point element type of tensors, networks and datasets.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    /// Short name used in configuration echoes (`"f32"`, `"f64"`).
    const NAME: &'static str;

    /// Lossless widening used for reporting and ledger bookkeeping.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Narrowing from `f64`; rounds to nearest for `f32`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    /// Raw bit pattern widened to 64 bits, for checksums.
    fn bits(self) -> u64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
    fn bits(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type BatchPlan32 = data::BatchPlan<f32>;
pub type BatchPlan64 = data::BatchPlan<f64>;
