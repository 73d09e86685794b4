//! SGD with heavy-ball momentum.

use crate::nn::{GradientSet, Mlp};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Default learning rate and momentum of the reference training setup.
pub const DEFAULT_LEARNING_RATE: f64 = 0.005;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    velocity: Vec<Tensor<T>>,
    learning_rate: T,
    momentum: T,
}

impl<T: Scalar> OptimizerState<T> {
    /// Zero velocity shaped like `net`'s parameters.
    pub fn new(net: &Mlp<T>, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            velocity: net
                .parameters()
                .into_iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect(),
            learning_rate: T::of(learning_rate),
            momentum: T::of(momentum),
        })
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn momentum(&self) -> T {
        self.momentum
    }
}

/// `v ← μ·v + g; w ← w − η·v` for every parameter element.
pub fn sgd_momentum_step<T: Scalar>(
    net: &mut Mlp<T>,
    grads: &GradientSet<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    let grads = grads.tensors();
    let params = net.parameters_mut();
    if grads.len() != params.len() || state.velocity.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} velocities",
            params.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    let (lr, mu) = (state.learning_rate, state.momentum);
    for ((w, g), v) in params.into_iter().zip(grads).zip(&mut state.velocity) {
        if w.shape() != g.shape() || w.shape() != v.shape() {
            return Err(Error::Shape(format!(
                "parameter {:?}, gradient {:?}, velocity {:?}",
                w.shape(),
                g.shape(),
                v.shape()
            )));
        }
        for ((wi, &gi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = mu * *vi + gi;
            *wi -= lr * *vi;
        }
    }
    Ok(())
}
