//! Feed-forward network, softmax cross-entropy and reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Fnv, Tensor};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Dense layer computing `act(x·W + b)` with `W` stored as `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Multilayer perceptron. Hidden layers use ReLU; the last layer emits raw
/// logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

/// One gradient tensor per parameter tensor, in [`Mlp::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<LayerGrad<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// He-style uniform initialization with bound `sqrt(6 / fan_in)` and zero
/// biases. Weights are drawn as `f64` and rounded into `T`, so the `f32`
/// and `f64` networks for one seed agree up to rounding.
pub fn init_network<T: Scalar>(layer_sizes: &[usize], seed: u64) -> Result<Mlp<T>> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "layer sizes need an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = layer_sizes.len() - 2;
    let layers = layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| T::of(rng.random_range(-bound..bound)))
                .collect();
            Layer {
                weights: Tensor::from_vec(&[fan_in, fan_out], data).expect("sized above"),
                bias: Tensor::zeros(&[fan_out]),
                activation: if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            }
        })
        .collect();
    Ok(Mlp { layers })
}

impl<T: Scalar> Mlp<T> {
    /// Assembles a network from explicit layers, checking that dimensions
    /// chain and that the output layer is linear.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Config("network needs at least one layer".into()));
        };
        if last.activation != Activation::Identity {
            return Err(Error::Config("output layer must use identity activation".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape().len() != 2 || l.bias.shape() != [l.out_dim()] {
                return Err(Error::Shape(format!(
                    "layer {i}: weights {:?}, bias {:?}",
                    l.weights.shape(),
                    l.bias.shape()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameter tensors in order `W0, b0, W1, b1, …`.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::default();
        for p in self.parameters() {
            h.write(p.checksum());
        }
        h.0
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.cast(),
                    bias: l.bias.cast(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input {:?} does not match network input size {}",
                x.shape(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits `[B × C]` for a batch `x [B × d]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer_forward(layer, &a)?;
        }
        Ok(a)
    }

    /// Mean cross-entropy of the batch and its exact gradient with respect to
    /// every parameter. The network is not modified.
    pub fn backward(&self, x: &Tensor<T>, labels: &[usize]) -> Result<(T, GradientSet<T>)> {
        self.check_input(x)?;
        // inputs[l] is the input of layer l; the last entry holds the logits.
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(x.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, inputs.last().expect("non-empty"))?;
            inputs.push(next);
        }
        let logits = inputs.pop().expect("logits");
        let (loss, mut delta) = softmax_cross_entropy(&logits, labels)?;

        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &inputs[l];
            let weights = input.t_matmul(&delta)?;
            let mut bias = Tensor::zeros(&[layer.out_dim()]);
            for i in 0..delta.rows() {
                for (b, &d) in bias.data_mut().iter_mut().zip(delta.row(i)) {
                    *b += d;
                }
            }
            grads.push(LayerGrad { weights, bias });
            if l > 0 {
                let mut prev = delta.matmul_t(&layer.weights)?;
                // inputs[l] = relu(z); relu'(z) = 1 exactly where the output is positive
                if self.layers[l - 1].activation == Activation::Relu {
                    for (g, &a) in prev.data_mut().iter_mut().zip(input.data()) {
                        if a <= T::zero() {
                            *g = T::zero();
                        }
                    }
                }
                delta = prev;
            }
        }
        grads.reverse();
        Ok((loss, GradientSet { layers: grads }))
    }
}

fn layer_forward<T: Scalar>(layer: &Layer<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut z = x.matmul(&layer.weights)?;
    let m = layer.out_dim();
    let bias = layer.bias.data();
    for (i, v) in z.data_mut().iter_mut().enumerate() {
        *v += bias[i % m];
        if layer.activation == Activation::Relu && *v < T::zero() {
            *v = T::zero();
        }
    }
    Ok(z)
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} labels for {rows} logit rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`, and
/// its gradient `(softmax − onehot) / B`. Each row is shifted by its maximum
/// before exponentiation.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    let (n, c) = (logits.rows(), logits.cols());
    check_labels(labels, n, c)?;
    let inv_n = T::one() / T::of(n as f64);
    let mut grad = logits.clone();
    let mut total = T::zero();
    for (i, &y) in labels.iter().enumerate() {
        let row = &mut grad.data_mut()[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        total += sum.ln() + max - logits.row(i)[y];
        for v in row.iter_mut() {
            *v = *v / sum * inv_n;
        }
        row[y] -= inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Per-row cross-entropy evaluated in `f64`, used for size-weighted
/// aggregation across batches.
pub fn row_losses<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Vec<f64>> {
    let (n, c) = (logits.rows(), logits.cols());
    check_labels(labels, n, c)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row: Vec<f64> = logits.row(i).iter().map(|v| v.as_f64()).collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .collect())
}

impl<T: Scalar> GradientSet<T> {
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net(d: usize) -> Mlp<f64> {
        let mut w = Tensor::zeros(&[d, d]);
        for i in 0..d {
            w.data_mut()[i * d + i] = 1.0;
        }
        Mlp::from_layers(vec![Layer {
            weights: w,
            bias: Tensor::zeros(&[d]),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(init_network::<f32>(&[4], 0), Err(Error::Config(_))));
        assert!(matches!(init_network::<f32>(&[], 0), Err(Error::Config(_))));
        assert!(matches!(init_network::<f32>(&[4, 0, 2], 0), Err(Error::Config(_))));
    }

    #[test]
    fn init_zero_biases_and_bounded_weights() {
        let net = init_network::<f32>(&[2, 2], 7).unwrap();
        assert_eq!(net.layers()[0].bias.data(), &[0.0, 0.0]);
        let net = init_network::<f64>(&[10, 5, 3], 7).unwrap();
        for l in net.layers() {
            let bound = (6.0 / l.in_dim() as f64).sqrt();
            assert!(l.weights.data().iter().all(|w| w.abs() <= bound));
            assert!(l.bias.data().iter().all(|&b| b == 0.0));
        }
        assert_eq!(net.layers()[0].activation, Activation::Relu);
        assert_eq!(net.layers()[1].activation, Activation::Identity);
        assert_eq!(net.parameter_count(), 10 * 5 + 5 + 5 * 3 + 3);
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_network::<f32>(&[8, 16, 3], 42).unwrap();
        let b = init_network::<f32>(&[8, 16, 3], 42).unwrap();
        let c = init_network::<f32>(&[8, 16, 3], 43).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn from_layers_checks_chain() {
        let l = |i, o, act| Layer::<f32> {
            weights: Tensor::zeros(&[i, o]),
            bias: Tensor::zeros(&[o]),
            activation: act,
        };
        assert!(Mlp::from_layers(vec![l(2, 3, Activation::Relu), l(4, 2, Activation::Identity)]).is_err());
        assert!(Mlp::from_layers(vec![l(2, 3, Activation::Relu)]).is_err());
        assert!(Mlp::from_layers(vec![l(2, 3, Activation::Relu), l(3, 2, Activation::Identity)]).is_ok());
    }

    #[test]
    fn forward_zero_net_gives_zero_logits() {
        let mut net = init_network::<f32>(&[3, 4, 2], 1).unwrap();
        for p in net.parameters_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_identity_net_passes_input_through() {
        let net = identity_net(3);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = identity_net(3);
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(net.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_uniform_is_ln2() {
        let logits = Tensor::from_vec(&[1, 2], vec![0.0f64, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(grad.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_saturated_is_finite() {
        let logits = Tensor::from_vec(&[1, 2], vec![1000.0f32, -1000.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-6);
        assert!(grad.all_finite());
        let logits = Tensor::from_vec(&[1, 2], vec![1e4f32, -1e4]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(loss.is_finite());
        assert!((loss - 2e4).abs() < 1.0);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let logits = Tensor::from_vec(&[1, 2], vec![0.0f32, 0.0]).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, &[2]), Err(Error::Data(_))));
        assert!(matches!(softmax_cross_entropy(&logits, &[0, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_net_output_bias_gradient_closed_form() {
        // At zero weights every softmax is uniform (1/C), so the output bias
        // gradient is (1/C − class frequency) per class.
        let mut net = init_network::<f64>(&[3, 4, 2], 5).unwrap();
        for p in net.parameters_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::from_vec(&[4, 3], (0..12).map(|v| v as f64).collect()).unwrap();
        let (loss, g) = net.backward(&x, &[0, 1, 0, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(g.layers[1].bias.data(), &[0.0, 0.0]);
        let (_, g) = net.backward(&x, &[0, 0, 0, 1]).unwrap();
        let b = g.layers[1].bias.data();
        assert!((b[0] - (0.5 - 0.75)).abs() < 1e-12);
        assert!((b[1] - (0.5 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn backward_leaves_network_unchanged() {
        let net = init_network::<f32>(&[3, 5, 2], 9).unwrap();
        let before = net.checksum();
        let x = Tensor::from_vec(&[2, 3], vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6]).unwrap();
        net.backward(&x, &[1, 0]).unwrap();
        assert_eq!(net.checksum(), before);
    }

    #[test]
    fn row_losses_match_mean_loss() {
        let logits = Tensor::from_vec(&[2, 3], vec![0.3f64, -1.0, 2.0, 5.0, 0.0, -3.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[2, 1]).unwrap();
        let rows = row_losses(&logits, &[2, 1]).unwrap();
        assert!((loss - (rows[0] + rows[1]) / 2.0).abs() < 1e-12);
    }
}
