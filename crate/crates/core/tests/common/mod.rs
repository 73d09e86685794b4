#![allow(dead_code)]

use hardmb::data::{make_batches, synth_imbalanced_blobs, BatchPlan, Dataset, Standardizer, SynthSpec};
use hardmb::nn::{init_network, softmax_cross_entropy, Activation, Mlp};
use hardmb::tensor::Tensor;
use hardmb::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(&[rows, cols], data).unwrap()
}

/// Random biases too, so no parameter sits at an init-time special value.
pub fn random_mlp(sizes: &[usize], seed: u64) -> Mlp<f64> {
    let mut net = init_network::<f64>(sizes, seed).unwrap();
    let mut r = rng(seed ^ 0xb1a5);
    for p in net.parameters_mut() {
        for v in p.data_mut() {
            *v += r.random_range(-0.3..0.3);
        }
    }
    net
}

/// Forward pass with explicit triple loops.
/// Returns the output rows and every pre-activation seen on the way.
pub fn naive_forward(net: &Mlp<f64>, x: &Tensor<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut h: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i).to_vec()).collect();
    let mut pre_all = Vec::new();
    for layer in net.layers() {
        let (din, dout) = (layer.in_dim(), layer.out_dim());
        let w = layer.weights.data();
        let mut next = vec![vec![0.0; dout]; h.len()];
        for (i, row) in h.iter().enumerate() {
            for j in 0..dout {
                let mut s = layer.bias.data()[j];
                for k in 0..din {
                    s += row[k] * w[k * dout + j];
                }
                pre_all.push(s);
                next[i][j] = match layer.activation {
                    Activation::Relu => s.max(0.0),
                    Activation::Identity => s,
                };
            }
        }
        h = next;
    }
    (h, pre_all)
}

pub fn min_abs_preactivation(net: &Mlp<f64>, x: &Tensor<f64>) -> f64 {
    let (_, pre) = naive_forward(net, x);
    pre.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

pub fn loss_of<T: Scalar>(net: &Mlp<T>, x: &Tensor<T>, y: &[usize]) -> f64 {
    let logits = net.forward(x).unwrap();
    softmax_cross_entropy(&logits, y).unwrap().0.as_f64()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn blobs(
    n: usize,
    fractions: &[f64],
    dim: usize,
    sep: f64,
    noise: f64,
    seed: u64,
) -> (Dataset<f32>, Dataset<f32>) {
    let (mut tr, mut te) = synth_imbalanced_blobs::<f32>(&SynthSpec {
        n_samples: n,
        class_fractions: fractions.to_vec(),
        dim,
        class_separation: sep,
        noise,
        seed,
    })
    .unwrap();
    let s = Standardizer::fit(&tr);
    s.apply(&mut tr).unwrap();
    s.apply(&mut te).unwrap();
    (tr, te)
}

pub fn blob_plan(n: usize, sep: f64, noise: f64, batch: usize, seed: u64) -> BatchPlan<f32> {
    let (tr, te) = blobs(n, &[0.95, 0.05], 16, sep, noise, seed);
    make_batches(&tr, &te, batch, seed).unwrap()
}
