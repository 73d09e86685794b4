//! Baseline vs. δ = 0.2 convergence epochs on the imbalanced-blob problem.
//!
//! cargo run --release -p hardmb --example speedup_scan -- [separation] [noise] [seeds]

use hardmb::data::{make_batches, synth_imbalanced_blobs, Standardizer, SynthSpec};
use hardmb::metrics::{compute_delta_e, detect_convergence_epoch};
use hardmb::nn::init_network;
use hardmb::train::{train, RecordingSink, TrainConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|a| a.parse().ok()).unwrap_or(default)
}

fn main() -> hardmb::Result<()> {
    let separation = arg(1, 1.5);
    let noise = arg(2, 1.0);
    let seeds: u64 = arg(3, 5);

    let mut wins = 0;
    let mut delta_es = Vec::new();
    for seed in 1..=seeds {
        let (mut tr, mut te) = synth_imbalanced_blobs::<f32>(&SynthSpec {
            n_samples: 8000,
            class_fractions: vec![0.95, 0.05],
            dim: 16,
            class_separation: separation,
            noise,
            seed,
        })?;
        let s = Standardizer::fit(&tr);
        s.apply(&mut tr)?;
        s.apply(&mut te)?;
        let plan = make_batches(&tr, &te, 64, seed)?;

        let mut es = Vec::new();
        for delta in [1.0, 0.2] {
            let mut net = init_network::<f32>(&[16, 32, 2], seed)?;
            let cfg = TrainConfig {
                epochs: 30,
                batch_size: 64,
                delta,
                learning_rate: 0.01,
                momentum: 0.9,
                seed,
                eval_every_round: false,
            };
            let mut sink = RecordingSink::default();
            train(&mut net, &plan, &cfg, &mut sink)?;
            let e = detect_convergence_epoch(&sink.records, 0.02)?;
            let last = sink.records.last().expect("records");
            println!(
                "seed {seed:>3} delta {delta:<4} e {e:>4} train loss {:.4} test top-1 {:.2}",
                last.train_loss, last.test_top1
            );
            es.push(e);
        }
        if es[1] <= es[0] {
            wins += 1;
        }
        delta_es.push(compute_delta_e(es[0], es[1])?);
    }
    let mean = delta_es.iter().sum::<f64>() / delta_es.len() as f64;
    println!("delta 0.2 no later than baseline in {wins}/{seeds} seeds, mean delta-e {mean:+.2}%");
    Ok(())
}
