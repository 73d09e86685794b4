use std::fs;
use std::path::Path;
use std::process::Command;

use hardmb::harness::{DatasetSource, Dtype};
use hardmb::Error;
use hardmb_cli::{exit_code, parse_config, CliError};

fn parse(args: &[&str]) -> Result<hardmb::harness::ExperimentSpec, CliError> {
    let argv = std::iter::once("hardmb").chain(args.iter().copied());
    parse_config(argv, Path::new("default-out"))
}

fn usage_message(r: Result<hardmb::harness::ExperimentSpec, CliError>) -> String {
    match r {
        Err(CliError::Run(Error::Usage(m))) => m,
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn delta_out_of_range_is_usage_error() {
    let msg = usage_message(parse(&["--dataset", "synth", "--delta", "1.5"]));
    assert_eq!(msg, "delta must be in (0,1]");
    let msg = usage_message(parse(&["--dataset", "synth", "--delta", "0"]));
    assert_eq!(msg, "delta must be in (0,1]");
}

#[test]
fn defaults() {
    let spec = parse(&["--dataset", "synth"]).unwrap();
    assert_eq!(spec.learning_rate, 0.005);
    assert_eq!(spec.momentum, 0.9);
    assert_eq!(spec.batch_size, 512);
    assert_eq!(spec.epochs, 30);
    assert_eq!(spec.tau, 0.02);
    assert_eq!(spec.deltas, vec![1.0]);
    assert_eq!(spec.seeds, vec![1]);
    assert_eq!(spec.dtype, Dtype::F32);
    assert_eq!(spec.out_dir, Path::new("default-out"));
    assert!(spec.layers.is_none());
    assert!(matches!(spec.dataset, DatasetSource::Synth { n_samples: 8000, dim: 16, .. }));
}

#[test]
fn flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "dataset = \"synth\"\nlr = 0.005\nmomentum = 0.5\ndelta = [1.0, 0.2]\nseed = [3]\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let spec = parse(&["--config", cfg, "--lr", "0.01"]).unwrap();
    assert_eq!(spec.learning_rate, 0.01);
    assert_eq!(spec.momentum, 0.5);
    assert_eq!(spec.deltas, vec![1.0, 0.2]);
    assert_eq!(spec.seeds, vec![3]);

    let spec = parse(&["--config", cfg, "--delta", "0.5", "--delta", "1"]).unwrap();
    assert_eq!(spec.deltas, vec![0.5, 1.0]);
    assert_eq!(spec.learning_rate, 0.005);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "dataset = \"synth\"\nlearning-rate = 0.1\n").unwrap();
    usage_message(parse(&["--config", cfg.to_str().unwrap()]));
}

#[test]
fn missing_dataset() {
    let msg = usage_message(parse(&[]));
    assert!(msg.contains("dataset"), "{msg}");
    let msg = usage_message(parse(&["--dataset", "csv"]));
    assert!(msg.contains("--csv-path"), "{msg}");
    let msg = usage_message(parse(&["--dataset", "idx", "--idx-images", "a"]));
    assert!(msg.contains("--idx-labels"), "{msg}");
}

#[test]
fn unknown_flag() {
    assert!(matches!(parse(&["--dataset", "synth", "--bogus"]), Err(CliError::Clap(_))));
}

#[test]
fn report_delta_e_needs_baseline() {
    usage_message(parse(&["--dataset", "synth", "--delta", "0.2", "--report-delta-e"]));
    parse(&["--dataset", "synth", "--delta", "1", "--delta", "0.2", "--report-delta-e"]).unwrap();
}

#[test]
fn csv_and_lists() {
    let spec = parse(&[
        "--dataset", "csv", "--csv-path", "train.csv", "--csv-label", "y", "--csv-no-header",
        "--layers", "4,8,3", "--dtype", "f64",
    ])
    .unwrap();
    assert_eq!(spec.layers, Some(vec![4, 8, 3]));
    assert_eq!(spec.dtype, Dtype::F64);
    match spec.dataset {
        DatasetSource::Csv { path, has_header, label, test_path } => {
            assert_eq!(path, Path::new("train.csv"));
            assert!(!has_header);
            assert_eq!(label, "y");
            assert!(test_path.is_none());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::Usage("x".into())), 1);
    assert_eq!(exit_code(&Error::Format("x".into())), 2);
    assert_eq!(exit_code(&Error::Parse { line: 1, msg: "x".into() }), 2);
    assert_eq!(exit_code(&Error::Divergence { batch_id: 0, backprop_count: 1, loss: f64::NAN }), 3);
}

fn hardmb(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hardmb"))
        .args(args)
        .env_remove("HARDMB_OUT")
        .output()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let out_s = out.to_str().unwrap();

    assert_eq!(hardmb(&["--delta", "1.5", "--dataset", "synth"]).status.code(), Some(1));
    assert_eq!(hardmb(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hardmb(&["--help"]).status.code(), Some(0));

    let missing = dir.path().join("missing.csv");
    let o = hardmb(&["--dataset", "csv", "--csv-path", missing.to_str().unwrap(), "--out", out_s]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "label,a\n0,1.0\n1,oops\n").unwrap();
    let o = hardmb(&["--dataset", "csv", "--csv-path", bad.to_str().unwrap(), "--out", out_s, "--force"]);
    assert_eq!(o.status.code(), Some(2));

    let small = [
        "--dataset", "synth", "--synth-samples", "400", "--epochs", "2", "--batch-size", "32",
        "--delta", "1", "--delta", "0.5", "--out", out_s, "--force",
    ];
    let o = hardmb(&small);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("comparison.csv").is_file());

    // refuses to overwrite without --force
    let o = hardmb(&small[..small.len() - 1]);
    assert_eq!(o.status.code(), Some(1));

    let o = hardmb(&[
        "--dataset", "synth", "--synth-samples", "400", "--epochs", "2", "--batch-size", "32",
        "--lr", "1e30", "--out", out_s, "--force",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("delta-1_seed-1").join("FAILED").is_file());
}

#[test]
fn env_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hardmb"))
        .args(["--dataset", "synth", "--synth-samples", "200", "--epochs", "1", "--batch-size", "40"])
        .env("HARDMB_OUT", dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("r").join("delta-1_seed-1").join("records.csv").is_file());
}
