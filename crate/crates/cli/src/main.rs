use std::process::ExitCode;

use hardmb::harness::run_experiment;
use hardmb_cli::{default_out, exit_code, parse_config, CliError};

fn main() -> ExitCode {
    let spec = match parse_config(std::env::args_os(), &default_out()) {
        Ok(s) => s,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
        Err(CliError::Run(e)) => {
            eprintln!("hardmb: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };

    let report = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hardmb: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };

    for run in &report.runs {
        match (&run.summary, &run.failure) {
            (Some(s), _) => println!(
                "{:<24} e={:<6} test top-1 {:6.2}  backprops {}",
                run.run_id, s.convergence_epoch, s.final_test_top1, s.backprop_count
            ),
            (None, Some(msg)) => println!("{:<24} FAILED: {msg}", run.run_id),
            (None, None) => {}
        }
    }
    if let Some(table) = &report.comparison {
        for row in &table.rows {
            println!(
                "delta {:<5} e {:.2} ± {:.2}  delta-e {:+.2}%  test top-1 {:.2} ± {:.2}",
                row.delta,
                row.convergence_epoch.mean,
                row.convergence_epoch.half_width,
                row.delta_e,
                row.test_top1.mean,
                row.test_top1.half_width
            );
        }
    }
    println!("artifacts in {}", spec.out_dir.display());

    if report.diverged() {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
