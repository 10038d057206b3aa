//! Five-fold cross-validation of the tuned pipeline on synthetic data.

use std::time::Instant;

use xgwo_svm::harness::{self, ExperimentConfig, Protocol};
use xgwo_svm::ingest::{synth_dataset, SynthConfig};
use xgwo_svm::optimizer::{OptimizerConfig, Variant};

fn main() -> xgwo_svm::Result<()> {
    let ds = synth_dataset(&SynthConfig {
        noise_sigma: 0.05,
        ..SynthConfig::default()
    })?;
    let config = ExperimentConfig {
        optimizer: OptimizerConfig {
            n_agents: 10,
            max_iter: 20,
            ..OptimizerConfig::default()
        },
        variants: vec![Variant::XGwo],
        protocol: Protocol::KFold { k: 5 },
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let table = harness::run_experiment(&ds, &config)?;
    print!("{}", table.to_text());
    for f in &table.rows[0].folds {
        println!(
            "{}: acc {:.4}  C {:.3e}  gamma {:.3e}  inner loss {:.4}",
            f.partition, f.report.top1_accuracy, f.params.c_penalty, f.params.gamma, f.best_fitness
        );
    }
    println!("elapsed {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
