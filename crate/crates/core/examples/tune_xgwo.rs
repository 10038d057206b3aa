//! Tunes (C, gamma) with X-GWO on synthetic features and prints the trace.

use xgwo_svm::features;
use xgwo_svm::harness::{self, PipelineConfig};
use xgwo_svm::ingest::{self, SynthConfig};
use xgwo_svm::optimizer::{self, OptimizerConfig, SvmFitness};

fn main() -> xgwo_svm::Result<()> {
    let ds = ingest::synth_dataset(&SynthConfig {
        n_subjects: 3,
        ..SynthConfig::default()
    })?;
    let cfg = PipelineConfig::default();
    let fv = features::extract_all(&harness::preprocess(&ds, &cfg)?.segments, cfg.u)?;
    let labels: Vec<usize> = fv.iter().map(|f| f.label).collect();
    let (train, test) = harness::stratified_holdout(&labels, 0.2, 0)?;
    let side = |idx: &[usize]| -> (Vec<&[f64]>, Vec<usize>) {
        idx.iter().map(|&i| (fv[i].values.as_slice(), fv[i].label)).unzip()
    };
    let (train_features, train_labels) = side(&train);
    let (test_features, test_labels) = side(&test);
    let opt = OptimizerConfig {
        n_agents: 10,
        max_iter: 20,
        ..OptimizerConfig::default()
    };
    let fitness = SvmFitness {
        train_features,
        train_labels,
        test_features,
        test_labels,
        smo: opt.smo,
    };
    let out = optimizer::tune_svm(&opt, &fitness)?;
    for r in &out.trace.records {
        println!(
            "t={:>2} phi={:.3} best={:.4} at (log C, log gamma) = ({:+.3}, {:+.3})",
            r.t,
            r.phi.unwrap_or(f64::NAN),
            r.best_fitness,
            r.xi1[0],
            r.xi1[1]
        );
    }
    println!("C = {:.4e}, gamma = {:.4e}", out.params.c_penalty, out.params.gamma);
    out.trace.write_jsonl(std::io::stdout().lock(), false)?;
    Ok(())
}
