//! One-vs-one RBF-SVM at fixed (C, gamma) on a stratified segment split.

use xgwo_svm::features;
use xgwo_svm::harness::{self, PipelineConfig};
use xgwo_svm::ingest::{self, SynthConfig};
use xgwo_svm::svm::{self, KernelParams, SmoSettings};

fn main() -> xgwo_svm::Result<()> {
    let ds = ingest::synth_dataset(&SynthConfig::default())?;
    let cfg = PipelineConfig::default();
    let fv = features::extract_all(&harness::preprocess(&ds, &cfg)?.segments, cfg.u)?;
    let labels: Vec<usize> = fv.iter().map(|f| f.label).collect();
    let (train, test) = harness::stratified_holdout(&labels, 0.3, 1)?;
    let tr: Vec<_> = train.iter().map(|&i| fv[i].clone()).collect();
    let te: Vec<_> = test.iter().map(|&i| fv[i].clone()).collect();

    let x: Vec<&[f64]> = tr.iter().map(|f| f.values.as_slice()).collect();
    let y: Vec<usize> = tr.iter().map(|f| f.label).collect();
    let model = svm::train_multiclass(&x, &y, KernelParams::new(10.0, 0.01)?, &SmoSettings::default())?;
    for m in &model.binary_models {
        println!(
            "pair {:?}: {} support vectors, dual objective {:.4}, {} updates",
            m.class_pair,
            m.support_vectors.len(),
            m.dual_objective,
            m.iterations
        );
    }
    let report = harness::evaluate_model(&model, &te)?;
    println!("held-out accuracy {:.4}, macro F1 {:.4}", report.top1_accuracy, report.macro_f1);
    Ok(())
}
