//! Ranked DCT features from one synthetic segment per class.

use xgwo_svm::features;
use xgwo_svm::harness::{self, PipelineConfig};
use xgwo_svm::ingest::{self, SynthConfig};

fn main() -> xgwo_svm::Result<()> {
    let ds = ingest::synth_dataset(&SynthConfig {
        n_subjects: 1,
        seconds_per_class: 10.0,
        ..SynthConfig::default()
    })?;
    let pre = harness::preprocess(&ds, &PipelineConfig::default())?;
    for label in 1..=ds.class_count() {
        let seg = pre.segments.iter().find(|s| s.label == label).expect("every class has segments");
        let fv = features::extract_features(seg, 95)?;
        let energy: f64 = fv.values.iter().map(|v| v * v).sum();
        let head: Vec<String> = fv.values.iter().take(6).map(|v| format!("{v:+.2}")).collect();
        println!(
            "class {label}: top coefficients [{}], energy kept {:.1}%",
            head.join(", "),
            100.0 * energy / seg.values.len() as f64
        );
    }
    Ok(())
}
