//! Writes a synthetic 4-class dataset as a manifest plus CSV signal files.
//!
//! `cargo run --example synth_dataset -- [OUT_DIR]`

use xgwo_svm::ingest::{self, SignalFormat, SynthConfig};

fn main() -> xgwo_svm::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synth-data".into());
    let ds = ingest::synth_dataset(&SynthConfig::default())?;
    let manifest = ingest::write_dataset(&ds, &dir, SignalFormat::Csv)?;
    println!("{} -> {}", ds.name, manifest.display());
    for subject in ds.subject_ids() {
        let line: Vec<String> = ds
            .records
            .iter()
            .filter(|r| r.subject_id == subject)
            .map(|r| format!("{} {:.2} min", ds.class_names[r.label - 1], r.duration_s() / 60.0))
            .collect();
        println!("subject {subject}: {}", line.join(", "));
    }
    let back = ingest::load_dataset(&manifest)?;
    assert_eq!(back.records.len(), ds.records.len());
    Ok(())
}
