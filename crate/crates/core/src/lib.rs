//! Stress-level classification from single-channel physiological signals.
//!
//! The pipeline runs band-pass filtering, fixed-length segmentation,
//! DCT feature extraction, and an RBF-kernel SVM whose `(C, gamma)` pair
//! is tuned by a grey wolf optimizer with a nonlinear exploration schedule.
//!
//! ```no_run
//! use xgwo_svm::{ingest, harness};
//! let ds = ingest::synth_dataset(&ingest::SynthConfig::default())?;
//! let report = harness::run_experiment(&ds, &harness::ExperimentConfig::default())?;
//! println!("{}", report.to_text());
//! # Ok::<(), xgwo_svm::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod optimizer;
pub mod signal;
pub mod svm;

pub use error::{Error, Result};
