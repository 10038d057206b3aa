//! Labeled signal datasets: manifest loading and writing, a seeded synthetic
//! generator, and train/test partitioning.
//!
//! A manifest is a UTF-8 text file:
//!
//! ```text
//! name,K,sample_rate_hz
//! subject_id,label,relative_path[,sample_rate_hz]
//! ...
//! ```
//!
//! Lines starting with `#` are comments, except `#classes=a;b;c` which names
//! the classes in label order. Signal files are `.csv` (one value per line)
//! or `.f32` (raw little-endian 32-bit floats).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled single-channel recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub subject_id: String,
    /// 1-based class label.
    pub label: usize,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl SignalRecord {
    pub fn new(subject_id: impl Into<String>, label: usize, sample_rate_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("signal record has no samples".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if label == 0 {
            return Err(Error::InvalidInput("labels are 1-based".into()));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            label,
            sample_rate_hz,
            samples,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// `class_names[label - 1]` names class `label`.
    pub class_names: Vec<String>,
    pub sample_rate_hz: f64,
    pub records: Vec<SignalRecord>,
}

impl DatasetManifest {
    pub fn new(
        name: impl Into<String>,
        class_names: Vec<String>,
        sample_rate_hz: f64,
        records: Vec<SignalRecord>,
    ) -> Result<Self> {
        let manifest = Self {
            name: name.into(),
            class_names,
            sample_rate_hz,
            records,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() {
            return Err(Error::InvalidInput("dataset declares no classes".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.label == 0 || r.label > self.class_count() {
                return Err(Error::InvalidInput(format!(
                    "record {i}: label {} outside 1..={}",
                    r.label,
                    self.class_count()
                )));
            }
            if r.sample_rate_hz != self.sample_rate_hz {
                return Err(Error::InvalidInput(format!(
                    "record {i}: sample rate {} differs from dataset rate {}",
                    r.sample_rate_hz, self.sample_rate_hz
                )));
            }
            if r.samples.is_empty() {
                return Err(Error::InvalidInput(format!("record {i} has no samples")));
            }
        }
        Ok(())
    }

    /// Distinct subject ids in first-appearance order.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.subject_id.as_str()) {
                out.push(r.subject_id.clone());
            }
        }
        out
    }

    fn with_records(&self, records: Vec<SignalRecord>) -> Self {
        Self {
            name: self.name.clone(),
            class_names: self.class_names.clone(),
            sample_rate_hz: self.sample_rate_hz,
            records,
        }
    }
}

pub fn default_class_names(k: usize) -> Vec<String> {
    (1..=k).map(|c| format!("class_{c}")).collect()
}

/// On-disk encoding of a signal file, chosen by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Csv,
    F32,
}

impl SignalFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Some(SignalFormat::Csv),
            Some(e) if e.eq_ignore_ascii_case("f32") => Some(SignalFormat::F32),
            _ => None,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            SignalFormat::Csv => "csv",
            SignalFormat::F32 => "f32",
        }
    }
}

pub fn read_signal_file(path: &Path) -> Result<Vec<f64>> {
    let format = SignalFormat::from_path(path).ok_or_else(|| {
        Error::malformed(path, 0, "signal file extension must be .csv or .f32")
    })?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let samples = match format {
        SignalFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| Error::malformed(path, 0, "not UTF-8"))?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: f64 = line
                    .parse()
                    .map_err(|_| Error::malformed(path, i + 1, format!("not a number: {line:?}")))?;
                if !v.is_finite() {
                    return Err(Error::malformed(path, i + 1, "non-finite sample"));
                }
                out.push(v);
            }
            out
        }
        SignalFormat::F32 => {
            if bytes.len() % 4 != 0 {
                return Err(Error::malformed(
                    path,
                    0,
                    format!("length {} is not a multiple of 4 bytes", bytes.len()),
                ));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
    };
    if samples.is_empty() {
        return Err(Error::malformed(path, 0, "signal file holds no samples"));
    }
    Ok(samples)
}

pub fn write_signal_file(path: &Path, samples: &[f64]) -> Result<()> {
    let format = SignalFormat::from_path(path)
        .ok_or_else(|| Error::InvalidInput(format!("{}: extension must be .csv or .f32", path.display())))?;
    let bytes = match format {
        SignalFormat::Csv => {
            let mut s = String::with_capacity(samples.len() * 12);
            for v in samples {
                s.push_str(&format!("{v}\n"));
            }
            s.into_bytes()
        }
        SignalFormat::F32 => samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a manifest and every signal file it references.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut header: Option<(String, usize, f64)> = None;
    let mut class_names: Option<Vec<String>> = None;
    let mut records = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(names) = comment.trim().strip_prefix("classes=") {
                class_names = Some(names.split(';').map(|s| s.trim().to_string()).collect());
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some((_, k, rate)) = &header else {
            if fields.len() != 3 {
                return Err(Error::malformed(manifest_path, lineno, "header must be `name,K,sample_rate_hz`"));
            }
            let k: usize = fields[1]
                .parse()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::malformed(manifest_path, lineno, format!("bad class count {:?}", fields[1])))?;
            let rate: f64 = fields[2]
                .parse()
                .ok()
                .filter(|r: &f64| *r > 0.0 && r.is_finite())
                .ok_or_else(|| Error::malformed(manifest_path, lineno, format!("bad sample rate {:?}", fields[2])))?;
            header = Some((fields[0].to_string(), k, rate));
            continue;
        };
        let (k, rate) = (*k, *rate);

        if !(3..=4).contains(&fields.len()) {
            return Err(Error::malformed(
                manifest_path,
                lineno,
                "record must be `subject_id,label,relative_path[,sample_rate_hz]`",
            ));
        }
        if fields[0].is_empty() {
            return Err(Error::malformed(manifest_path, lineno, "empty subject id"));
        }
        let label: usize = fields[1]
            .parse()
            .map_err(|_| Error::malformed(manifest_path, lineno, format!("bad label {:?}", fields[1])))?;
        if label == 0 || label > k {
            return Err(Error::LabelOutOfRange {
                path: manifest_path.to_path_buf(),
                line: lineno,
                label,
                classes: k,
            });
        }
        if let Some(r) = fields.get(3) {
            let found: f64 = r
                .parse()
                .map_err(|_| Error::malformed(manifest_path, lineno, format!("bad sample rate {r:?}")))?;
            if found != rate {
                return Err(Error::SampleRateMismatch {
                    path: manifest_path.to_path_buf(),
                    line: lineno,
                    expected: rate,
                    found,
                });
            }
        }
        let signal_path = base.join(fields[2]);
        let samples = read_signal_file(&signal_path).map_err(|e| match e {
            missing @ Error::MissingFile(_) => missing.context(format!("{}:{lineno}", manifest_path.display())),
            other => other,
        })?;
        records.push(SignalRecord {
            subject_id: fields[0].to_string(),
            label,
            sample_rate_hz: rate,
            samples,
        });
    }

    let (name, k, rate) = header.ok_or_else(|| Error::malformed(manifest_path, 0, "empty manifest"))?;
    let class_names = match class_names {
        Some(names) if names.len() == k => names,
        Some(names) => {
            return Err(Error::malformed(
                manifest_path,
                0,
                format!("#classes names {} classes but header declares {k}", names.len()),
            ))
        }
        None => default_class_names(k),
    };
    DatasetManifest::new(name, class_names, rate, records)
}

/// Writes `manifest.csv` plus one signal file per record into `dir`.
/// Returns the manifest path.
pub fn write_dataset(dataset: &DatasetManifest, dir: impl AsRef<Path>, format: SignalFormat) -> Result<PathBuf> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut text = format!(
        "{},{},{}\n#classes={}\n",
        dataset.name,
        dataset.class_count(),
        dataset.sample_rate_hz,
        dataset.class_names.join(";")
    );
    for (i, r) in dataset.records.iter().enumerate() {
        let file = format!("rec{i:04}_s{}_c{}.{}", sanitize(&r.subject_id), r.label, format.extension());
        write_signal_file(&dir.join(&file), &r.samples)?;
        text.push_str(&format!("{},{},{}\n", r.subject_id, r.label, file));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Parameters of the synthetic sinusoid-mixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub seconds_per_class: f64,
    pub sample_rate_hz: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 5,
            n_classes: 4,
            seconds_per_class: 60.0,
            sample_rate_hz: 128.0,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

/// Tones complete a whole number of cycles every this many samples, so
/// windows of this length (or a multiple) all see the same phase.
pub const SYNTH_PERIOD_SAMPLES: usize = 200;

/// Highest tone, in cycles per [`SYNTH_PERIOD_SAMPLES`]; `0.35 fs`.
const SYNTH_MAX_CYCLES: usize = 70;

fn synth_fundamental_cycles(class: usize) -> usize {
    8 + 3 * (class - 1)
}

/// Fundamental frequency of class `c` (1-based).
pub fn synth_fundamental_hz(class: usize, sample_rate_hz: f64) -> f64 {
    synth_fundamental_cycles(class) as f64 * sample_rate_hz / SYNTH_PERIOD_SAMPLES as f64
}

/// Deterministic synthetic dataset: one record per (subject, class).
///
/// Class `c` sums the first `c` harmonics of a class-specific fundamental
/// (those below `0.35 fs`) with amplitude `1/sqrt(h)` and per-record
/// random phases, plus white Gaussian noise. Every tone completes a whole
/// number of cycles in [`SYNTH_PERIOD_SAMPLES`] samples.
pub fn synth_dataset(synth: &SynthConfig) -> Result<DatasetManifest> {
    if synth.n_subjects == 0 || synth.n_classes == 0 {
        return Err(Error::InvalidInput("synthetic dataset needs at least one subject and class".into()));
    }
    if synth_fundamental_cycles(synth.n_classes) > SYNTH_MAX_CYCLES {
        return Err(Error::InvalidInput(format!(
            "at most {} synthetic classes fit below 0.35 fs",
            (SYNTH_MAX_CYCLES - 8) / 3 + 1
        )));
    }
    if !(synth.seconds_per_class > 0.0 && synth.sample_rate_hz > 0.0) {
        return Err(Error::InvalidInput("duration and sample rate must be positive".into()));
    }
    if !(synth.noise_sigma >= 0.0 && synth.noise_sigma.is_finite()) {
        return Err(Error::InvalidInput("noise_sigma must be finite and non-negative".into()));
    }
    let n = (synth.seconds_per_class * synth.sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::InvalidInput("records would be empty".into()));
    }
    let noise = Normal::new(0.0, synth.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut records = Vec::with_capacity(synth.n_subjects * synth.n_classes);
    for s in 0..synth.n_subjects {
        for c in 1..=synth.n_classes {
            let mut rng = ChaCha8Rng::seed_from_u64(synth.seed);
            rng.set_stream(((s as u64) << 16) | c as u64);
            let f0 = synth_fundamental_hz(c, synth.sample_rate_hz);
            let gain = rng.random_range(0.8..1.2);
            let tones: Vec<(f64, f64, f64)> = (1..=c)
                .take_while(|h| h * synth_fundamental_cycles(c) <= SYNTH_MAX_CYCLES)
                .map(|h| {
                    let freq = f0 * h as f64;
                    let amp = gain / (h as f64).sqrt();
                    let phase = rng.random_range(0.0..2.0 * PI);
                    (freq, amp, phase)
                })
                .collect();
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / synth.sample_rate_hz;
                    let clean: f64 = tones
                        .iter()
                        .map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                        .sum();
                    if synth.noise_sigma > 0.0 {
                        clean + noise.sample(&mut rng)
                    } else {
                        clean
                    }
                })
                .collect();
            records.push(SignalRecord {
                subject_id: (s + 1).to_string(),
                label: c,
                sample_rate_hz: synth.sample_rate_hz,
                samples,
            });
        }
    }
    DatasetManifest::new(
        format!("synthetic-k{}-s{}", synth.n_classes, synth.seed),
        default_class_names(synth.n_classes),
        synth.sample_rate_hz,
        records,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitPolicy {
    /// Records of the listed subjects form the test side.
    BySubject(Vec<String>),
    /// A seeded random fraction `frac` of the records forms the training side.
    ByFraction { frac: f64, seed: u64 },
}

pub fn split_train_test(dataset: &DatasetManifest, policy: &SplitPolicy) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train, test): (Vec<SignalRecord>, Vec<SignalRecord>) = match policy {
        SplitPolicy::BySubject(holdout) => {
            let subjects = dataset.subject_ids();
            for id in holdout {
                if !subjects.contains(id) {
                    return Err(Error::InvalidInput(format!("holdout subject {id:?} not in dataset")));
                }
            }
            dataset
                .records
                .iter()
                .cloned()
                .partition(|r| !holdout.contains(&r.subject_id))
        }
        SplitPolicy::ByFraction { frac, seed } => {
            if !(*frac > 0.0 && *frac < 1.0) {
                return Err(Error::InvalidInput(format!("fraction must be in (0, 1), got {frac}")));
            }
            let (train_idx, _) = fraction_indices(dataset.records.len(), *frac, *seed);
            let mut is_train = vec![false; dataset.records.len()];
            for i in train_idx {
                is_train[i] = true;
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (r, t) in dataset.records.iter().zip(is_train) {
                if t {
                    train.push(r.clone());
                } else {
                    test.push(r.clone());
                }
            }
            (train, test)
        }
    };
    if train.is_empty() {
        return Err(Error::EmptySplit("training side".into()));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit("test side".into()));
    }
    Ok((dataset.with_records(train), dataset.with_records(test)))
}

/// Seeded shuffle of `0..n` split into `round(frac * n)` train indices and the
/// rest; both sides returned in ascending order.
pub fn fraction_indices(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let cut = ((n as f64) * frac).round() as usize;
    let (a, b) = idx.split_at(cut.min(n));
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}
