//! Cross-validation, classification metrics and experiment tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{self, mean_and_sample_variance, FeatureVector, SweepRow};
use crate::ingest::DatasetManifest;
use crate::optimizer::{self, OptimizerConfig, Regulation, RunTrace, SvmFitness, Variant};
use crate::signal::{self, Segment, WindowKind};
use crate::svm::{self, KernelParams, MulticlassSvmModel, SmoSettings};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<usize>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    /// Classes are the sorted union of both label vectors unless given.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: Option<&[usize]>) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let classes = match classes {
            Some(c) => c.to_vec(),
            None => {
                let mut c: Vec<usize> = truth.iter().chain(predicted).copied().collect();
                c.sort_unstable();
                c.dedup();
                c
            }
        };
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    fn position(&self, class: usize) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::InvalidInput(format!("class {class} not in confusion matrix {:?}", self.classes)))
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let (i, j) = (self.position(truth)?, self.position(predicted)?);
        self.counts[i][j] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::InvalidInput("cannot merge confusion matrices over different classes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    /// One-vs-rest accuracy `(TP + TN) / total`.
    pub acc: f64,
    pub pre: f64,
    pub rec: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    /// Fraction of samples on the diagonal.
    pub top1_accuracy: f64,
    /// Unweighted mean of per-class one-vs-rest accuracies.
    pub macro_acc: f64,
    pub macro_pre: f64,
    pub macro_rec: f64,
    pub macro_f1: f64,
    /// Sample variance of top-1 accuracy across the folds pooled here.
    pub fold_variance: f64,
    pub fold_accuracies: Vec<f64>,
    pub train_ms: f64,
    pub test_ms: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro metrics. Any zero denominator yields 0.
pub fn metrics_from_confusion(confusion: &ConfusionMatrix) -> Result<EvalReport> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::InvalidInput("confusion matrix is empty".into()));
    }
    let k = confusion.classes.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion.counts[i][i];
            let row: u64 = confusion.counts[i].iter().sum();
            let col: u64 = (0..k).map(|r| confusion.counts[r][i]).sum();
            let (fn_, fp) = (row - tp, col - tp);
            let tn = total - tp - fn_ - fp;
            let pre = ratio(tp, tp + fp);
            let rec = ratio(tp, tp + fn_);
            let f1 = if pre + rec > 0.0 { 2.0 * pre * rec / (pre + rec) } else { 0.0 };
            ClassMetrics {
                class: confusion.classes[i],
                tp,
                fp,
                tn,
                fn_,
                acc: ratio(tp + tn, total),
                pre,
                rec,
                f1,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let top1 = ratio(confusion.trace(), total);
    Ok(EvalReport {
        confusion: confusion.clone(),
        macro_acc: mean(|m| m.acc),
        macro_pre: mean(|m| m.pre),
        macro_rec: mean(|m| m.rec),
        macro_f1: mean(|m| m.f1),
        per_class,
        top1_accuracy: top1,
        fold_variance: 0.0,
        fold_accuracies: vec![top1],
        train_ms: 0.0,
        test_ms: 0.0,
    })
}

/// Pools fold confusions into one report and records the spread of
/// per-fold top-1 accuracy.
pub fn pool_reports(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("no reports to pool".into()))?;
    let mut confusion = first.confusion.clone();
    for r in &reports[1..] {
        confusion.merge(&r.confusion)?;
    }
    let mut pooled = metrics_from_confusion(&confusion)?;
    pooled.fold_accuracies = reports.iter().flat_map(|r| r.fold_accuracies.iter().copied()).collect();
    pooled.fold_variance = mean_and_sample_variance(&pooled.fold_accuracies).1;
    pooled.train_ms = reports.iter().map(|r| r.train_ms).sum();
    pooled.test_ms = reports.iter().map(|r| r.test_ms).sum();
    Ok(pooled)
}

/// Predicts every feature vector and scores against its label.
pub fn evaluate_model(model: &MulticlassSvmModel, features: &[FeatureVector]) -> Result<EvalReport> {
    let started = Instant::now();
    let x: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let truth: Vec<usize> = features.iter().map(|f| f.label).collect();
    let predicted = model.predict_all(&x)?;
    let mut classes = model.classes.clone();
    classes.extend(truth.iter().copied());
    classes.sort_unstable();
    classes.dedup();
    let cm = ConfusionMatrix::from_predictions(&truth, &predicted, Some(&classes))?;
    let mut report = metrics_from_confusion(&cm)?;
    report.test_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Index sets of one train/validation split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified `k`-fold partitions over `labels`, deterministic per seed.
pub fn kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Partition>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0;
    for (class, idx) in &mut by_class {
        if idx.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} samples, fewer than k={k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            Partition {
                name: format!("fold {}", f + 1),
                train,
                validation,
            }
        })
        .collect())
}

/// One partition per subject, in order of first appearance.
pub fn leave_subject_out(subjects: &[String]) -> Result<Vec<Partition>> {
    let mut order: Vec<&String> = Vec::new();
    for s in subjects {
        if !order.contains(&s) {
            order.push(s);
        }
    }
    if order.len() < 2 {
        return Err(Error::InvalidInput("leave-subject-out needs at least two subjects".into()));
    }
    Ok(order
        .into_iter()
        .map(|s| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..subjects.len()).partition(|&i| &subjects[i] == s);
            Partition {
                name: format!("subject {s}"),
                train,
                validation,
            }
        })
        .collect())
}

/// Seeded stratified split of `labels` into `(train, test)` index lists,
/// taking `round(test_fraction * n_c)` of each class (at least one when
/// the class has two or more samples) for the test side.
pub fn stratified_holdout(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let cut = if n < 2 { 0 } else { ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1) };
        test.extend_from_slice(&idx[..cut]);
        train.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptySplit("stratified holdout".into()));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    /// `None` picks the rate-dependent default.
    pub n_taps: Option<usize>,
    pub window: WindowKind,
    pub window_len: usize,
    pub u: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            f_low_hz: 3.0,
            f_high_hz: 100.0,
            n_taps: None,
            window: WindowKind::Hamming,
            window_len: 200,
            u: 95,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::Config("window_len must be positive".into()));
        }
        if self.u == 0 || self.u > self.window_len {
            return Err(Error::Config(format!(
                "feature dimension u={} must lie in 1..={}",
                self.u, self.window_len
            )));
        }
        Ok(())
    }
}

/// Segments plus per-record bookkeeping from [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub segments: Vec<Segment>,
    /// Segment count for each input record, in record order.
    pub per_record: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Preprocessed {
    /// Segment counts keyed by `(subject, label)`.
    pub fn counts(&self) -> BTreeMap<(String, usize), usize> {
        let mut m = BTreeMap::new();
        for s in &self.segments {
            *m.entry((s.subject_id.clone(), s.label)).or_insert(0) += 1;
        }
        m
    }
}

/// Band-pass filters every record and cuts it into windows. Records too
/// short for the filter or a single window contribute no segments and a
/// warning.
pub fn preprocess(dataset: &DatasetManifest, config: &PipelineConfig) -> Result<Preprocessed> {
    config.validate()?;
    let mut filters: Vec<(u64, signal::FirFilter)> = Vec::new();
    let mut segments = Vec::new();
    let mut per_record = Vec::with_capacity(dataset.records.len());
    let mut warnings = Vec::new();
    for (i, rec) in dataset.records.iter().enumerate() {
        let key = rec.sample_rate_hz.to_bits();
        let filter = match filters.iter().find(|(k, _)| *k == key) {
            Some((_, f)) => f,
            None => {
                let taps = config.n_taps.unwrap_or_else(|| signal::default_taps(rec.sample_rate_hz));
                let f = signal::design_bandpass(rec.sample_rate_hz, config.f_low_hz, config.f_high_hz, taps, config.window)
                    .map_err(|e| Error::Config(e.to_string()))?;
                filters.push((key, f));
                &filters.last().expect("just pushed").1
            }
        };
        let windows = if rec.samples.len() < filter.len() {
            Vec::new()
        } else {
            signal::segment_signal(&filter.apply(&rec.samples)?, config.window_len)
        };
        if windows.is_empty() {
            warnings.push(format!(
                "record {} (subject {}, class {}) has {} samples and yields zero segments of {}",
                i + 1,
                rec.subject_id,
                rec.label,
                rec.samples.len(),
                config.window_len
            ));
        }
        per_record.push(windows.len());
        segments.extend(windows.into_iter().map(|values| Segment {
            values,
            label: rec.label,
            subject_id: rec.subject_id.clone(),
            window_len: config.window_len,
        }));
    }
    Ok(Preprocessed {
        segments,
        per_record,
        warnings,
    })
}

/// Segment archive: header `label,subject_id,x1..xN`, one segment per row.
pub fn write_segments_csv(path: &Path, segments: &[Segment]) -> Result<()> {
    let n = segments.first().map_or(0, |s| s.values.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut header = vec!["label".to_string(), "subject_id".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for s in segments {
        if s.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.values.len(),
            });
        }
        let mut row = vec![s.label.to_string(), s.subject_id.clone()];
        row.extend(s.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_segments_csv(path: &Path) -> Result<Vec<Segment>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::malformed(path, line, "expected label, subject_id and at least one value"));
        }
        let label = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::malformed(path, line, format!("bad label {:?}", &rec[0])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::malformed(path, line, e.to_string()))?;
        out.push(Segment {
            window_len: values.len(),
            values,
            label,
            subject_id: rec[1].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Protocol {
    KFold { k: usize },
    LeaveSubjectOut,
}

impl Protocol {
    pub fn label(&self) -> String {
        match self {
            Protocol::KFold { k } => format!("{k}-fold"),
            Protocol::LeaveSubjectOut => "leave-subject-out".into(),
        }
    }

    pub fn partitions(&self, features: &[FeatureVector], seed: u64) -> Result<Vec<Partition>> {
        match self {
            Protocol::KFold { k } => kfold(&features.iter().map(|f| f.label).collect::<Vec<_>>(), *k, seed),
            Protocol::LeaveSubjectOut => {
                leave_subject_out(&features.iter().map(|f| f.subject_id.clone()).collect::<Vec<_>>())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub pipeline: PipelineConfig,
    /// Template for every grid row; `variant` and `regulation` are overridden.
    pub optimizer: OptimizerConfig,
    pub variants: Vec<Variant>,
    pub regulations: Vec<Regulation>,
    pub protocol: Protocol,
    pub repeats: usize,
    /// Share of each training portion held out to score fitness.
    pub inner_test_fraction: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            optimizer: OptimizerConfig {
                n_agents: 10,
                max_iter: 20,
                ..OptimizerConfig::default()
            },
            variants: vec![Variant::XGwo],
            regulations: vec![Regulation::Reciprocal],
            protocol: Protocol::KFold { k: 10 },
            repeats: 1,
            inner_test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// One table row: a variant with its effective regulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub variant: Variant,
    pub regulation: Option<Regulation>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.optimizer.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.inner_test_fraction > 0.0 && self.inner_test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "inner_test_fraction must be in (0, 1), got {}",
                self.inner_test_fraction
            )));
        }
        if let Protocol::KFold { k } = self.protocol {
            if k < 2 {
                return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
            }
        }
        if self.grid().is_empty() {
            return Err(Error::Config("the variant x regulation grid is empty".into()));
        }
        Ok(())
    }

    /// Rows in grid order. Variants without a configurable schedule appear
    /// once; `n_gwo` and `x_gwo` appear once per regulation.
    pub fn grid(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &variant in &self.variants {
            let regs: Vec<Option<Regulation>> = match variant {
                Variant::Pso => vec![None],
                Variant::Gwo => vec![Some(Regulation::Linear)],
                Variant::NGwo | Variant::XGwo => self.regulations.iter().copied().map(Some).collect(),
            };
            for regulation in regs {
                let cell = GridCell { variant, regulation };
                if !cells.contains(&cell) {
                    cells.push(cell);
                }
            }
        }
        cells
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of tuning and testing on one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub partition: String,
    pub params: KernelParams,
    pub best_fitness: f64,
    pub report: EvalReport,
}

/// Everything produced by [`run_fold`].
pub struct FoldOutcome {
    pub params: KernelParams,
    pub trace: RunTrace,
    /// Trained on the whole training side at `params`.
    pub model: MulticlassSvmModel,
    pub report: EvalReport,
}

/// Tunes on an inner split of `train`, retrains on all of `train` at the
/// optimum and scores `validation`.
pub fn run_fold(
    features: &[FeatureVector],
    partition: &Partition,
    optimizer: &OptimizerConfig,
    inner_test_fraction: f64,
    seed: u64,
) -> Result<FoldOutcome> {
    let started = Instant::now();
    let train_labels: Vec<usize> = partition.train.iter().map(|&i| features[i].label).collect();
    let (inner_train, inner_test) = stratified_holdout(&train_labels, inner_test_fraction, seed)?;
    let pick = |idx: &[usize]| -> (Vec<&[f64]>, Vec<usize>) {
        idx.iter()
            .map(|&j| {
                let f = &features[partition.train[j]];
                (f.values.as_slice(), f.label)
            })
            .unzip()
    };
    let (train_features, train_labels_in) = pick(&inner_train);
    let (test_features, test_labels) = pick(&inner_test);
    let fitness = SvmFitness {
        train_features,
        train_labels: train_labels_in,
        test_features,
        test_labels,
        smo: optimizer.smo,
    };
    let trace = optimizer::run(&OptimizerConfig { seed, ..optimizer.clone() }, &fitness)?;
    let params = SvmFitness::params_at(&trace.best_position)?;

    let (x, y): (Vec<&[f64]>, Vec<usize>) = partition
        .train
        .iter()
        .map(|&i| (features[i].values.as_slice(), features[i].label))
        .unzip();
    let model = svm::train_multiclass(&x, &y, params, &optimizer.smo)?;
    let train_ms = started.elapsed().as_secs_f64() * 1e3;
    let held: Vec<FeatureVector> = partition.validation.iter().map(|&i| features[i].clone()).collect();
    let mut report = evaluate_model(&model, &held)?;
    report.train_ms = train_ms;
    Ok(FoldOutcome {
        params,
        trace,
        model,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub variant: Variant,
    pub regulation: Option<Regulation>,
    pub protocol: String,
    pub runs: usize,
    /// Mean over runs of top-1 accuracy.
    pub mean_top1: f64,
    /// Sample variance over runs of top-1 accuracy.
    pub var_top1: f64,
    /// Mean over runs of macro one-vs-rest accuracy.
    pub mean_class_acc: f64,
    pub mean_f1: f64,
    pub mean_pre: f64,
    pub mean_rec: f64,
    /// Geometric means of the tuned parameters.
    pub c_geomean: f64,
    pub gamma_geomean: f64,
    pub mean_train_ms: f64,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub rows: Vec<ExperimentRow>,
}

fn fmt_reg(r: Option<Regulation>) -> &'static str {
    r.map_or("-", Regulation::name)
}

impl ExperimentTable {
    /// CSV with a `#` header carrying seed, config hash and version. Wall
    /// times are included only with `include_timing`.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# dataset={}", self.dataset);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# config_sha256={}", self.config_hash);
        let _ = writeln!(s, "# version=xgwo-svm {}", self.version);
        s.push_str("variant,regulation,protocol,runs,mean_acc,var_acc,mean_class_acc,mean_f1,mean_pre,mean_rec,c_opt,gamma_opt");
        if include_timing {
            s.push_str(",train_ms");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{:.6},{:.6e},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e}",
                r.variant,
                fmt_reg(r.regulation),
                r.protocol,
                r.runs,
                r.mean_top1,
                r.var_top1,
                r.mean_class_acc,
                r.mean_f1,
                r.mean_pre,
                r.mean_rec,
                r.c_geomean,
                r.gamma_geomean
            );
            if include_timing {
                let _ = write!(s, ",{:.1}", r.mean_train_ms);
            }
            s.push('\n');
        }
        s
    }

    /// Aligned plain-text rendering, always with timings.
    pub fn to_text(&self) -> String {
        let header = ["variant", "regulation", "protocol", "runs", "ACC", "var", "class ACC", "F1", "train s"];
        let rows: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.variant.to_string(),
                    fmt_reg(r.regulation).to_string(),
                    r.protocol.clone(),
                    r.runs.to_string(),
                    format!("{:.4}", r.mean_top1),
                    format!("{:.2e}", r.var_top1),
                    format!("{:.4}", r.mean_class_acc),
                    format!("{:.4}", r.mean_f1),
                    format!("{:.2}", r.mean_train_ms / 1e3),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        let line = |s: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(s, "{}", parts.join("  ").trim_end());
        };
        line(&mut s, &header);
        for r in &rows {
            line(&mut s, &r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        s
    }
}

/// Runs the grid from a raw dataset.
pub fn run_experiment(dataset: &DatasetManifest, config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let pre = preprocess(dataset, &config.pipeline)?;
    let features = features::extract_all(&pre.segments, config.pipeline.u)?;
    run_experiment_on_features(&dataset.name, &features, config)
}

/// Runs the grid on prepared feature vectors. Every row sees the same
/// partitions and optimizer seeds, so rows are paired comparisons.
pub fn run_experiment_on_features(
    name: &str,
    features: &[FeatureVector],
    config: &ExperimentConfig,
) -> Result<ExperimentTable> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::InvalidInput("no feature vectors to evaluate".into()));
    }
    let mut jobs: Vec<(usize, Partition, u64)> = Vec::new();
    for r in 0..config.repeats {
        let parts = config
            .protocol
            .partitions(features, mix_seed(config.seed, r as u64, 0))
            .map_err(|e| e.context(format!("repeat {}", r + 1)))?;
        for (f, p) in parts.into_iter().enumerate() {
            jobs.push((r, p, mix_seed(config.seed, r as u64, f as u64 + 1)));
        }
    }

    let mut rows = Vec::new();
    for cell in config.grid() {
        let opt = OptimizerConfig {
            variant: cell.variant,
            regulation: cell.regulation.unwrap_or(config.optimizer.regulation),
            ..config.optimizer.clone()
        };
        let row_name = format!("{} {}", cell.variant, fmt_reg(cell.regulation));
        let folds: Vec<FoldResult> = jobs
            .par_iter()
            .map(|(r, p, seed)| {
                run_fold(features, p, &opt, config.inner_test_fraction, *seed)
                    .map(|o| FoldResult {
                        repeat: *r,
                        partition: p.name.clone(),
                        params: o.params,
                        best_fitness: o.trace.best_fitness,
                        report: o.report,
                    })
                    .map_err(|e| e.context(format!("{row_name}, repeat {}, {}", r + 1, p.name)))
            })
            .collect::<Result<_>>()?;
        rows.push(summarize_row(cell, &config.protocol, folds));
    }
    Ok(ExperimentTable {
        dataset: name.to_string(),
        seed: config.seed,
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
    })
}

fn summarize_row(cell: GridCell, protocol: &Protocol, folds: Vec<FoldResult>) -> ExperimentRow {
    let n = folds.len() as f64;
    let top1: Vec<f64> = folds.iter().map(|f| f.report.top1_accuracy).collect();
    let (mean_top1, var_top1) = mean_and_sample_variance(&top1);
    let avg = |g: fn(&FoldResult) -> f64| folds.iter().map(g).sum::<f64>() / n;
    ExperimentRow {
        variant: cell.variant,
        regulation: cell.regulation,
        protocol: protocol.label(),
        runs: folds.len(),
        mean_top1,
        var_top1,
        mean_class_acc: avg(|f| f.report.macro_acc),
        mean_f1: avg(|f| f.report.macro_f1),
        mean_pre: avg(|f| f.report.macro_pre),
        mean_rec: avg(|f| f.report.macro_rec),
        c_geomean: 10f64.powf(avg(|f| f.params.c_penalty.log10())),
        gamma_geomean: 10f64.powf(avg(|f| f.params.gamma.log10())),
        mean_train_ms: avg(|f| f.report.train_ms),
        folds,
    }
}

/// Accuracy against feature dimension at fixed SVM parameters, scored by
/// stratified `k`-fold.
pub fn sweep_feature_dimension(
    segments: &[Segment],
    u_values: &[usize],
    params: KernelParams,
    smo: &SmoSettings,
    k: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    features::sweep_dimensions(segments, u_values, |_, fv| {
        let labels: Vec<usize> = fv.iter().map(|f| f.label).collect();
        kfold(&labels, k, seed)?
            .iter()
            .map(|p| {
                let (x, y): (Vec<&[f64]>, Vec<usize>) =
                    p.train.iter().map(|&i| (fv[i].values.as_slice(), fv[i].label)).unzip();
                let model = svm::train_multiclass(&x, &y, params, smo)?;
                let held: Vec<FeatureVector> = p.validation.iter().map(|&i| fv[i].clone()).collect();
                Ok(evaluate_model(&model, &held)?.top1_accuracy)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_dataset, SynthConfig};
    use proptest::prelude::*;

    #[test]
    fn binary_worked_example() {
        let cm = ConfusionMatrix {
            classes: vec![1, 2],
            counts: vec![vec![9, 1], vec![2, 8]],
        };
        let r = metrics_from_confusion(&cm).unwrap();
        let c1 = &r.per_class[0];
        assert!((c1.pre - 9.0 / 11.0).abs() < 1e-12);
        assert!((c1.rec - 0.9).abs() < 1e-12);
        let f1 = 2.0 * (9.0 / 11.0 * 0.9) / (9.0 / 11.0 + 0.9);
        assert!((c1.f1 - f1).abs() < 1e-12);
        assert!((c1.f1 - 0.8571).abs() < 1e-4);
        assert_eq!(r.top1_accuracy, 17.0 / 20.0);
        assert_eq!(c1.acc, 17.0 / 20.0);
    }

    #[test]
    fn perfect_and_degenerate() {
        let r = metrics_from_confusion(&ConfusionMatrix {
            classes: vec![1, 2, 3],
            counts: vec![vec![4, 0, 0], vec![0, 5, 0], vec![0, 0, 6]],
        })
        .unwrap();
        assert_eq!((r.top1_accuracy, r.macro_acc, r.macro_f1), (1.0, 1.0, 1.0));
        let r = metrics_from_confusion(&ConfusionMatrix {
            classes: vec![1, 2, 3],
            counts: vec![vec![4, 0, 0], vec![0, 5, 0], vec![0, 0, 0]],
        })
        .unwrap();
        assert_eq!((r.per_class[2].pre, r.per_class[2].rec, r.per_class[2].f1), (0.0, 0.0, 0.0));
        assert!(metrics_from_confusion(&ConfusionMatrix::new(vec![1, 2])).is_err());
    }

    #[test]
    fn confusion_errors() {
        assert!(ConfusionMatrix::from_predictions(&[1, 2], &[1], None).is_err());
        assert!(ConfusionMatrix::from_predictions(&[1, 5], &[1, 2], Some(&[1, 2])).is_err());
        let mut a = ConfusionMatrix::new(vec![1, 2]);
        assert!(a.merge(&ConfusionMatrix::new(vec![1, 3])).is_err());
    }

    #[test]
    fn kfold_sizes_and_stratification() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 70 { 1 } else { 2 }).collect();
        let folds = kfold(&labels, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            assert_eq!(f.validation.len(), 10);
            assert_eq!(f.validation.iter().filter(|&&i| labels[i] == 1).count(), 7);
        }
        assert_eq!(folds, kfold(&labels, 10, 3).unwrap());
        assert_ne!(folds, kfold(&labels, 10, 4).unwrap());
        assert!(kfold(&labels, 1, 0).is_err());
        assert!(kfold(&[1, 1, 2], 2, 0).is_err());
    }

    #[test]
    fn leave_subject_out_partitions() {
        let subjects: Vec<String> = (0..45).map(|i| format!("{}", i % 15 + 1)).collect();
        let parts = leave_subject_out(&subjects).unwrap();
        assert_eq!(parts.len(), 15);
        for p in &parts {
            let v: Vec<&String> = p.validation.iter().map(|&i| &subjects[i]).collect();
            assert!(v.iter().all(|s| *s == v[0]));
            assert!(p.train.iter().all(|&i| &subjects[i] != v[0]));
        }
        let five: Vec<String> = (1..=5).map(|i| i.to_string()).collect();
        assert_eq!(leave_subject_out(&five).unwrap().len(), 5);
        assert!(leave_subject_out(&["a".to_string(), "a".to_string()]).is_err());
    }

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2 + 1).collect();
        let (tr, te) = stratified_holdout(&labels, 0.2, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (40, 10));
        assert_eq!(te.iter().filter(|&&i| labels[i] == 1).count(), 5);
    }

    #[test]
    fn preprocess_counts_and_short_records() {
        let ds = synth_dataset(&SynthConfig {
            n_subjects: 2,
            n_classes: 2,
            seconds_per_class: 10.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = PipelineConfig::default();
        let pre = preprocess(&ds, &cfg).unwrap();
        // 1280 samples, 101 taps -> 1180 filtered -> 5 windows.
        assert_eq!(pre.per_record, vec![5; 4]);
        assert!(pre.warnings.is_empty());
        let mut short = ds.clone();
        short.records[0].samples.truncate(150);
        let pre = preprocess(&short, &cfg).unwrap();
        assert_eq!(pre.per_record[0], 0);
        assert_eq!(pre.warnings.len(), 1);
        let bad = PipelineConfig { f_low_hz: 60.0, ..cfg };
        assert!(matches!(preprocess(&ds, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn segment_archive_round_trips() {
        let segs = vec![
            Segment { values: vec![0.1, -2.5, 1e-12], label: 2, subject_id: "s7".into(), window_len: 3 },
            Segment { values: vec![3.0, 0.0, -0.3], label: 1, subject_id: "s8".into(), window_len: 3 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("segments.csv");
        write_segments_csv(&p, &segs).unwrap();
        assert_eq!(read_segments_csv(&p).unwrap(), segs);
    }

    #[test]
    fn grid_shapes() {
        let mut c = ExperimentConfig {
            variants: vec![Variant::XGwo],
            regulations: Regulation::ALL.to_vec(),
            ..ExperimentConfig::default()
        };
        assert_eq!(c.grid().len(), 5);
        c.variants = Variant::ALL.to_vec();
        c.regulations = vec![Regulation::Reciprocal];
        assert_eq!(c.grid().len(), 4);
        c.variants.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    fn permute(cm: &ConfusionMatrix, perm: &[usize]) -> ConfusionMatrix {
        let k = cm.classes.len();
        let mut counts = vec![vec![0; k]; k];
        for i in 0..k {
            for j in 0..k {
                counts[perm[i]][perm[j]] = cm.counts[i][j];
            }
        }
        ConfusionMatrix {
            classes: cm.classes.clone(),
            counts,
        }
    }

    proptest! {
        #[test]
        fn macro_metrics_ignore_class_order(
            counts in proptest::collection::vec(0u64..20, 16),
            seed in any::<u64>(),
        ) {
            let cm = ConfusionMatrix {
                classes: vec![1, 2, 3, 4],
                counts: counts.chunks(4).map(<[u64]>::to_vec).collect(),
            };
            prop_assume!(cm.total() > 0);
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = metrics_from_confusion(&cm).unwrap();
            let b = metrics_from_confusion(&permute(&cm, &perm)).unwrap();
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            prop_assert!((a.macro_acc - b.macro_acc).abs() < 1e-12);
            for m in &a.per_class {
                for v in [m.acc, m.pre, m.rec, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn kfold_partitions_exactly(
            labels in proptest::collection::vec(1usize..4, 30..120),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let mut counts = [0usize; 4];
            for &l in &labels { counts[l] += 1; }
            let folds = kfold(&labels, k, seed);
            if counts[1..].iter().any(|&c| c > 0 && c < k) {
                prop_assert!(folds.is_err());
            } else {
                let folds = folds.unwrap();
                let mut seen = vec![0; labels.len()];
                for f in &folds {
                    for &i in &f.validation { seen[i] += 1; }
                    prop_assert_eq!(f.train.len() + f.validation.len(), labels.len());
                }
                prop_assert!(seen.iter().all(|&c| c == 1));
            }
        }
    }
}
