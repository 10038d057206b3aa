//! `xgwo` command-line front end.
//!
//! Settings resolve as flags > `--config` TOML file > defaults. Every
//! command writes under `--out` and finishes by listing what it produced in
//! `artifacts.txt`. Exit codes: 0 ok, 2 configuration, 3 data, 4 optimizer.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, FeatureVector};
use crate::harness::{self, ExperimentConfig, Partition, PipelineConfig, Protocol};
use crate::ingest;
use crate::optimizer::{OptimizerConfig, Regulation, SearchBounds, Variant};
use crate::signal::WindowKind;
use crate::svm::{MulticlassSvmModel, SmoSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_OPTIMIZER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "xgwo", version, about = "Grey-wolf-tuned RBF-SVM classification of physiological signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter and segment a dataset; writes segments.csv and summary.csv.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Extract ranked DCT features; writes features.csv.
    Featurize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Tune (C, gamma) on a training split and score the held-out split.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opt: OptimizerArgs,
        /// Share of samples held out for the final score.
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Score a saved model on a feature set.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Cross-validated table over variants x regulation functions.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opt: OptimizerArgs,
        /// Comma-separated, e.g. `pso,gwo,n_gwo,x_gwo`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        variants: Option<Vec<Variant>>,
        /// Comma-separated, e.g. `f_phi1,f_phi4`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        regulations: Option<Vec<Regulation>>,
        /// `kfold` or `loso`.
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Render a trace (`.jsonl`) as convergence.csv or a table (`.csv`) as text.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock times in artifacts (breaks byte-reproducibility).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Segment archive from `preprocess`.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Feature file from `featurize`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub f_low: Option<f64>,
    #[arg(long)]
    pub f_high: Option<f64>,
    #[arg(long)]
    pub taps: Option<usize>,
    #[arg(long)]
    pub window: Option<WindowKind>,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub u: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizerArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub regulation: Option<Regulation>,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub variant: Variant,
    pub regulation: Regulation,
    pub n_agents: usize,
    pub max_iter: usize,
    pub log10_c: [f64; 2],
    pub log10_gamma: [f64; 2],
    pub smo_tol: f64,
    pub smo_max_passes: Option<usize>,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            variant: d.variant,
            regulation: d.regulation,
            n_agents: d.n_agents,
            max_iter: d.max_iter,
            log10_c: [d.bounds.lower[0], d.bounds.upper[0]],
            log10_gamma: [d.bounds.lower[1], d.bounds.upper[1]],
            smo_tol: d.smo.tol,
            smo_max_passes: d.smo.max_passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub variants: Vec<Variant>,
    pub regulations: Vec<Regulation>,
    /// `kfold` or `loso`.
    pub protocol: String,
    pub k: usize,
    pub repeats: usize,
    pub inner_test_fraction: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            regulations: vec![Regulation::Reciprocal],
            protocol: "kfold".into(),
            k: 10,
            repeats: 1,
            inner_test_fraction: 0.2,
        }
    }
}

/// Contents of a `--config` file; also the merged view after flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub timings: bool,
    pub test_fraction: f64,
    pub pipeline: PipelineConfig,
    pub optimizer: OptimizerSection,
    pub benchmark: BenchmarkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            segments: None,
            features: None,
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
            timings: false,
            test_fraction: 0.2,
            pipeline: PipelineConfig::default(),
            optimizer: OptimizerSection::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

fn parse_protocol(name: &str, k: usize) -> Result<Protocol> {
    match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "kfold" | "k-fold" | "cv" => Ok(Protocol::KFold { k }),
        "loso" | "leave-subject-out" | "leave-one-subject-out" => Ok(Protocol::LeaveSubjectOut),
        other => Err(Error::Config(format!("unknown protocol {other:?}; use kfold or loso"))),
    }
}

impl RunConfig {
    /// Reads a TOML file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.segments, &mut cfg.features].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out.is_relative() && text.lines().any(|l| l.trim_start().starts_with("out")) {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    fn apply_common(&mut self, a: &CommonArgs) {
        if let Some(s) = a.seed {
            self.seed = s;
        }
        if let Some(t) = a.threads {
            self.threads = Some(t);
        }
        if let Some(o) = &a.out {
            self.out.clone_from(o);
        }
        self.timings |= a.timings;
    }

    fn apply_data(&mut self, a: &DataArgs) {
        if a.dataset.is_some() || a.segments.is_some() || a.features.is_some() {
            self.dataset.clone_from(&a.dataset);
            self.segments.clone_from(&a.segments);
            self.features.clone_from(&a.features);
        }
        let p = &mut self.pipeline;
        if let Some(v) = a.f_low {
            p.f_low_hz = v;
        }
        if let Some(v) = a.f_high {
            p.f_high_hz = v;
        }
        if let Some(v) = a.taps {
            p.n_taps = Some(v);
        }
        if let Some(v) = a.window {
            p.window = v;
        }
        if let Some(v) = a.window_len {
            p.window_len = v;
        }
        if let Some(v) = a.u {
            p.u = v;
        }
    }

    fn apply_optimizer(&mut self, a: &OptimizerArgs) {
        let o = &mut self.optimizer;
        if let Some(v) = a.variant {
            o.variant = v;
        }
        if let Some(v) = a.regulation {
            o.regulation = v;
        }
        if let Some(v) = a.agents {
            o.n_agents = v;
        }
        if let Some(v) = a.iterations {
            o.max_iter = v;
        }
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let o = &self.optimizer;
        let cfg = OptimizerConfig {
            n_agents: o.n_agents,
            max_iter: o.max_iter,
            bounds: SearchBounds::log10((o.log10_c[0], o.log10_c[1]), (o.log10_gamma[0], o.log10_gamma[1]))?,
            regulation: o.regulation,
            variant: o.variant,
            seed: self.seed,
            smo: SmoSettings {
                tol: o.smo_tol,
                max_passes: o.smo_max_passes,
                seed: self.seed,
            },
        };
        if o.smo_tol.is_nan() || o.smo_tol <= 0.0 {
            return Err(Error::Config(format!("smo_tol must be positive, got {}", o.smo_tol)));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let b = &self.benchmark;
        let cfg = ExperimentConfig {
            pipeline: self.pipeline.clone(),
            optimizer: self.optimizer_config()?,
            variants: b.variants.clone(),
            regulations: b.regulations.clone(),
            protocol: parse_protocol(&b.protocol, b.k)?,
            repeats: b.repeats,
            inner_test_fraction: b.inner_test_fraction,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate_basic(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.threads == Some(0) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::FilterDesign(_) => EXIT_CONFIG,
        Error::OptimizerAbort(_) => EXIT_OPTIMIZER,
        _ => EXIT_DATA,
    }
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn finish(mut self) -> Result<Vec<PathBuf>> {
        let listing: String = self
            .files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| format!("{}\n", n.to_string_lossy()))
            .collect();
        self.write("artifacts.txt", listing)?;
        Ok(self.files)
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns the artifacts written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let common = match &cli.command {
        Command::Preprocess { common, .. }
        | Command::Featurize { common, .. }
        | Command::Tune { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Benchmark { common, .. }
        | Command::Report { common, .. } => common.clone(),
    };
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| match e {
            Error::MissingFile(p) => Error::Config(format!("config file {} not found", p.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    cfg.apply_common(&common);
    match &cli.command {
        Command::Preprocess { data, .. } | Command::Featurize { data, .. } | Command::Evaluate { data, .. } => {
            cfg.apply_data(data)
        }
        Command::Tune { data, opt, test_fraction, .. } => {
            cfg.apply_data(data);
            cfg.apply_optimizer(opt);
            if let Some(f) = test_fraction {
                cfg.test_fraction = *f;
            }
        }
        Command::Benchmark {
            data,
            opt,
            variants,
            regulations,
            protocol,
            k,
            repeats,
            ..
        } => {
            cfg.apply_data(data);
            cfg.apply_optimizer(opt);
            let b = &mut cfg.benchmark;
            if let Some(v) = variants {
                b.variants.clone_from(v);
            }
            if let Some(r) = regulations {
                b.regulations.clone_from(r);
            }
            if let Some(p) = protocol {
                b.protocol.clone_from(p);
            }
            if let Some(k) = k {
                b.k = *k;
            }
            if let Some(r) = repeats {
                b.repeats = *r;
            }
        }
        Command::Report { .. } => {}
    }
    cfg.validate_basic()?;
    with_threads(cfg.threads, || match &cli.command {
        Command::Preprocess { .. } => cmd_preprocess(&cfg),
        Command::Featurize { .. } => cmd_featurize(&cfg),
        Command::Tune { .. } => cmd_tune(&cfg),
        Command::Evaluate { model, .. } => cmd_evaluate(&cfg, model),
        Command::Benchmark { .. } => cmd_benchmark(&cfg),
        Command::Report { input, .. } => cmd_report(&cfg, input),
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<ingest::DatasetManifest> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --dataset".into()))?;
    ingest::load_dataset(path)
}

fn preprocess_dataset(cfg: &RunConfig) -> Result<(ingest::DatasetManifest, harness::Preprocessed)> {
    let ds = load_dataset(cfg)?;
    let pre = harness::preprocess(&ds, &cfg.pipeline)?;
    for w in &pre.warnings {
        eprintln!("warning: {w}");
    }
    Ok((ds, pre))
}

/// Features from whichever input was given: features, segments, or dataset.
fn load_features(cfg: &RunConfig) -> Result<(String, Vec<FeatureVector>)> {
    if let Some(p) = &cfg.features {
        return Ok((stem(p), features::read_features_csv(p)?));
    }
    if let Some(p) = &cfg.segments {
        let segs = harness::read_segments_csv(p)?;
        return Ok((stem(p), features::extract_all(&segs, cfg.pipeline.u)?));
    }
    let (ds, pre) = preprocess_dataset(cfg)?;
    Ok((ds.name, features::extract_all(&pre.segments, cfg.pipeline.u)?))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_preprocess(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (ds, pre) = preprocess_dataset(cfg)?;
    let mut out = Artifacts::new(&cfg.out)?;
    harness::write_segments_csv(&out.path("segments.csv"), &pre.segments)?;

    let mut summary = String::from("subject_id,label,class_name,duration_min,segments\n");
    let mut text = format!("{} ({} segments of {})\n", ds.name, pre.segments.len(), cfg.pipeline.window_len);
    for (rec, n) in ds.records.iter().zip(&pre.per_record) {
        let name = ds.class_names.get(rec.label - 1).map_or("", String::as_str);
        let minutes = rec.duration_s() / 60.0;
        summary.push_str(&format!("{},{},{},{:.2},{}\n", rec.subject_id, rec.label, name, minutes, n));
        text.push_str(&format!("  subject {:>4}  {:<12} {:>8.2} min ({n})\n", rec.subject_id, name, minutes));
    }
    out.write("summary.csv", summary)?;
    print!("{text}");
    out.finish()
}

fn cmd_featurize(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (name, fv) = load_features(cfg)?;
    let mut out = Artifacts::new(&cfg.out)?;
    features::write_features_csv(&out.path("features.csv"), &fv)?;
    println!("{name}: {} feature vectors of dimension {}", fv.len(), cfg.pipeline.u);
    out.finish()
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    dataset: &'a str,
    variant: Variant,
    regulation: Option<Regulation>,
    seed: u64,
    c_opt: f64,
    gamma_opt: f64,
    best_fitness: f64,
    n_train: usize,
    n_test: usize,
    test_accuracy: f64,
    test_macro_f1: f64,
    test_class_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_ms: Option<f64>,
}

fn cmd_tune(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let opt = cfg.optimizer_config()?;
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must be in (0, 1), got {}", cfg.test_fraction)));
    }
    let (name, fv) = load_features(cfg)?;
    let labels: Vec<usize> = fv.iter().map(|f| f.label).collect();
    let (train, validation) = harness::stratified_holdout(&labels, cfg.test_fraction, cfg.seed)?;
    let partition = Partition {
        name: "holdout".into(),
        train,
        validation,
    };
    let outcome = harness::run_fold(&fv, &partition, &opt, cfg.benchmark.inner_test_fraction, cfg.seed)?;

    let mut out = Artifacts::new(&cfg.out)?;
    let trace_path = out.path("trace.jsonl");
    let file = fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    outcome.trace.write_jsonl(std::io::BufWriter::new(file), cfg.timings)?;
    outcome.model.save(&out.path("model.json"))?;
    let summary = TuneSummary {
        dataset: &name,
        variant: opt.variant,
        regulation: opt.effective_regulation(),
        seed: cfg.seed,
        c_opt: outcome.params.c_penalty,
        gamma_opt: outcome.params.gamma,
        best_fitness: outcome.trace.best_fitness,
        n_train: partition.train.len(),
        n_test: partition.validation.len(),
        test_accuracy: outcome.report.top1_accuracy,
        test_macro_f1: outcome.report.macro_f1,
        test_class_accuracy: outcome.report.macro_acc,
        train_ms: cfg.timings.then_some(outcome.report.train_ms),
    };
    out.write("summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{} {}: C = {:.4e}, gamma = {:.4e}, test accuracy {:.4}, macro F1 {:.4}",
        opt.variant,
        opt.effective_regulation().map_or("-", Regulation::name),
        summary.c_opt,
        summary.gamma_opt,
        summary.test_accuracy,
        summary.test_macro_f1
    );
    out.finish()
}

fn cmd_evaluate(cfg: &RunConfig, model_path: &Path) -> Result<Vec<PathBuf>> {
    let model = MulticlassSvmModel::load(model_path)?;
    let (_, fv) = load_features(cfg)?;
    let mut report = harness::evaluate_model(&model, &fv)?;
    if !cfg.timings {
        report.test_ms = 0.0;
    }
    let mut out = Artifacts::new(&cfg.out)?;
    out.write("evaluation.json", serde_json::to_string_pretty(&report)? + "\n")?;
    let mut cm = String::from("true\\predicted");
    for c in &report.confusion.classes {
        cm.push_str(&format!(",{c}"));
    }
    cm.push('\n');
    for (c, row) in report.confusion.classes.iter().zip(&report.confusion.counts) {
        cm.push_str(&c.to_string());
        for v in row {
            cm.push_str(&format!(",{v}"));
        }
        cm.push('\n');
    }
    out.write("confusion.csv", cm)?;
    println!("accuracy {:.4}, macro F1 {:.4}", report.top1_accuracy, report.macro_f1);
    for m in &report.per_class {
        println!(
            "  class {}: ACC {:.4}  PRE {:.4}  REC {:.4}  F1 {:.4}",
            m.class, m.acc, m.pre, m.rec, m.f1
        );
    }
    out.finish()
}

fn cmd_benchmark(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let exp = cfg.experiment_config()?;
    let (name, fv) = load_features(cfg)?;
    let table = harness::run_experiment_on_features(&name, &fv, &exp)?;
    let mut out = Artifacts::new(&cfg.out)?;
    out.write("table.csv", table.to_csv(cfg.timings))?;
    let text = table.to_text();
    if cfg.timings {
        out.write("table.txt", &text)?;
    }
    print!("{text}");
    out.finish()
}

fn cmd_report(cfg: &RunConfig, input: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut out = Artifacts::new(&cfg.out)?;
    match input.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => {
            let mut csv = String::from("t,phi,best_fitness,log10_c,log10_gamma\n");
            let mut summary = None;
            for (i, line) in text.lines().enumerate() {
                let v: serde_json::Value = serde_json::from_str(line)
                    .map_err(|e| Error::malformed(input, i + 1, e.to_string()))?;
                match v["record"].as_str() {
                    Some("iteration") => {
                        let num = |k: &str| v[k].as_f64().map_or(String::new(), |x| x.to_string());
                        csv.push_str(&format!(
                            "{},{},{},{},{}\n",
                            v["t"],
                            num("phi"),
                            num("best_fitness"),
                            v["xi1"][0],
                            v["xi1"][1]
                        ));
                    }
                    Some("summary") => summary = Some(v),
                    _ => {}
                }
            }
            out.write("convergence.csv", csv)?;
            if let Some(s) = summary {
                println!(
                    "best fitness {} at C = {}, gamma = {}",
                    s["best_fitness"], s["c_opt"], s["gamma_opt"]
                );
            }
        }
        Some("csv") => {
            let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
            let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
            let rows: Vec<Vec<String>> = rd
                .records()
                .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
                .collect::<std::result::Result<_, _>>()?;
            let mut width: Vec<usize> = header.iter().map(String::len).collect();
            for r in &rows {
                for (w, c) in width.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let fmt_row = |r: &[String]| {
                r.iter()
                    .zip(&width)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let mut rendered = fmt_row(&header) + "\n";
            for r in &rows {
                rendered.push_str(&fmt_row(r));
                rendered.push('\n');
            }
            out.write("report.txt", &rendered)?;
            print!("{rendered}");
        }
        _ => {
            return Err(Error::Config(format!(
                "report input must be a trace (.jsonl) or table (.csv), got {}",
                input.display()
            )))
        }
    }
    out.finish()
}

/// Entry point for the `xgwo` binary.
pub fn main_from_env() -> i32 {
    main_with_args(std::env::args_os())
}
