use std::fs;
use std::path::{Path, PathBuf};

use xgwo_svm::cli::{main_with_args, EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_OPTIMIZER};
use xgwo_svm::ingest::{self, synth_dataset, SignalFormat, SynthConfig};

fn xgwo(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("xgwo").chain(args.iter().copied()))
}

fn dataset(dir: &Path, synth: SynthConfig) -> PathBuf {
    let ds = synth_dataset(&synth).unwrap();
    ingest::write_dataset(&ds, dir.join("data"), SignalFormat::Csv).unwrap()
}

fn small() -> SynthConfig {
    SynthConfig {
        n_subjects: 2,
        n_classes: 3,
        seconds_per_class: 16.0,
        ..SynthConfig::default()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listed(out: &Path) -> Vec<String> {
    fs::read_to_string(out.join("artifacts.txt")).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn preprocess_featurize_tune_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), small());
    let before = fs::read(&m).unwrap();
    let pre = dir.path().join("pre");
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&m), "--out", s(&pre)]), EXIT_OK);
    assert_eq!(listed(&pre), ["segments.csv", "summary.csv"]);
    let summary = fs::read_to_string(pre.join("summary.csv")).unwrap();
    // 16 s at 128 Hz, 101 taps: (2048 - 100) / 200 = 9 windows per record.
    assert_eq!(summary.lines().skip(1).filter(|l| l.ends_with(",9")).count(), 6);

    let feat = dir.path().join("feat");
    assert_eq!(xgwo(&["featurize", "--segments", s(&pre.join("segments.csv")), "--u", "40", "--out", s(&feat)]), EXIT_OK);
    let fv = xgwo_svm::features::read_features_csv(&feat.join("features.csv")).unwrap();
    assert_eq!((fv.len(), fv[0].u()), (54, 40));

    let tune = dir.path().join("tune");
    let code = xgwo(&[
        "tune", "--features", s(&feat.join("features.csv")), "--variant", "pso", "--agents", "5", "--iterations", "4",
        "--out", s(&tune),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(listed(&tune), ["trace.jsonl", "model.json", "summary.json"]);
    let trace = fs::read_to_string(tune.join("trace.jsonl")).unwrap();
    assert!(trace.lines().next().unwrap().contains("\"variant\":\"pso\""));
    assert_eq!(trace.lines().count(), 6);

    let ev = dir.path().join("eval");
    let code = xgwo(&[
        "evaluate", "--model", s(&tune.join("model.json")), "--features", s(&feat.join("features.csv")), "--out", s(&ev),
    ]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(ev.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(report["confusion"]["counts"].as_array().unwrap().len(), 3);

    let rep = dir.path().join("rep");
    assert_eq!(xgwo(&["report", "--input", s(&tune.join("trace.jsonl")), "--out", s(&rep)]), EXIT_OK);
    assert_eq!(fs::read_to_string(rep.join("convergence.csv")).unwrap().lines().count(), 5);
    assert_eq!(fs::read(&m).unwrap(), before);
}

#[test]
fn benchmark_grids_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), small());
    let out = dir.path().join("b5");
    let code = xgwo(&[
        "benchmark", "--dataset", s(&m), "--variants", "x_gwo", "--regulations", "f_phi1,f_phi2,f_phi3,f_phi4,f_phi5",
        "--agents", "4", "--iterations", "2", "--k", "3", "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 6);
    assert!(!table.contains("train_ms"));

    let out4 = dir.path().join("b4");
    let code = xgwo(&[
        "benchmark", "--dataset", s(&m), "--agents", "4", "--iterations", "2", "--k", "3", "--timings", "--out", s(&out4),
    ]);
    assert_eq!(code, EXIT_OK);
    let table = fs::read_to_string(out4.join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    let names: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["pso", "gwo", "n_gwo", "x_gwo"]);
    assert!(table.contains("train_ms"));

    let rep = dir.path().join("rep");
    assert_eq!(xgwo(&["report", "--input", s(&out4.join("table.csv")), "--out", s(&rep)]), EXIT_OK);
    assert_eq!(fs::read_to_string(rep.join("report.txt")).unwrap().lines().count(), 5);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), small());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "dataset = \"data/manifest.csv\"\nout = \"from-file\"\nseed = 4\n[pipeline]\nu = 30\n[optimizer]\nn_agents = 4\nmax_iter = 3\n",
    )
    .unwrap();
    assert_eq!(xgwo(&["featurize", "--config", s(&cfg)]), EXIT_OK);
    let fv = xgwo_svm::features::read_features_csv(&dir.path().join("from-file/features.csv")).unwrap();
    assert_eq!(fv[0].u(), 30);
    let flag_out = dir.path().join("flag");
    assert_eq!(xgwo(&["featurize", "--config", s(&cfg), "--u", "12", "--out", s(&flag_out)]), EXIT_OK);
    assert_eq!(xgwo_svm::features::read_features_csv(&flag_out.join("features.csv")).unwrap()[0].u(), 12);
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), small());
    let out = dir.path().join("x");
    let o = s(&out);
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&m), "--f-low", "70", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&m), "--window-len", "0", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["preprocess", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&dir.path().join("none.csv")), "--out", o]), EXIT_DATA);
    assert_eq!(xgwo(&["tune", "--dataset", s(&m), "--agents", "2", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["benchmark", "--dataset", s(&m), "--variants", "", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["benchmark", "--dataset", s(&m), "--protocol", "bootstrap", "--out", o]), EXIT_CONFIG);
    assert_eq!(xgwo(&["report", "--input", s(&m), "--out", o]), EXIT_OK);
    assert_eq!(xgwo(&["report", "--input", s(&dir.path().join("data")), "--out", o]), EXIT_DATA);
    assert_eq!(xgwo(&["frobnicate"]), EXIT_CONFIG);

    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "[benchmark]\nvariants = []\n").unwrap();
    assert_eq!(xgwo(&["benchmark", "--config", s(&cfg), "--dataset", s(&m), "--out", o]), EXIT_CONFIG);

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "name,3,128\n1,7,data/x.csv\n").unwrap();
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&broken), "--out", o]), EXIT_DATA);
}

#[test]
fn optimizer_abort_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), small());
    let feat = dir.path().join("feat");
    assert_eq!(xgwo(&["featurize", "--dataset", s(&m), "--out", s(&feat)]), EXIT_OK);
    // One class only: every SVM fit fails, so no candidate ever gets a finite fitness.
    let path = feat.join("features.csv");
    let text = fs::read_to_string(&path).unwrap();
    let kept: String = text
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || l.starts_with("1,"))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(&path, kept).unwrap();
    let code = xgwo(&["tune", "--features", s(&path), "--agents", "4", "--iterations", "2", "--out", s(&dir.path().join("t"))]);
    assert_eq!(code, EXIT_OPTIMIZER);
}

#[test]
fn short_record_yields_warning_not_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = synth_dataset(&small()).unwrap();
    ds.records[0].samples.truncate(199);
    let m = ingest::write_dataset(&ds, dir.path().join("data"), SignalFormat::Csv).unwrap();
    let out = dir.path().join("pre");
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&m), "--taps", "1", "--out", s(&out)]), EXIT_CONFIG);
    assert_eq!(xgwo(&["preprocess", "--dataset", s(&m), "--taps", "3", "--out", s(&out)]), EXIT_OK);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().ends_with(",0"));
}

#[test]
fn threads_flag_keeps_outputs_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), small());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let code = xgwo(&[
            "tune", "--dataset", s(&m), "--agents", "5", "--iterations", "3", "--threads", threads, "--out", s(out),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    assert_eq!(fs::read(a.join("trace.jsonl")).unwrap(), fs::read(b.join("trace.jsonl")).unwrap());
    assert_eq!(xgwo(&["tune", "--dataset", s(&m), "--threads", "0", "--out", s(&a)]), EXIT_CONFIG);
}
