use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rafhgr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rafhgr"))
        .args(args)
        .env_remove("RAFR_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rafhgr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small dataset: 4 recordings per class, 40 frames.
fn small_dataset(dir: &Path, noise: &str) -> std::path::PathBuf {
    let data = dir.join("data.rafd");
    ok(&[
        "generate", "--out", p(&data), "--per-class", "4", "--seed", "7", "--noise", noise,
        "--frames", "40",
    ]);
    data
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_is_deterministic_and_split() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = small_dataset(a.path(), "0.05");
    let db = small_dataset(b.path(), "0.05");
    assert_eq!(fs::read(&da).unwrap(), fs::read(&db).unwrap());
    let split_a = fs::read(a.path().join("data.split.json")).unwrap();
    assert_eq!(split_a, fs::read(b.path().join("data.split.json")).unwrap());
    let split: serde_json::Value = serde_json::from_slice(&split_a).unwrap();
    let len = |k: &str| split[k].as_array().unwrap().len();
    assert_eq!((len("train"), len("val"), len("test"), len("labels")), (12, 6, 6, 24));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("data.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn empty_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = rafhgr(&["generate", "--out", p(&dir.path().join("x.rafd")), "--per-class", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty dataset"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(rafhgr(&["generate"]).status.code(), Some(2));
    assert_eq!(rafhgr(&["frobnicate"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_rafhgr"))
        .args(["inspect", "--dataset", "x", "--recording", "0", "--out", "y"])
        .env("RAFR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = rafhgr(&[
        "features", "--in", p(&dir.path().join("none.rafd")), "--out", p(&dir.path().join("f.csv")),
        "--scaler", p(&dir.path().join("s.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = small_dataset(d, "0.05");

    let feats = d.join("features.csv");
    let scaler = d.join("scaler.json");
    ok(&["features", "--in", p(&data), "--out", p(&feats), "--scaler", p(&scaler)]);
    let rows = csv_rows(&feats);
    assert_eq!(rows.len(), 24 * 40);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&scaler).unwrap()).unwrap();
    assert_eq!(s["mean"].as_array().unwrap().len(), 5);
    assert_eq!(s["std"].as_array().unwrap().len(), 5);

    let split = d.join("data.split.json");
    let models = d.join("models");
    let train_args = [
        "train", "--features", p(&feats), "--scaler", p(&scaler), "--split", p(&split), "--out",
        p(&models), "--seeds", "1", "--epochs", "3",
    ];
    ok(&train_args);
    let model_files: Vec<_> = fs::read_dir(&models)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.starts_with("model_seed").then_some(name)
        })
        .collect();
    assert_eq!(model_files, vec!["model_seed0.json".to_string()]);
    let log = fs::read_to_string(models.join("train_log_seed0.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,val_loss,val_acc\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(models.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train"]["lr"], 1.58e-3);
    assert_eq!(manifest["train"]["weight_decay"], 1.6e-5);
    assert_eq!(manifest["train"]["batch_size"], 32);
    assert_eq!(manifest["train"]["max_epochs"], 3);

    let first = fs::read(models.join("model_seed0.json")).unwrap();
    ok(&train_args);
    assert_eq!(first, fs::read(models.join("model_seed0.json")).unwrap());

    let report = ok(&["eval", "--models", p(&models), "--features", p(&feats), "--split", p(&split)]);
    assert!(report.contains("mean accuracy"), "{report}");
    assert!(models.join("confusion_seed0.csv").exists());

    let bench_out = ok(&["bench", "--dataset", p(&data), "--frames", "20", "--repetitions", "1"]);
    let lines: Vec<&str> = bench_out.lines().collect();
    assert_eq!(lines[0], "variant,detect_ops,feature_ops,median_us_per_frame,accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("raf,6144,32,"));
    assert!(lines[2].starts_with("fft-goertzel,12288,32,"));
    assert!(lines[3].starts_with("fft-fft,12288,160,"));
    let one = ok(&["bench", "--dataset", p(&data), "--variants", "raf", "--frames", "5", "--repetitions", "1"]);
    assert_eq!(one.lines().count(), 2);

    // accuracy column from per-variant model directories
    let root = d.join("bench_models");
    fs::create_dir_all(&root).unwrap();
    copy_dir(&models, &root.join("raf"));
    let with_acc = ok(&[
        "bench", "--dataset", p(&data), "--variants", "raf", "--models", p(&root), "--frames", "5",
        "--repetitions", "1",
    ]);
    let acc = with_acc.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert!(acc.parse::<f64>().is_ok(), "{with_acc}");
    let missing = rafhgr(&[
        "bench", "--dataset", p(&data), "--variants", "fft-fft", "--models", p(&root),
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

#[test]
fn detectors_agree_on_clean_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = small_dataset(d, "0.01");
    let raf = d.join("raf.csv");
    let fft = d.join("fft.csv");
    ok(&["features", "--in", p(&data), "--out", p(&raf), "--scaler", p(&d.join("s1.json"))]);
    ok(&[
        "features", "--in", p(&data), "--out", p(&fft), "--scaler", p(&d.join("s2.json")),
        "--detector", "fft",
    ]);
    let (a, b) = (csv_rows(&raf), csv_rows(&fft));
    let same = a.iter().zip(&b).filter(|(x, y)| x[2] == y[2]).count();
    assert!(same as f64 >= 0.9 * a.len() as f64, "{same} of {}", a.len());
}

#[test]
fn inspect_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = small_dataset(d, "0.01");
    // recording 0 is Background, recording 5 a Push
    for (i, quiet) in [(0, true), (5, false)] {
        let out = d.join(format!("inspect{i}"));
        ok(&["inspect", "--dataset", p(&data), "--recording", &i.to_string(), "--out", p(&out)]);
        let raster = csv_rows(&out.join("raster.csv"));
        assert_eq!(raster.len(), 40 * 32);
        let total: u64 = raster.iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
        assert_eq!(total == 0, quiet);
        assert_eq!(csv_rows(&out.join("features.csv")).len(), 40);
    }
    let out = rafhgr(&["inspect", "--dataset", p(&data), "--recording", "24", "--out", p(&d.join("x"))]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}
