use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rafhgr_core::bench::{run_benchmark, write_benchmark_csv};
use rafhgr_core::dataset::{DatasetReader, DatasetWriter, SplitIndex};
use rafhgr_core::dsp::preprocess;
use rafhgr_core::features::{features_at_bin, read_features_csv, write_features_csv};
use rafhgr_core::nn::{evaluate, train as train_model, write_confusion_csv, Sequence};
use rafhgr_core::pipeline::{
    dataset_plan, fit_scaler, group_rows, process_stream, synthesize,
    to_feature_rows, to_sequences,
};
use rafhgr_core::raf::{detect_target, gesture_frame_from_bins};
use rafhgr_core::{
    Error, FeatureScaler, GestureClass, GruModel, RadarConfig, RafConfig, Recording, Result,
    TrainConfig,
};
use rayon::prelude::*;
use serde_json::json;

use crate::manifest::{sibling, RunManifest};
use crate::{BenchArgs, EvalArgs, FeaturesArgs, GenerateArgs, InspectArgs, TrainArgs};

const CHUNK: usize = 16;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn radar_for(recording: &Recording) -> RadarConfig {
    RadarConfig {
        n_frames: recording.n_frames(),
        ..RadarConfig::default()
    }
}

/// Opens a dataset and returns the radar configuration matching its first
/// recording together with an iterator over all recordings.
fn open_dataset(
    path: &Path,
) -> Result<(usize, RadarConfig, impl Iterator<Item = Result<Recording>>)> {
    let mut reader = DatasetReader::open(path)?;
    let count = reader.len();
    let first = reader
        .next_recording()?
        .ok_or_else(|| Error::Format(format!("{} holds no recordings", path.display())))?;
    let radar = radar_for(&first);
    Ok((count, radar, std::iter::once(Ok(first)).chain(reader)))
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let radar = RadarConfig {
        n_frames: args.frames,
        ..RadarConfig::default()
    };
    let plan = dataset_plan(&radar, args.per_class, args.seed, args.noise)?;
    let mut writer = DatasetWriter::new(create(&args.out)?, plan.len())?;
    for part in plan.chunks(CHUNK) {
        let recordings: Vec<Recording> = part
            .par_iter()
            .map(|p| synthesize(&radar, p))
            .collect::<Result<_>>()?;
        for rec in &recordings {
            writer.write(rec)?;
        }
    }
    writer.finish()?.flush()?;

    let labels: Vec<GestureClass> = plan.iter().map(|p| p.class).collect();
    let split = SplitIndex::stratified(&labels, args.seed);
    let split_path = args.split.clone().unwrap_or_else(|| sibling(&args.out, "split.json"));
    split.save(&split_path)?;

    let mut manifest = RunManifest::new("generate", radar, RafConfig::default());
    manifest.seeds = vec![args.seed];
    manifest.options = json!({
        "per_class": args.per_class,
        "noise": args.noise,
        "frames": args.frames,
    });
    manifest.output(&args.out)?;
    manifest.output(&split_path)?;
    manifest.save(&sibling(&args.out, "manifest.json"))?;
    println!(
        "wrote {} recordings to {} (train/val/test {}/{}/{})",
        plan.len(),
        args.out.display(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

pub fn features(args: &FeaturesArgs) -> Result<()> {
    let split_path = args.split.clone().unwrap_or_else(|| sibling(&args.input, "split.json"));
    let split = SplitIndex::load(&split_path)?;
    let (count, radar, recordings) = open_dataset(&args.input)?;
    if count != split.labels.len() {
        return Err(Error::Format(format!(
            "dataset has {count} recordings, split index lists {}",
            split.labels.len()
        )));
    }
    let raf = RafConfig::default();
    let variant = args.detector.variant();
    let processed = process_stream(recordings, &[variant], &raf, &radar, CHUNK)?
        .pop()
        .expect("one variant requested");
    if let Some(i) = (0..count).find(|&i| processed[i].class != split.labels[i]) {
        return Err(Error::Format(format!("recording {i} does not match the split labels")));
    }

    let mut out = create(&args.out)?;
    write_features_csv(&mut out, &to_feature_rows(&processed))?;
    out.flush()?;
    let features: Vec<_> = processed.iter().map(|p| p.features.clone()).collect();
    let scaler = fit_scaler(&features, &split.train)?;
    scaler.save(&args.scaler)?;

    let unlabeled = processed.iter().filter(|p| p.unlabeled).count();
    if unlabeled > 0 {
        eprintln!(
            "warning: {unlabeled} gesture recordings had no detection and were labeled Background"
        );
    }
    let mut manifest = RunManifest::new("features", radar, raf);
    manifest.options = json!({ "detector": variant.name(), "unlabeled_recordings": unlabeled });
    manifest.input(&args.input)?;
    manifest.input(&split_path)?;
    manifest.output(&args.out)?;
    manifest.output(&args.scaler)?;
    manifest.save(&sibling(&args.out, "manifest.json"))?;
    println!(
        "wrote {} feature rows ({} detector) to {}",
        processed.iter().map(|p| p.features.len()).sum::<usize>(),
        variant,
        args.out.display()
    );
    Ok(())
}

struct LoadedSplits {
    split: SplitIndex,
    recordings: Vec<(Vec<rafhgr_core::FeatureVector>, Vec<GestureClass>)>,
}

fn load_features(features: &Path, split: &Path) -> Result<LoadedSplits> {
    let split = SplitIndex::load(split)?;
    let rows = read_features_csv(File::open(features)?)?;
    let recordings = group_rows(&rows)?;
    if recordings.len() != split.labels.len() {
        return Err(Error::Format(format!(
            "features cover {} recordings, split index lists {}",
            recordings.len(),
            split.labels.len()
        )));
    }
    Ok(LoadedSplits { split, recordings })
}

impl LoadedSplits {
    fn sequences(&self, ids: &[usize], scaler: &FeatureScaler) -> Result<Vec<Sequence>> {
        to_sequences(&self.recordings, &self.split.labels, ids, scaler)
    }
}

fn model_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("model_seed{seed}.json"))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        lr: args.lr,
        weight_decay: args.weight_decay,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        n_seeds: args.seeds,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let data = load_features(&args.features, &args.split)?;
    let scaler = FeatureScaler::load(&args.scaler)?;
    let train_set = data.sequences(&data.split.train, &scaler)?;
    let val_set = data.sequences(&data.split.val, &scaler)?;
    let seeds: Vec<u64> = (0..args.seeds as u64).collect();
    let results = seeds
        .par_iter()
        .map(|&seed| train_model(&train_set, &val_set, &cfg, seed))
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new("train", RadarConfig::default(), RafConfig::default());
    manifest.train = Some(cfg);
    manifest.seeds = seeds.clone();
    manifest.input(&args.features)?;
    manifest.input(&args.scaler)?;
    manifest.input(&args.split)?;
    let scaler_copy = args.out.join("scaler.json");
    scaler.save(&scaler_copy)?;
    manifest.output(&scaler_copy)?;
    for (&seed, (model, history)) in seeds.iter().zip(&results) {
        let path = model_path(&args.out, seed);
        model.save(&path)?;
        let log = args.out.join(format!("train_log_seed{seed}.csv"));
        history.write_csv(create(&log)?)?;
        manifest.output(&path)?;
        manifest.output(&log)?;
        let best = &history.epochs[history.best_epoch - 1];
        println!(
            "seed {seed}: best epoch {} of {}, val loss {:.4}, val accuracy {:.2}%",
            history.best_epoch,
            history.epochs.len(),
            best.val_loss,
            100.0 * best.val_acc
        );
    }
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(())
}

/// Models `model_seed<k>.json` in `dir`, ordered by seed.
fn load_models(dir: &Path) -> Result<Vec<(u64, GruModel)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let seed = name
            .strip_prefix("model_seed")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(seed) = seed {
            found.push(seed);
        }
    }
    if found.is_empty() {
        return Err(Error::Format(format!("no model files in {}", dir.display())));
    }
    found.sort_unstable();
    found
        .into_iter()
        .map(|seed| Ok((seed, GruModel::load(&model_path(dir, seed))?)))
        .collect()
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let models = load_models(&args.models)?;
    let scaler_path = args.scaler.clone().unwrap_or_else(|| args.models.join("scaler.json"));
    let scaler = FeatureScaler::load(&scaler_path)?;
    let data = load_features(&args.features, &args.split)?;
    let test = data.sequences(&data.split.test, &scaler)?;
    let only_models: Vec<GruModel> = models.iter().map(|(_, m)| m.clone()).collect();
    let report = evaluate(&only_models, &test)?;

    let out = args.out.clone().unwrap_or_else(|| args.models.clone());
    fs::create_dir_all(&out)?;
    for ((seed, _), (acc, matrix)) in models.iter().zip(report.accuracies.iter().zip(&report.confusion)) {
        println!("seed {seed}: gesture accuracy {:.2}%", 100.0 * acc);
        write_confusion_csv(create(&out.join(format!("confusion_seed{seed}.csv")))?, matrix)?;
    }
    fs::write(out.join("eval_report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    println!(
        "mean accuracy {:.2}% ± {:.2}% over {} models",
        100.0 * report.mean,
        100.0 * report.std,
        models.len()
    );
    Ok(())
}

/// The first `n` frames of the dataset, in file order.
fn timing_frames(path: &Path, n: usize) -> Result<Vec<Array3<f64>>> {
    let (_, _, recordings) = open_dataset(path)?;
    let mut frames = Vec::with_capacity(n);
    for rec in recordings {
        let rec = rec?;
        frames.extend((0..rec.n_frames()).take(n - frames.len()).map(|f| rec.frame_f64(f)));
        if frames.len() == n {
            break;
        }
    }
    Ok(frames)
}

/// Mean test accuracy of the models stored under `root/<variant>` for every
/// requested variant.
fn variant_accuracies(args: &BenchArgs, root: &Path, raf: &RafConfig) -> Result<Vec<Option<f64>>> {
    let split_path = args.split.clone().unwrap_or_else(|| sibling(&args.dataset, "split.json"));
    let split = SplitIndex::load(&split_path)?;
    let mut loaded = Vec::new();
    for v in &args.variants {
        let dir = root.join(v.name());
        let models: Vec<GruModel> = load_models(&dir)?.into_iter().map(|(_, m)| m).collect();
        loaded.push((models, FeatureScaler::load(&dir.join("scaler.json"))?));
    }
    let (_, radar, recordings) = open_dataset(&args.dataset)?;
    let processed = process_stream(recordings, &args.variants, raf, &radar, CHUNK)?;
    loaded
        .iter()
        .zip(&processed)
        .map(|((models, scaler), per_variant)| {
            let grouped: Vec<_> = per_variant
                .iter()
                .map(|p| (p.features.clone(), p.frame_labels.clone()))
                .collect();
            let test = to_sequences(&grouped, &split.labels, &split.test, scaler)?;
            Ok(Some(evaluate(models, &test)?.mean))
        })
        .collect()
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    if args.variants.is_empty() || args.frames == 0 {
        return Err(Error::InvalidArgument("nothing to benchmark".into()));
    }
    let raf = RafConfig::default();
    let accuracies = match &args.models {
        Some(root) => variant_accuracies(args, root, &raf)?,
        None => vec![None; args.variants.len()],
    };
    let (_, radar, _) = open_dataset(&args.dataset)?;
    let frames = timing_frames(&args.dataset, args.frames)?;
    let rows = run_benchmark(&frames, &args.variants, &accuracies, &raf, &radar, args.repetitions)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_benchmark_csv(&mut w, &rows)?;
            w.flush()?;
        }
        None => write_benchmark_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let mut reader = DatasetReader::open(&args.dataset)?;
    if args.recording >= reader.len() {
        return Err(Error::InvalidArgument(format!(
            "recording {} out of range (dataset has {})",
            args.recording,
            reader.len()
        )));
    }
    let mut recording = None;
    for _ in 0..=args.recording {
        recording = reader.next_recording()?;
    }
    let recording = recording.ok_or_else(|| Error::Format("dataset ended early".into()))?;
    let radar = radar_for(&recording);
    let raf = RafConfig::default();

    fs::create_dir_all(&args.out)?;
    let mut raster = create(&args.out.join("raster.csv"))?;
    let mut feats = create(&args.out.join("features.csv"))?;
    writeln!(raster, "frame,neuron,spike_count,first_spike_step")?;
    writeln!(feats, "frame,range_bin,doppler_phase,azimuth,elevation,rms_amplitude")?;
    let mut bins = Vec::with_capacity(recording.n_frames());
    for f in 0..recording.n_frames() {
        let pre = preprocess(recording.frame_f64(f).view());
        let det = detect_target(&pre, &raf)?;
        for (k, (count, first)) in det.spike_counts.iter().zip(&det.first_spike_steps).enumerate() {
            let first = first.map(|s| s.to_string()).unwrap_or_default();
            writeln!(raster, "{f},{k},{count},{first}")?;
        }
        let v = features_at_bin(&pre, det.bin, &radar)?;
        writeln!(
            feats,
            "{f},{},{},{},{},{}",
            v.range_bin, v.doppler_phase, v.azimuth, v.elevation, v.rms_amplitude
        )?;
        bins.push(det.bin);
    }
    raster.flush()?;
    feats.flush()?;
    let gesture_frame = gesture_frame_from_bins(&bins);
    println!(
        "recording {} ({}): gesture frame {}",
        args.recording,
        recording.label,
        gesture_frame.map(|g| g.to_string()).unwrap_or_else(|| "none".into())
    );
    Ok(())
}
