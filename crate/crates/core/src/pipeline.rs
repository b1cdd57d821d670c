//! Dataset-level orchestration: generation plans, streaming per-recording
//! feature extraction, frame labeling and assembly of classifier inputs.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bench::{frame_features, PipelineVariant};
use crate::dataset::SplitIndex;
use crate::dsp::preprocess;
use crate::error::{Error, Result};
use crate::features::{FeatureRow, FeatureScaler, FeatureVector, N_FEATURES};
use crate::nn::Sequence;
use crate::radar::{synth_gesture_recording, GestureClass, GestureParams, RadarConfig, Recording};
use crate::raf::{gesture_frame_from_bins, label_recording, RafConfig};

/// Scene parameters and rng seed of one recording to synthesize.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingPlan {
    pub class: GestureClass,
    pub params: GestureParams,
    pub seed: u64,
}

/// `per_class` recordings of every class (Background included), interleaved
/// by class, with scenes and seeds drawn from one master rng.
pub fn dataset_plan(
    cfg: &RadarConfig,
    per_class: usize,
    seed: u64,
    noise_std: f64,
) -> Result<Vec<RecordingPlan>> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid noise level {noise_std}")));
    }
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::with_capacity(per_class * GestureClass::COUNT);
    for _ in 0..per_class {
        for class in GestureClass::ALL {
            let params = GestureParams::randomized(cfg, class, noise_std, &mut master);
            plan.push(RecordingPlan {
                class,
                params,
                seed: master.next_u64(),
            });
        }
    }
    Ok(plan)
}

pub fn synthesize(cfg: &RadarConfig, plan: &RecordingPlan) -> Result<Recording> {
    synth_gesture_recording(cfg, plan.class, &plan.params, plan.seed)
}

/// Output of one variant on one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedRecording {
    pub class: GestureClass,
    pub detections: Vec<Option<usize>>,
    pub features: Vec<FeatureVector>,
    pub gesture_frame: Option<usize>,
    pub frame_labels: Vec<GestureClass>,
    /// Gesture recording without any detection; labeled all Background.
    pub unlabeled: bool,
}

/// Gesture frame from the variant's own detections, then the class window.
pub fn assign_labels(
    class: GestureClass,
    detections: &[Option<usize>],
) -> Result<(Option<usize>, Vec<GestureClass>, bool)> {
    let n = detections.len();
    let background = vec![GestureClass::Background; n];
    if class == GestureClass::Background {
        return Ok((gesture_frame_from_bins(detections), background, false));
    }
    match gesture_frame_from_bins(detections) {
        Some(g) => Ok((Some(g), label_recording(n, g, class)?, false)),
        None => Ok((None, background, true)),
    }
}

/// Runs every variant over a recording, sharing the preprocessing.
pub fn process_recording(
    recording: &Recording,
    variants: &[PipelineVariant],
    raf: &RafConfig,
    radar: &RadarConfig,
) -> Result<Vec<ProcessedRecording>> {
    recording.check_dims(radar)?;
    let n = recording.n_frames();
    let mut detections = vec![Vec::with_capacity(n); variants.len()];
    let mut features = vec![Vec::with_capacity(n); variants.len()];
    for f in 0..n {
        let pre = preprocess(recording.frame_f64(f).view());
        for (i, &variant) in variants.iter().enumerate() {
            let (bin, feat) = frame_features(variant, &pre, raf, radar)?;
            detections[i].push(bin);
            features[i].push(feat);
        }
    }
    detections
        .into_iter()
        .zip(features)
        .map(|(detections, features)| {
            let (gesture_frame, frame_labels, unlabeled) =
                assign_labels(recording.label, &detections)?;
            Ok(ProcessedRecording {
                class: recording.label,
                detections,
                features,
                gesture_frame,
                frame_labels,
                unlabeled,
            })
        })
        .collect()
}

/// Pulls recordings from `source` in chunks, processes each chunk in
/// parallel and keeps only the processed output. Result is indexed
/// `[variant][recording]`.
pub fn process_stream<I>(
    source: I,
    variants: &[PipelineVariant],
    raf: &RafConfig,
    radar: &RadarConfig,
    chunk: usize,
) -> Result<Vec<Vec<ProcessedRecording>>>
where
    I: Iterator<Item = Result<Recording>>,
{
    let chunk = chunk.max(1);
    let mut out = vec![Vec::new(); variants.len()];
    let mut source = source.peekable();
    while source.peek().is_some() {
        let batch: Vec<Recording> = source.by_ref().take(chunk).collect::<Result<_>>()?;
        let processed: Vec<Vec<ProcessedRecording>> = batch
            .par_iter()
            .map(|rec| process_recording(rec, variants, raf, radar))
            .collect::<Result<_>>()?;
        for per_variant in processed {
            for (slot, p) in out.iter_mut().zip(per_variant) {
                slot.push(p);
            }
        }
    }
    Ok(out)
}

/// Synthesizes and processes a plan without keeping raw samples around.
pub fn synthesize_and_process(
    plan: &[RecordingPlan],
    variants: &[PipelineVariant],
    raf: &RafConfig,
    radar: &RadarConfig,
    chunk: usize,
) -> Result<Vec<Vec<ProcessedRecording>>> {
    let mut out = vec![Vec::with_capacity(plan.len()); variants.len()];
    for part in plan.chunks(chunk.max(1)) {
        let processed: Vec<Vec<ProcessedRecording>> = part
            .par_iter()
            .map(|p| process_recording(&synthesize(radar, p)?, variants, raf, radar))
            .collect::<Result<_>>()?;
        for per_variant in processed {
            for (slot, p) in out.iter_mut().zip(per_variant) {
                slot.push(p);
            }
        }
    }
    Ok(out)
}

pub fn to_feature_rows(processed: &[ProcessedRecording]) -> Vec<FeatureRow> {
    processed
        .iter()
        .enumerate()
        .flat_map(|(id, p)| {
            p.features
                .iter()
                .zip(&p.frame_labels)
                .enumerate()
                .map(move |(frame, (f, &label))| FeatureRow {
                    recording_id: id,
                    frame,
                    features: *f,
                    label,
                })
        })
        .collect()
}

/// Regroups CSV rows into per-recording feature and label sequences,
/// ordered by recording id and frame.
pub fn group_rows(rows: &[FeatureRow]) -> Result<Vec<(Vec<FeatureVector>, Vec<GestureClass>)>> {
    let n = rows.iter().map(|r| r.recording_id + 1).max().unwrap_or(0);
    let mut grouped: Vec<Vec<&FeatureRow>> = vec![Vec::new(); n];
    for r in rows {
        grouped[r.recording_id].push(r);
    }
    grouped
        .into_iter()
        .enumerate()
        .map(|(id, mut frames)| {
            frames.sort_by_key(|r| r.frame);
            if frames.is_empty() || frames.iter().enumerate().any(|(i, r)| r.frame != i) {
                return Err(Error::Format(format!("recording {id} has missing frames")));
            }
            Ok((
                frames.iter().map(|r| r.features).collect(),
                frames.iter().map(|r| r.label).collect(),
            ))
        })
        .collect()
}

/// Fits the scaler on every frame of the training recordings.
pub fn fit_scaler(features: &[Vec<FeatureVector>], train_ids: &[usize]) -> Result<FeatureScaler> {
    let rows: Vec<[f64; N_FEATURES]> = train_ids
        .iter()
        .map(|&i| {
            features
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("recording {i} not in features")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .map(|f| f.to_array())
        .collect();
    FeatureScaler::fit(&rows)
}

pub fn to_sequences(
    recordings: &[(Vec<FeatureVector>, Vec<GestureClass>)],
    classes: &[GestureClass],
    ids: &[usize],
    scaler: &FeatureScaler,
) -> Result<Vec<Sequence>> {
    ids.iter()
        .map(|&i| {
            let (feats, labels) = recordings
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("recording {i} not in features")))?;
            let class = *classes
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("recording {i} has no class")))?;
            let scaled: Vec<[f64; N_FEATURES]> =
                feats.iter().map(|f| scaler.transform(&f.to_array())).collect();
            Sequence::new(&scaled, labels, class)
        })
        .collect()
}

/// Scaled train/val/test sequences for one variant.
pub struct PreparedSplits {
    pub scaler: FeatureScaler,
    pub train: Vec<Sequence>,
    pub val: Vec<Sequence>,
    pub test: Vec<Sequence>,
}

pub fn prepare_splits(processed: &[ProcessedRecording], split: &SplitIndex) -> Result<PreparedSplits> {
    if processed.len() != split.labels.len() {
        return Err(Error::dims(split.labels.len(), processed.len()));
    }
    let recordings: Vec<(Vec<FeatureVector>, Vec<GestureClass>)> = processed
        .iter()
        .map(|p| (p.features.clone(), p.frame_labels.clone()))
        .collect();
    let features: Vec<Vec<FeatureVector>> = processed.iter().map(|p| p.features.clone()).collect();
    let scaler = fit_scaler(&features, &split.train)?;
    Ok(PreparedSplits {
        train: to_sequences(&recordings, &split.labels, &split.train, &scaler)?,
        val: to_sequences(&recordings, &split.labels, &split.val, &scaler)?,
        test: to_sequences(&recordings, &split.labels, &split.test, &scaler)?,
        scaler,
    })
}
