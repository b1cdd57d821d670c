//! Conventional FFT baselines, operation counts and the timing/accuracy
//! comparison table.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{doppler_fft, monopulse_angle, preprocess, range_fft, wrap_phase, PreprocessedFrame};
use crate::error::{Error, Result};
use crate::features::{features_at_bin, FeatureVector};
use crate::radar::{RadarConfig, Recording};
use crate::raf::{detect_target, select_closest, RafConfig};

/// Operation counts of the detection and Doppler stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCountReport {
    /// N_c * N_s * log2(N_s).
    pub fft_detection_ops: u64,
    /// N_RAF * (n_detect_chirps * N_s).
    pub raf_detection_ops: u64,
    /// N_c * log2(N_c).
    pub doppler_fft_ops: u64,
    /// N_c.
    pub goertzel_doppler_ops: u64,
    pub n_samples: usize,
    pub n_chirps: usize,
    pub n_neurons: usize,
    pub n_detect_chirps: usize,
}

fn log2_exact(n: usize) -> Result<u64> {
    if n.is_power_of_two() {
        Ok(n.trailing_zeros() as u64)
    } else {
        Err(Error::NotPowerOfTwo(n))
    }
}

pub fn op_counts(radar: &RadarConfig, raf: &RafConfig) -> Result<OpCountReport> {
    let (ns, nc) = (radar.n_samples as u64, radar.n_chirps as u64);
    Ok(OpCountReport {
        fft_detection_ops: nc * ns * log2_exact(radar.n_samples)?,
        raf_detection_ops: raf.n_neurons as u64 * raf.n_detect_chirps as u64 * ns,
        doppler_fft_ops: nc * log2_exact(radar.n_chirps)?,
        goertzel_doppler_ops: nc,
        n_samples: radar.n_samples,
        n_chirps: radar.n_chirps,
        n_neurons: raf.n_neurons,
        n_detect_chirps: raf.n_detect_chirps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineVariant {
    /// RAF detection, Goertzel features.
    RafGoertzel,
    /// Range-FFT threshold detection, Goertzel features.
    FftDetectGoertzel,
    /// Range-FFT threshold detection, Doppler-FFT features.
    FftDetectFftFeatures,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 3] = [
        PipelineVariant::RafGoertzel,
        PipelineVariant::FftDetectGoertzel,
        PipelineVariant::FftDetectFftFeatures,
    ];

    /// Short name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            PipelineVariant::RafGoertzel => "raf",
            PipelineVariant::FftDetectGoertzel => "fft-goertzel",
            PipelineVariant::FftDetectFftFeatures => "fft-fft",
        }
    }

    pub fn detect_ops(self, ops: &OpCountReport) -> u64 {
        match self {
            PipelineVariant::RafGoertzel => ops.raf_detection_ops,
            _ => ops.fft_detection_ops,
        }
    }

    pub fn feature_ops(self, ops: &OpCountReport) -> u64 {
        match self {
            PipelineVariant::FftDetectFftFeatures => ops.doppler_fft_ops,
            _ => ops.goertzel_doppler_ops,
        }
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}'")))
    }
}

/// Mean magnitude spectrum (bins 0..N/2) of the detection chirps.
pub fn detection_spectrum(frame: &PreprocessedFrame, raf: &RafConfig) -> Result<Vec<f64>> {
    if raf.antenna >= frame.n_antennas() || raf.n_detect_chirps > frame.n_chirps() {
        return Err(Error::dims(
            format!(">= {} chirps on antenna {}", raf.n_detect_chirps, raf.antenna),
            format!("{} chirps, {} antennas", frame.n_chirps(), frame.n_antennas()),
        ));
    }
    let mut mags = vec![0.0; frame.n_samples() / 2];
    for c in 0..raf.n_detect_chirps {
        for (m, v) in mags.iter_mut().zip(range_fft(frame.chirp(raf.antenna, c))?) {
            *m += v.norm() / raf.n_detect_chirps as f64;
        }
    }
    Ok(mags)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Threshold detector: bins below 3x the median non-DC magnitude are
/// discarded, then the closest-prominent-target rule picks the bin.
pub fn fft_detect(frame: &PreprocessedFrame, raf: &RafConfig) -> Result<Option<usize>> {
    let mut mags = detection_spectrum(frame, raf)?;
    let tau = 3.0 * median(&mags[1..]);
    for m in mags.iter_mut() {
        if *m < tau {
            *m = 0.0;
        }
    }
    Ok(select_closest(&mags, raf.candidate_fraction))
}

/// Doppler-FFT features at `bin`: signed peak Doppler index as a phase,
/// monopulse angles and the magnitude at that Doppler bin.
pub fn fft_features_at_bin(
    frame: &PreprocessedFrame,
    bin: Option<usize>,
    radar: &RadarConfig,
) -> Result<FeatureVector> {
    let Some(bin) = bin else {
        return Ok(FeatureVector::zero());
    };
    let (na, nc) = (frame.n_antennas(), frame.n_chirps());
    if na != 3 {
        return Err(Error::dims("3 antennas", na));
    }
    let mut spectra = Vec::with_capacity(na);
    for a in 0..na {
        let slow: Vec<Complex64> = (0..nc)
            .map(|c| range_fft(frame.chirp(a, c)).map(|s| s[bin]))
            .collect::<Result<_>>()?;
        spectra.push(doppler_fft(&slow)?);
    }
    let power: Vec<f64> = (0..nc)
        .map(|k| spectra.iter().map(|s| s[k].norm()).sum::<f64>() / na as f64)
        .collect();
    let mut peak = 0;
    for k in 1..nc {
        if power[k] > power[peak] {
            peak = k;
        }
    }
    let signed = if peak < nc / 2 { peak as f64 } else { peak as f64 - nc as f64 };
    let diff = |a: usize, b: usize| wrap_phase(spectra[a][peak].arg() - spectra[b][peak].arg());
    let d = radar.antenna_spacing_wavelengths;
    Ok(FeatureVector {
        range_bin: bin as f64,
        doppler_phase: wrap_phase(2.0 * std::f64::consts::PI * signed / nc as f64),
        azimuth: monopulse_angle(diff(2, 0), d),
        elevation: monopulse_angle(diff(2, 1), d),
        rms_amplitude: power[peak],
    })
}

/// Detected bin and features of one preprocessed frame under `variant`.
pub fn frame_features(
    variant: PipelineVariant,
    frame: &PreprocessedFrame,
    raf: &RafConfig,
    radar: &RadarConfig,
) -> Result<(Option<usize>, FeatureVector)> {
    match variant {
        PipelineVariant::RafGoertzel => {
            let bin = detect_target(frame, raf)?.bin;
            Ok((bin, features_at_bin(frame, bin, radar)?))
        }
        PipelineVariant::FftDetectGoertzel => {
            let bin = fft_detect(frame, raf)?;
            Ok((bin, features_at_bin(frame, bin, radar)?))
        }
        PipelineVariant::FftDetectFftFeatures => {
            let bin = fft_detect(frame, raf)?;
            Ok((bin, fft_features_at_bin(frame, bin, radar)?))
        }
    }
}

/// Per-frame features of a whole recording under an FFT-detecting variant.
pub fn baseline_fft_pipeline(
    recording: &Recording,
    variant: PipelineVariant,
    raf: &RafConfig,
    radar: &RadarConfig,
) -> Result<Vec<FeatureVector>> {
    if variant == PipelineVariant::RafGoertzel {
        return Err(Error::InvalidArgument(
            "the baseline pipeline needs an FFT detector".into(),
        ));
    }
    (0..recording.n_frames())
        .map(|f| {
            let pre = preprocess(recording.frame_f64(f).view());
            frame_features(variant, &pre, raf, radar).map(|(_, feat)| feat)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: PipelineVariant,
    pub detect_ops: u64,
    pub feature_ops: u64,
    pub median_us_per_frame: f64,
    pub accuracy: Option<f64>,
}

pub const BENCH_HEADER: [&str; 5] = [
    "variant",
    "detect_ops",
    "feature_ops",
    "median_us_per_frame",
    "accuracy",
];

/// Median over `repetitions` of the per-frame wall-clock (microseconds) for
/// preprocessing, detection and feature extraction of `frames`.
pub fn time_variant(
    variant: PipelineVariant,
    frames: &[Array3<f64>],
    raf: &RafConfig,
    radar: &RadarConfig,
    repetitions: usize,
) -> Result<f64> {
    if frames.is_empty() || repetitions == 0 {
        return Err(Error::InvalidArgument("nothing to time".into()));
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        for frame in frames {
            let pre = preprocess(frame.view());
            std::hint::black_box(frame_features(variant, &pre, raf, radar)?);
        }
        samples.push(start.elapsed().as_secs_f64() * 1e6 / frames.len() as f64);
    }
    Ok(median(&samples))
}

/// One table row per variant. `accuracies[i]` belongs to `variants[i]`.
pub fn run_benchmark(
    frames: &[Array3<f64>],
    variants: &[PipelineVariant],
    accuracies: &[Option<f64>],
    raf: &RafConfig,
    radar: &RadarConfig,
    repetitions: usize,
) -> Result<Vec<BenchRow>> {
    if accuracies.len() != variants.len() {
        return Err(Error::dims(variants.len(), accuracies.len()));
    }
    let ops = op_counts(radar, raf)?;
    variants
        .iter()
        .zip(accuracies)
        .map(|(&variant, &accuracy)| {
            Ok(BenchRow {
                variant,
                detect_ops: variant.detect_ops(&ops),
                feature_ops: variant.feature_ops(&ops),
                median_us_per_frame: time_variant(variant, frames, raf, radar, repetitions)?,
                accuracy,
            })
        })
        .collect()
}

pub fn write_benchmark_csv<W: Write>(writer: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.write_record([
            r.variant.name().to_string(),
            r.detect_ops.to_string(),
            r.feature_ops.to_string(),
            format!("{:.3}", r.median_us_per_frame),
            r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
