//! Resonate-and-fire (RAF) target detection.
//!
//! A bank of damped complex oscillators, one per positive range bin, is
//! driven sample by sample with the time-domain IF signal of a few chirps.
//! Neuron `k` rotates by `2 pi k / N_s` per sample, so it accumulates energy
//! only when the input contains the beat frequency of range bin `k` and
//! fires when the imaginary part of its state crosses the threshold upward.
//! The hand is the strongly spiking neuron closest to the radar.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::{preprocess, PreprocessedFrame};
use crate::error::{Error, Result};
use crate::radar::{GestureClass, Recording};

/// Parameters of the RAF detection layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafConfig {
    pub n_neurons: usize,
    /// Decay rate per sample.
    pub alpha: f64,
    /// Spike threshold on the imaginary state component.
    pub v_th: f64,
    /// Chirps concatenated into the detection stream.
    pub n_detect_chirps: usize,
    pub samples_per_chirp: usize,
    /// Scale applied to the re-centered stream before it enters the neurons.
    pub input_gain: f64,
    /// Neurons with at least this share of the maximum spike count compete
    /// for the closest-target rule.
    pub candidate_fraction: f64,
    /// Antenna whose chirps drive the neurons.
    pub antenna: usize,
}

impl Default for RafConfig {
    fn default() -> Self {
        Self {
            n_neurons: 32,
            alpha: 0.018,
            v_th: 0.02,
            n_detect_chirps: 3,
            samples_per_chirp: 64,
            input_gain: 0.0065,
            candidate_fraction: 0.5,
            antenna: 0,
        }
    }
}

impl RafConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return bad("v_th must be positive");
        }
        if self.n_detect_chirps == 0 || self.samples_per_chirp == 0 {
            return bad("detection stream must be non-empty");
        }
        if self.n_neurons * 2 != self.samples_per_chirp {
            return bad("n_neurons must equal samples_per_chirp / 2");
        }
        if !(self.input_gain > 0.0 && self.input_gain.is_finite()) {
            return bad("input_gain must be positive");
        }
        if !(0.0..=1.0).contains(&self.candidate_fraction) {
            return bad("candidate_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Samples fed through each neuron per frame.
    pub fn stream_len(&self) -> usize {
        self.n_detect_chirps * self.samples_per_chirp
    }
}

/// State of one RAF neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RafNeuronState {
    pub re: f64,
    pub im: f64,
    /// Resonance, radians per sample.
    pub phase_increment: f64,
    pub spike_count: u32,
    pub first_spike_step: Option<usize>,
    pub steps: usize,
    cos: f64,
    sin: f64,
}

impl RafNeuronState {
    /// Resting neuron tuned to DFT bin `bin` of an `n_samples`-point chirp.
    pub fn for_bin(bin: usize, n_samples: usize) -> Self {
        Self::with_phase_increment(2.0 * PI * bin as f64 / n_samples as f64)
    }

    pub fn with_phase_increment(phase_increment: f64) -> Self {
        Self {
            re: 0.0,
            im: 0.0,
            phase_increment,
            spike_count: 0,
            first_spike_step: None,
            steps: 0,
            cos: phase_increment.cos(),
            sin: phase_increment.sin(),
        }
    }

    pub fn with_state(mut self, re: f64, im: f64) -> Self {
        self.re = re;
        self.im = im;
        self
    }

    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Advances one sample: rotate, decay, inject `input` into the real part.
    /// Returns whether the neuron fired.
    pub fn step(&mut self, input: f64, alpha: f64, v_th: f64) -> bool {
        let keep = 1.0 - alpha;
        let re = keep * (self.cos * self.re - self.sin * self.im) + input;
        let im = keep * (self.sin * self.re + self.cos * self.im);
        let spiked = im >= v_th && self.im < v_th;
        self.re = re;
        self.im = im;
        if spiked {
            self.spike_count += 1;
            self.first_spike_step.get_or_insert(self.steps);
        }
        self.steps += 1;
        spiked
    }
}

/// Functional form of [`RafNeuronState::step`].
pub fn raf_step(
    state: RafNeuronState,
    input: f64,
    alpha: f64,
    v_th: f64,
) -> (RafNeuronState, bool) {
    let mut next = state;
    let spiked = next.step(input, alpha, v_th);
    (next, spiked)
}

/// Outcome of running the neuron bank over one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Detected range bin; `None` when no neuron above bin 0 fired.
    pub bin: Option<usize>,
    pub spike_counts: Vec<u32>,
    pub first_spike_steps: Vec<Option<usize>>,
}

impl DetectionResult {
    pub fn empty(n_neurons: usize) -> Self {
        Self {
            bin: None,
            spike_counts: vec![0; n_neurons],
            first_spike_steps: vec![None; n_neurons],
        }
    }
}

/// Closest-prominent-target rule shared by the RAF and FFT detectors:
/// among bins >= 1 whose score reaches `fraction` of the best score, return
/// the lowest one.
pub fn select_closest<T: Copy + Into<f64>>(scores: &[T], fraction: f64) -> Option<usize> {
    let best = scores
        .iter()
        .skip(1)
        .map(|&s| s.into())
        .fold(0.0f64, f64::max);
    if best <= 0.0 {
        return None;
    }
    // integer counts: count >= ceil(f * max) iff count >= f * max
    let floor = (fraction * best).max(f64::MIN_POSITIVE);
    scores
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &s)| s.into() >= floor)
        .map(|(k, _)| k)
}

/// The detection stream: the first `n_detect_chirps` chirps of the detection
/// antenna back to back, re-centered to zero mean.
pub fn detection_stream(frame: &PreprocessedFrame, cfg: &RafConfig) -> Result<Vec<f64>> {
    if frame.n_samples() != cfg.samples_per_chirp {
        return Err(Error::dims(
            format!("{} samples per chirp", cfg.samples_per_chirp),
            frame.n_samples(),
        ));
    }
    if frame.n_chirps() < cfg.n_detect_chirps || cfg.antenna >= frame.n_antennas() {
        return Err(Error::dims(
            format!(">= {} chirps on antenna {}", cfg.n_detect_chirps, cfg.antenna),
            format!("{} chirps, {} antennas", frame.n_chirps(), frame.n_antennas()),
        ));
    }
    let mut stream: Vec<f64> = (0..cfg.n_detect_chirps)
        .flat_map(|c| frame.chirp(cfg.antenna, c).iter().copied())
        .collect();
    // min-max scaling leaves a DC offset that would ring the low-bin neurons
    let mean = stream.iter().sum::<f64>() / stream.len() as f64;
    stream.iter_mut().for_each(|v| *v -= mean);
    Ok(stream)
}

/// Runs the neuron bank over `stream` (already scaled) from the resting state.
pub fn run_bank(stream: &[f64], cfg: &RafConfig) -> Vec<RafNeuronState> {
    (0..cfg.n_neurons)
        .map(|k| {
            let mut neuron = RafNeuronState::for_bin(k, cfg.samples_per_chirp);
            for &x in stream {
                neuron.step(x, cfg.alpha, cfg.v_th);
            }
            neuron
        })
        .collect()
}

/// Detects the hand's range bin in one preprocessed frame.
pub fn detect_target(frame: &PreprocessedFrame, cfg: &RafConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let stream: Vec<f64> = detection_stream(frame, cfg)?
        .into_iter()
        .map(|v| v * cfg.input_gain)
        .collect();
    let bank = run_bank(&stream, cfg);
    let spike_counts: Vec<u32> = bank.iter().map(|n| n.spike_count).collect();
    Ok(DetectionResult {
        bin: select_closest(&spike_counts, cfg.candidate_fraction),
        first_spike_steps: bank.iter().map(|n| n.first_spike_step).collect(),
        spike_counts,
    })
}

/// Earliest frame whose detected bin equals the recording's minimum
/// detected bin.
pub fn gesture_frame_from_bins(bins: &[Option<usize>]) -> Option<usize> {
    let closest = bins.iter().flatten().min()?;
    bins.iter().position(|b| *b == Some(*closest))
}

/// Runs RAF detection on every frame of a raw recording.
pub fn detect_recording(recording: &Recording, cfg: &RafConfig) -> Result<Vec<DetectionResult>> {
    (0..recording.n_frames())
        .map(|f| detect_target(&preprocess(recording.frame_f64(f).view()), cfg))
        .collect()
}

/// Locates the gesture frame of a raw recording.
pub fn find_gesture_frame(recording: &Recording, cfg: &RafConfig) -> Result<Option<usize>> {
    let bins: Vec<Option<usize>> = detect_recording(recording, cfg)?
        .into_iter()
        .map(|d| d.bin)
        .collect();
    Ok(gesture_frame_from_bins(&bins))
}

/// Frames before and after the gesture frame that carry the gesture label.
pub fn label_window(kind: GestureClass) -> (usize, usize) {
    if kind == GestureClass::Push {
        (5, 3)
    } else {
        (4, 4)
    }
}

/// Frame labels for a recording of `kind` anchored at `gesture_frame`.
pub fn label_recording(
    n_frames: usize,
    gesture_frame: usize,
    kind: GestureClass,
) -> Result<Vec<GestureClass>> {
    if kind == GestureClass::Background {
        return Err(Error::InvalidArgument(
            "Background recordings have no gesture window".into(),
        ));
    }
    if gesture_frame >= n_frames {
        return Err(Error::InvalidArgument(format!(
            "gesture frame {gesture_frame} outside {n_frames} frames"
        )));
    }
    let (before, after) = label_window(kind);
    let lo = gesture_frame.saturating_sub(before);
    let hi = (gesture_frame + after).min(n_frames - 1);
    Ok((0..n_frames)
        .map(|f| if (lo..=hi).contains(&f) { kind } else { GestureClass::Background })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::minmax_normalize;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn drive(bin: usize, tone_bin: f64, amplitude: f64, steps: usize) -> RafNeuronState {
        let cfg = RafConfig::default();
        let mut n = RafNeuronState::for_bin(bin, 64);
        for i in 0..steps {
            let x = amplitude * (2.0 * PI * tone_bin * i as f64 / 64.0).cos();
            n.step(cfg.input_gain * x, cfg.alpha, cfg.v_th);
        }
        n
    }

    #[test]
    fn pure_rotation_preserves_magnitude() {
        let mut n = RafNeuronState::for_bin(7, 64).with_state(0.3, -0.4);
        for _ in 0..1000 {
            n.step(0.0, 0.0, 10.0);
        }
        assert!((n.magnitude() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn free_decay_is_geometric() {
        let mut n = RafNeuronState::for_bin(3, 64).with_state(1.0, 0.5);
        let m0 = n.magnitude();
        for t in 1..=200 {
            let before = n.magnitude();
            n.step(0.0, 0.018, 10.0);
            assert!((n.magnitude() - 0.982 * before).abs() < 1e-14);
            assert!((n.magnitude() - 0.982f64.powi(t) * m0).abs() < 1e-12);
        }
    }

    #[test]
    fn raf_step_is_functional() {
        let s = RafNeuronState::for_bin(1, 64);
        let (next, spiked) = raf_step(s, 1.0, 0.018, 0.02);
        assert!(!spiked);
        assert_eq!(next.re, 1.0);
        assert_eq!(s.re, 0.0);
    }

    #[test]
    fn resonant_neuron_fires_and_detuned_does_not() {
        let hot = drive(16, 16.0, 0.5, 192);
        let cold = drive(4, 16.0, 0.5, 192);
        assert!(hot.spike_count >= 1);
        assert_eq!(cold.spike_count, 0);
        assert!(hot.first_spike_step.unwrap() < 192);
    }

    #[test]
    fn frequency_selectivity() {
        for b in 2..=30 {
            let counts: Vec<u32> = (0..32).map(|k| drive(k, b as f64, 0.5, 192).spike_count).collect();
            let max = *counts.iter().max().unwrap();
            assert!(max > 0);
            assert_eq!(counts[b], max, "bin {b}: {counts:?}");
        }
    }

    #[test]
    fn select_closest_rule() {
        assert_eq!(select_closest(&[9u32, 0, 0, 4, 10, 0], 0.5), Some(4));
        assert_eq!(select_closest(&[9u32, 0, 1, 5, 10, 0], 0.5), Some(3));
        assert_eq!(select_closest(&[9u32, 0, 0, 0], 0.5), None);
        assert_eq!(select_closest(&[0u32, 2, 0, 9], 0.5), Some(3));
    }

    #[test]
    fn zero_frame_has_no_detection() {
        let frame = minmax_normalize(Array3::zeros((3, 32, 64)));
        let d = detect_target(&frame, &RafConfig::default()).unwrap();
        assert_eq!(d.bin, None);
        assert!(d.spike_counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn detection_rejects_wrong_shape() {
        let frame = minmax_normalize(Array3::zeros((3, 32, 32)));
        assert!(detect_target(&frame, &RafConfig::default()).is_err());
    }

    #[test]
    fn gesture_frame_is_earliest_minimum() {
        let bins = [None, Some(9), Some(7), Some(8), Some(7), None];
        assert_eq!(gesture_frame_from_bins(&bins), Some(2));
        assert_eq!(gesture_frame_from_bins(&[None, None]), None);
    }

    #[test]
    fn label_windows() {
        let labels = label_recording(100, 50, GestureClass::SwipeLeft).unwrap();
        let on: Vec<usize> = (0..100).filter(|&f| labels[f] == GestureClass::SwipeLeft).collect();
        assert_eq!(on, (46..=54).collect::<Vec<_>>());

        let labels = label_recording(100, 50, GestureClass::Push).unwrap();
        let on: Vec<usize> = (0..100).filter(|&f| labels[f] == GestureClass::Push).collect();
        assert_eq!(on, (45..=53).collect::<Vec<_>>());

        let labels = label_recording(100, 2, GestureClass::SwipeUp).unwrap();
        let on: Vec<usize> = (0..100).filter(|&f| labels[f] == GestureClass::SwipeUp).collect();
        assert_eq!(on, (0..=6).collect::<Vec<_>>());

        let labels = label_recording(100, 98, GestureClass::Push).unwrap();
        let on: Vec<usize> = (0..100).filter(|&f| labels[f] == GestureClass::Push).collect();
        assert_eq!(on, (93..=99).collect::<Vec<_>>());

        assert!(label_recording(100, 100, GestureClass::Push).is_err());
        assert!(label_recording(100, 10, GestureClass::Background).is_err());
    }

    proptest! {
        #[test]
        fn zero_input_decay(re in -2.0f64..2.0, im in -2.0f64..2.0, steps in 1usize..300, bin in 0usize..32) {
            let mut n = RafNeuronState::for_bin(bin, 64).with_state(re, im);
            let m0 = n.magnitude();
            for _ in 0..steps {
                n.step(0.0, 0.018, 1e9);
            }
            let expected = 0.982f64.powi(steps as i32) * m0;
            prop_assert!((n.magnitude() - expected).abs() <= 1e-12 * m0.max(1.0));
        }

        #[test]
        fn louder_resonant_drive_spikes_no_less(bin in 2usize..31, a in 0.05f64..1.0, scale in 1.0f64..4.0) {
            let quiet = drive(bin, bin as f64, a, 192).spike_count;
            let loud = drive(bin, bin as f64, a * scale, 192).spike_count;
            if quiet >= 1 {
                prop_assert!(loud >= quiet, "bin {bin} a {a}: {quiet} -> {loud}");
            }
        }

        #[test]
        fn swipe_window_has_nine_frames(g in 4usize..96, swipe in 1usize..5) {
            let kind = GestureClass::from_index(swipe).unwrap();
            let labels = label_recording(100, g, kind).unwrap();
            let on: Vec<usize> = (0..100).filter(|&f| labels[f] != GestureClass::Background).collect();
            prop_assert_eq!(on.len(), 9);
            prop_assert_eq!(on[0] + 4, g);
        }
    }
}
