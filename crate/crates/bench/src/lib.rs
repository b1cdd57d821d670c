//! Fixtures shared by the criterion benchmarks.

use ndarray::Array3;
use rafhgr_core::dsp::preprocess;
use rafhgr_core::radar::synth_frame;
use rafhgr_core::{PreprocessedFrame, RadarConfig, TargetState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A raw frame with a moving hand at `bin` in front of a static body.
pub fn hand_frame(cfg: &RadarConfig, bin: usize, seed: u64) -> Array3<f64> {
    let hand = TargetState {
        range: bin as f64 * cfg.range_resolution(),
        radial_velocity: 0.8,
        azimuth: 0.2,
        elevation: -0.1,
        amplitude: 1.0,
    };
    let body = TargetState {
        range: 0.9,
        radial_velocity: 0.0,
        azimuth: 0.0,
        elevation: 0.0,
        amplitude: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_frame(cfg, &[hand, body], 0.05, &mut rng).expect("valid fixture")
}

pub fn preprocessed_hand_frame(cfg: &RadarConfig, bin: usize, seed: u64) -> PreprocessedFrame {
    preprocess(hand_frame(cfg, bin, seed).view())
}
