//! FFT-free radar hand-gesture recognition.
//!
//! The pipeline detects the hand's range bin with a bank of resonate-and-fire
//! neurons running directly on time-domain FMCW samples, evaluates the DFT
//! only at that bin with the Goertzel recursion, derives five features per
//! frame and classifies the frame sequence with a small GRU.
//!
//! Modules:
//! - [`radar`]: radar model and synthetic gesture recordings
//! - [`dsp`]: preprocessing, Goertzel, DFT/FFT, monopulse
//! - [`raf`]: resonate-and-fire detection and frame labeling
//! - [`features`]: per-frame features and the standard scaler
//! - [`nn`]: GRU classifier, training and evaluation
//! - [`bench`]: FFT baselines, op counts and the comparison table
//! - [`dataset`]: the RAFD container and split index

pub mod bench;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod radar;
pub mod raf;

pub use dsp::{ComplexCoefficient, PreprocessedFrame};
pub use error::{Error, Result};
pub use features::{FeatureScaler, FeatureVector};
pub use nn::{GruModel, TrainConfig, TrainHistory};
pub use radar::{GestureClass, GestureParams, RadarConfig, Recording, TargetState};
pub use raf::{DetectionResult, RafConfig, RafNeuronState};
