//! FMCW radar model and synthetic gesture recordings.
//!
//! The simulator produces real-valued IF samples for point targets. Each
//! target contributes one cosine whose fast-time frequency encodes range,
//! whose chirp-to-chirp phase advance encodes radial velocity and whose
//! per-antenna phase offset encodes azimuth/elevation on an L-shaped array.
//!
//! ```text
//! x[a][c][n] = sum_t A_t cos(2 pi f_b n / F_s + c phi_d + phi_ant(a) + phi_0)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array3, Array4, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar operating parameters plus antenna geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Chirp start frequency (Hz).
    pub f_min: f64,
    /// Chirp stop frequency (Hz).
    pub f_max: f64,
    /// Center frequency (Hz), `(f_min + f_max) / 2`.
    pub f_center: f64,
    /// Sweep bandwidth (Hz), `f_max - f_min`.
    pub bandwidth: f64,
    /// ADC samples per chirp.
    pub n_samples: usize,
    /// Chirps per frame.
    pub n_chirps: usize,
    /// Frames per recording.
    pub n_frames: usize,
    /// Chirp repetition time (s).
    pub t_chirp: f64,
    /// Frame repetition time (s).
    pub t_frame: f64,
    /// ADC sample rate (Hz).
    pub f_sample: f64,
    /// Receive antennas.
    pub n_antennas: usize,
    /// Element spacing in carrier wavelengths.
    pub antenna_spacing_wavelengths: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            f_min: 58.5e9,
            f_max: 62.5e9,
            f_center: 60.5e9,
            bandwidth: 4e9,
            n_samples: 64,
            n_chirps: 32,
            n_frames: 100,
            t_chirp: 0.3e-3,
            t_frame: 30e-3,
            f_sample: 2e6,
            n_antennas: 3,
            antenna_spacing_wavelengths: 0.5,
        }
    }
}

impl RadarConfig {
    /// Replaces the sweep band, keeping center and bandwidth consistent.
    pub fn with_band(mut self, f_min: f64, f_max: f64) -> Self {
        self.f_min = f_min;
        self.f_max = f_max;
        self.f_center = 0.5 * (f_min + f_max);
        self.bandwidth = f_max - f_min;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let finite = [
            self.f_min,
            self.f_max,
            self.f_center,
            self.bandwidth,
            self.t_chirp,
            self.t_frame,
            self.f_sample,
            self.antenna_spacing_wavelengths,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite radar parameter");
        }
        if self.bandwidth <= 0.0 {
            return bad("bandwidth must be positive");
        }
        let tol = 1e-9 * self.f_max.abs().max(1.0);
        if (self.bandwidth - (self.f_max - self.f_min)).abs() > tol {
            return bad("bandwidth must equal f_max - f_min");
        }
        if (self.f_center - 0.5 * (self.f_min + self.f_max)).abs() > tol {
            return bad("f_center must equal (f_min + f_max) / 2");
        }
        if self.n_samples == 0 || self.n_chirps == 0 || self.n_frames == 0 || self.n_antennas == 0 {
            return bad("sample, chirp, frame and antenna counts must be at least 1");
        }
        if !self.n_samples.is_power_of_two() {
            return bad("n_samples must be a power of two");
        }
        if self.n_antennas > 3 {
            return bad("the L-shaped array model supports at most 3 antennas");
        }
        if self.t_chirp <= 0.0 || self.t_frame <= 0.0 || self.f_sample <= 0.0 {
            return bad("timing parameters must be positive");
        }
        if self.antenna_spacing_wavelengths <= 0.0 {
            return bad("antenna spacing must be positive");
        }
        Ok(())
    }

    /// `c0 / 2B`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Maximum unambiguous range, `R_res * N_s / 2`.
    pub fn max_range(&self) -> f64 {
        self.range_resolution() * self.n_samples as f64 / 2.0
    }

    /// `c0 / (4 F_c T_c)`.
    pub fn max_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.f_center * self.t_chirp)
    }

    /// Phase advance between consecutive chirps for a target at `velocity` m/s.
    pub fn doppler_phase_per_chirp(&self, velocity: f64) -> f64 {
        4.0 * PI * self.f_center * velocity * self.t_chirp / SPEED_OF_LIGHT
    }

    /// Fractional fast-time DFT bin of a target at `range` metres.
    pub fn beat_bin(&self, range: f64) -> f64 {
        range / self.range_resolution()
    }

    /// Number of positive-frequency bins (and RAF neurons).
    pub fn n_range_bins(&self) -> usize {
        self.n_samples / 2
    }
}

/// Kinematic state of a point target for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    /// Radial distance (m).
    pub range: f64,
    /// Radial velocity (m/s), positive when receding.
    pub radial_velocity: f64,
    /// Azimuth (rad).
    pub azimuth: f64,
    /// Elevation (rad).
    pub elevation: f64,
    /// Echo amplitude.
    pub amplitude: f64,
}

impl TargetState {
    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        let fields = [
            self.range,
            self.radial_velocity,
            self.azimuth,
            self.elevation,
            self.amplitude,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite target parameters: {self:?}"
            )));
        }
        let slack = 1e-9;
        if self.range < 0.0 || self.range > cfg.max_range() + slack {
            return Err(Error::InvalidArgument(format!(
                "target range {} outside [0, {}]",
                self.range,
                cfg.max_range()
            )));
        }
        if self.radial_velocity.abs() > cfg.max_velocity() + slack {
            return Err(Error::InvalidArgument(format!(
                "radial velocity {} exceeds {}",
                self.radial_velocity,
                cfg.max_velocity()
            )));
        }
        if self.azimuth.abs() > FRAC_PI_2 || self.elevation.abs() > FRAC_PI_2 {
            return Err(Error::InvalidArgument("angles must lie in [-pi/2, pi/2]".into()));
        }
        if self.amplitude < 0.0 {
            return Err(Error::InvalidArgument("amplitude must be non-negative".into()));
        }
        Ok(())
    }
}

/// Recording-level and frame-level class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum GestureClass {
    Background = 0,
    SwipeLeft = 1,
    SwipeRight = 2,
    SwipeUp = 3,
    SwipeDown = 4,
    Push = 5,
}

impl GestureClass {
    pub const COUNT: usize = 6;

    pub const ALL: [GestureClass; 6] = [
        GestureClass::Background,
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::SwipeUp,
        GestureClass::SwipeDown,
        GestureClass::Push,
    ];

    pub const GESTURES: [GestureClass; 5] = [
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::SwipeUp,
        GestureClass::SwipeDown,
        GestureClass::Push,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("class index {index} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Background => "Background",
            GestureClass::SwipeLeft => "SwipeLeft",
            GestureClass::SwipeRight => "SwipeRight",
            GestureClass::SwipeUp => "SwipeUp",
            GestureClass::SwipeDown => "SwipeDown",
            GestureClass::Push => "Push",
        }
    }

    pub fn is_swipe(self) -> bool {
        matches!(
            self,
            GestureClass::SwipeLeft
                | GestureClass::SwipeRight
                | GestureClass::SwipeUp
                | GestureClass::SwipeDown
        )
    }
}

impl std::fmt::Display for GestureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One gesture recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// `[antenna][frame][chirp][sample]`.
    pub samples: Array4<f32>,
    pub label: GestureClass,
    /// Hand state per frame; `None` where the hand is absent.
    pub ground_truth: Option<Vec<Option<TargetState>>>,
}

impl Recording {
    pub fn n_frames(&self) -> usize {
        self.samples.len_of(Axis(1))
    }

    /// Frame `index` as `[antenna][chirp][sample]`.
    pub fn frame(&self, index: usize) -> ArrayView3<'_, f32> {
        self.samples.index_axis(Axis(1), index)
    }

    /// Frame `index` widened to `f64`.
    pub fn frame_f64(&self, index: usize) -> Array3<f64> {
        self.frame(index).mapv(f64::from)
    }

    pub fn check_dims(&self, cfg: &RadarConfig) -> Result<()> {
        let expected = [cfg.n_antennas, cfg.n_frames, cfg.n_chirps, cfg.n_samples];
        if self.samples.shape() != expected {
            return Err(Error::dims(
                format!("{expected:?}"),
                format!("{:?}", self.samples.shape()),
            ));
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != cfg.n_frames {
                return Err(Error::dims(cfg.n_frames, gt.len()));
            }
        }
        Ok(())
    }
}

/// Per-antenna phase offset of the L-shaped array.
///
/// Antenna 0 is the reference, antenna 2 is displaced horizontally and
/// antenna 1 is placed so that the 2-1 pair spans elevation.
pub fn antenna_phase(antenna: usize, azimuth: f64, elevation: f64, spacing: f64) -> f64 {
    let k = 2.0 * PI * spacing;
    match antenna {
        0 => 0.0,
        1 => k * (azimuth.sin() - elevation.sin()),
        _ => k * azimuth.sin(),
    }
}

/// Synthesizes one frame `[antenna][chirp][sample]` of IF data.
pub fn synth_frame<R: Rng + ?Sized>(
    cfg: &RadarConfig,
    targets: &[TargetState],
    noise_std: f64,
    rng: &mut R,
) -> Result<Array3<f64>> {
    for target in targets {
        target.validate(cfg)?;
    }
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(Error::InvalidArgument(format!("noise_std {noise_std} must be >= 0")));
    }
    let mut frame = Array3::<f64>::zeros((cfg.n_antennas, cfg.n_chirps, cfg.n_samples));
    for target in targets {
        let omega = 2.0 * PI * cfg.beat_bin(target.range) / cfg.n_samples as f64;
        let doppler = cfg.doppler_phase_per_chirp(target.radial_velocity);
        // round-trip carrier phase
        let phase0 = 4.0 * PI * cfg.f_center * target.range / SPEED_OF_LIGHT;
        for a in 0..cfg.n_antennas {
            let ant = antenna_phase(
                a,
                target.azimuth,
                target.elevation,
                cfg.antenna_spacing_wavelengths,
            );
            for c in 0..cfg.n_chirps {
                let base = c as f64 * doppler + ant + phase0;
                for n in 0..cfg.n_samples {
                    frame[[a, c, n]] += target.amplitude * (omega * n as f64 + base).cos();
                }
            }
        }
    }
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        frame.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(frame)
}

/// Static reflector standing behind the hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub range: f64,
    /// Reflectivity relative to the hand at equal range.
    pub reflectivity: f64,
}

/// Trajectory and scene parameters of one synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureParams {
    /// Frames during which the hand is present.
    pub window_frames: usize,
    /// First frame of the gesture window.
    pub window_start: usize,
    /// Hand range at the edges of the window (m).
    pub start_range: f64,
    /// Closest approach (m).
    pub min_range: f64,
    /// Swipes sweep the moving angle from `+extent` to `-extent` (or back).
    pub angle_extent: f64,
    /// Constant azimuth for vertical swipes and Push.
    pub azimuth_offset: f64,
    /// Constant elevation for horizontal swipes and Push.
    pub elevation_offset: f64,
    /// Share of the Push window spent retracting.
    pub retract_fraction: f64,
    /// Retraction distance as a share of `start_range - min_range`.
    pub retract_depth: f64,
    pub amplitude_scale: f64,
    /// Range at which the hand amplitude equals `amplitude_scale`.
    pub reference_range: f64,
    /// Absolute noise standard deviation.
    pub noise_std: f64,
    pub body: Option<BodyParams>,
}

impl GestureParams {
    /// Default geometry with the window centred in the recording.
    pub fn centered(cfg: &RadarConfig) -> Self {
        let window_frames = 25.min(cfg.n_frames);
        Self {
            window_frames,
            window_start: (cfg.n_frames - window_frames) / 2,
            start_range: 0.5,
            min_range: 0.15,
            angle_extent: 0.6,
            azimuth_offset: 0.0,
            elevation_offset: 0.0,
            retract_fraction: 0.25,
            retract_depth: 0.3,
            amplitude_scale: 1.0,
            reference_range: 0.3,
            noise_std: 0.05,
            body: Some(BodyParams {
                range: 0.9,
                reflectivity: 4.0,
            }),
        }
    }

    /// Draws a randomized scene for `kind`. `noise_rel` is noise relative to
    /// the amplitude scale.
    pub fn randomized<R: Rng + ?Sized>(
        cfg: &RadarConfig,
        kind: GestureClass,
        noise_rel: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::centered(cfg);
        let margin = 10.min((cfg.n_frames - p.window_frames) / 2);
        let hi = cfg.n_frames - p.window_frames - margin;
        p.window_start = if hi > margin { rng.random_range(margin..=hi) } else { margin };
        if kind == GestureClass::Push {
            p.start_range = rng.random_range(0.45..0.6);
            p.min_range = rng.random_range(0.12..0.2);
        } else {
            p.min_range = rng.random_range(0.15..0.4);
            p.start_range = p.min_range + rng.random_range(0.1..0.22);
        }
        p.angle_extent = rng.random_range(0.4..0.8);
        p.azimuth_offset = rng.random_range(-0.15..0.15);
        p.elevation_offset = rng.random_range(-0.15..0.15);
        p.noise_std = noise_rel * p.amplitude_scale;
        p.body = Some(BodyParams {
            range: rng.random_range(0.8..1.05),
            reflectivity: rng.random_range(2.0..6.0),
        });
        p
    }

    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let values = [
            self.start_range,
            self.min_range,
            self.angle_extent,
            self.azimuth_offset,
            self.elevation_offset,
            self.retract_fraction,
            self.retract_depth,
            self.amplitude_scale,
            self.reference_range,
            self.noise_std,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite trajectory parameter".into());
        }
        if self.window_frames < 2 || self.window_start + self.window_frames > cfg.n_frames {
            return bad(format!(
                "gesture window {}+{} does not fit in {} frames",
                self.window_start, self.window_frames, cfg.n_frames
            ));
        }
        if self.min_range <= 0.0 {
            return bad(format!("min range {} must be positive", self.min_range));
        }
        if self.start_range <= self.min_range || self.start_range > cfg.max_range() {
            return bad(format!(
                "start range {} must lie in ({}, {}]",
                self.start_range,
                self.min_range,
                cfg.max_range()
            ));
        }
        if self.angle_extent < 0.0
            || self.angle_extent + self.azimuth_offset.abs().max(self.elevation_offset.abs())
                > FRAC_PI_2
        {
            return bad("angles exceed +-pi/2".into());
        }
        if !(0.0..1.0).contains(&self.retract_fraction) || self.retract_fraction == 0.0 {
            return bad("retract fraction must lie in (0, 1)".into());
        }
        if self.retract_depth < 0.0 || self.retract_depth > 1.0 {
            return bad("retract depth must lie in [0, 1]".into());
        }
        if self.amplitude_scale < 0.0 || self.reference_range <= 0.0 || self.noise_std < 0.0 {
            return bad("amplitude, reference range and noise must be non-negative".into());
        }
        if let Some(body) = &self.body {
            if body.range <= self.start_range || body.range > cfg.max_range() {
                return bad(format!(
                    "body range {} must lie beyond the hand and within {}",
                    body.range,
                    cfg.max_range()
                ));
            }
            if body.reflectivity < 0.0 {
                return bad("body reflectivity must be non-negative".into());
            }
        }
        Ok(())
    }

    fn amplitude_at(&self, range: f64) -> f64 {
        self.amplitude_scale * (self.reference_range / range).powi(2)
    }

    /// Hand state for frame `frame`, or `None` outside the gesture window.
    pub fn hand_state(
        &self,
        cfg: &RadarConfig,
        kind: GestureClass,
        frame: usize,
    ) -> Option<TargetState> {
        if kind == GestureClass::Background
            || frame < self.window_start
            || frame >= self.window_start + self.window_frames
        {
            return None;
        }
        let span = (self.window_frames - 1) as f64;
        let j = (frame - self.window_start) as f64;
        let u = j / span;
        let depth = self.start_range - self.min_range;
        let dt = span * cfg.t_frame;

        let (range, velocity) = if kind == GestureClass::Push {
            let turn = 1.0 - self.retract_fraction;
            if u <= turn {
                (self.min_range + depth * (1.0 - u / turn), -depth / (turn * dt))
            } else {
                let back = self.retract_depth * depth;
                (
                    self.min_range + back * (u - turn) / self.retract_fraction,
                    back / (self.retract_fraction * dt),
                )
            }
        } else {
            // V-shaped approach: closest at the middle of the swipe
            let speed = 2.0 * depth / dt;
            let sign = if u < 0.5 { -1.0 } else { 1.0 };
            (self.min_range + depth * (2.0 * u - 1.0).abs(), sign * speed)
        };

        let sweep = self.angle_extent * (1.0 - 2.0 * u);
        let (azimuth, elevation) = match kind {
            GestureClass::SwipeLeft => (sweep, self.elevation_offset),
            GestureClass::SwipeRight => (-sweep, self.elevation_offset),
            GestureClass::SwipeUp => (self.azimuth_offset, -sweep),
            GestureClass::SwipeDown => (self.azimuth_offset, sweep),
            _ => (self.azimuth_offset, self.elevation_offset),
        };
        Some(TargetState {
            range,
            radial_velocity: velocity,
            azimuth,
            elevation,
            amplitude: self.amplitude_at(range),
        })
    }

    fn body_state(&self) -> Option<TargetState> {
        self.body.map(|body| TargetState {
            range: body.range,
            radial_velocity: 0.0,
            azimuth: 0.0,
            elevation: 0.0,
            amplitude: body.reflectivity * self.amplitude_at(body.range),
        })
    }
}

/// Generates a full recording of gesture `kind`.
pub fn synth_gesture_recording(
    cfg: &RadarConfig,
    kind: GestureClass,
    params: &GestureParams,
    seed: u64,
) -> Result<Recording> {
    cfg.validate()?;
    params.validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples =
        Array4::<f32>::zeros((cfg.n_antennas, cfg.n_frames, cfg.n_chirps, cfg.n_samples));
    let mut truth = Vec::with_capacity(cfg.n_frames);
    let body = params.body_state();
    for f in 0..cfg.n_frames {
        let hand = params.hand_state(cfg, kind, f);
        let targets: Vec<TargetState> = hand.into_iter().chain(body).collect();
        let frame = synth_frame(cfg, &targets, params.noise_std, &mut rng)?;
        samples
            .index_axis_mut(Axis(1), f)
            .zip_mut_with(&frame, |dst, &src| *dst = src as f32);
        truth.push(hand);
    }
    Ok(Recording {
        samples,
        label: kind,
        ground_truth: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_bin(x: &[f64], k: usize) -> (f64, f64) {
        let n = x.len() as f64;
        x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, &v)| {
            let ang = -2.0 * PI * k as f64 * i as f64 / n;
            (re + v * ang.cos(), im + v * ang.sin())
        })
    }

    #[test]
    fn table_one_constants() {
        let cfg = RadarConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.range_resolution() - 0.037474).abs() < 1e-5);
        assert!((cfg.max_range() - 1.2).abs() < 1e-3);
        assert!((cfg.max_velocity() - 4.13).abs() < 0.01);
    }

    #[test]
    fn derived_constant_examples() {
        let cfg = RadarConfig::default().with_band(60e9, 60e9 + SPEED_OF_LIGHT / 2.0);
        assert!((cfg.range_resolution() - 1.0).abs() < 1e-12);

        let cfg = RadarConfig::default().with_band(59.5e9, 61.5e9);
        assert!((cfg.range_resolution() - 0.074948).abs() < 1e-5);

        let mut cfg = RadarConfig::default().with_band(1.0, 1.0 + SPEED_OF_LIGHT / 2.0);
        cfg.n_samples = 2;
        assert!((cfg.max_range() - 1.0).abs() < 1e-12);

        let bw = SPEED_OF_LIGHT / (2.0 * 0.0375);
        let mut cfg = RadarConfig::default().with_band(60e9, 60e9 + bw);
        cfg.n_samples = 128;
        assert!((cfg.max_range() - 2.4).abs() < 1e-9);

        let mut cfg = RadarConfig::default().with_band(SPEED_OF_LIGHT - 1e6, SPEED_OF_LIGHT + 1e6);
        cfg.t_chirp = 0.25;
        assert!((cfg.max_velocity() - 1.0).abs() < 1e-12);

        let cfg = RadarConfig {
            t_chirp: 0.6e-3,
            ..RadarConfig::default()
        };
        assert!((cfg.max_velocity() - 2.065).abs() < 1e-3);
    }

    #[test]
    fn round_trip_identities() {
        let cfg = RadarConfig::default();
        let r = cfg.range_resolution() * 2.0 * cfg.bandwidth / SPEED_OF_LIGHT;
        let v = cfg.max_velocity() * 4.0 * cfg.f_center * cfg.t_chirp / SPEED_OF_LIGHT;
        assert!((r - 1.0).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let cfg = RadarConfig {
            n_samples: 48,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RadarConfig {
            bandwidth: 3e9,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RadarConfig {
            n_chirps: 0,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_scene_is_silent() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let frame = synth_frame(&cfg, &[], 0.0, &mut rng).unwrap();
        assert!(frame.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beat_frequency_lands_on_bin() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let target = TargetState {
            range: 16.0 * cfg.range_resolution(),
            radial_velocity: 0.0,
            azimuth: 0.0,
            elevation: 0.0,
            amplitude: 1.0,
        };
        let frame = synth_frame(&cfg, &[target], 0.0, &mut rng).unwrap();
        let chirp: Vec<f64> = frame.slice(ndarray::s![0, 3, ..]).to_vec();
        let mags: Vec<f64> = (0..cfg.n_samples / 2)
            .map(|k| {
                let (re, im) = naive_bin(&chirp, k);
                re.hypot(im)
            })
            .collect();
        let argmax = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        assert_eq!(argmax, 16);
    }

    #[test]
    fn half_max_velocity_advances_quarter_turn() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let target = TargetState {
            range: 10.0 * cfg.range_resolution(),
            radial_velocity: cfg.max_velocity() / 2.0,
            azimuth: 0.0,
            elevation: 0.0,
            amplitude: 1.0,
        };
        let frame = synth_frame(&cfg, &[target], 0.0, &mut rng).unwrap();
        let c0: Vec<f64> = frame.slice(ndarray::s![0, 0, ..]).to_vec();
        let c1: Vec<f64> = frame.slice(ndarray::s![0, 1, ..]).to_vec();
        let (r0, i0) = naive_bin(&c0, 10);
        let (r1, i1) = naive_bin(&c1, 10);
        let diff = i1.atan2(r1) - i0.atan2(r0);
        let wrapped = (diff + PI).rem_euclid(2.0 * PI) - PI;
        assert!((wrapped - PI / 2.0).abs() < 1e-9, "{wrapped}");
    }

    #[test]
    fn rejects_non_finite_targets() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let target = TargetState {
            range: f64::NAN,
            radial_velocity: 0.0,
            azimuth: 0.0,
            elevation: 0.0,
            amplitude: 1.0,
        };
        assert!(synth_frame(&cfg, &[target], 0.0, &mut rng).is_err());
    }

    #[test]
    fn push_range_profile() {
        let cfg = RadarConfig::default();
        let p = GestureParams::centered(&cfg);
        let rec = synth_gesture_recording(&cfg, GestureClass::Push, &p, 1).unwrap();
        let gt = rec.ground_truth.unwrap();
        let ranges: Vec<f64> = gt.iter().flatten().map(|t| t.range).collect();
        assert_eq!(ranges.len(), p.window_frames);
        let turn = ((1.0 - p.retract_fraction) * (p.window_frames - 1) as f64).round() as usize;
        assert!(ranges[..=turn].windows(2).all(|w| w[1] <= w[0]));
        assert!(ranges[turn..].windows(2).all(|w| w[1] > w[0]));
        assert!(turn >= p.window_frames * 2 / 3);
    }

    #[test]
    fn swipe_left_azimuth_decreases() {
        let cfg = RadarConfig::default();
        let p = GestureParams::centered(&cfg);
        let rec = synth_gesture_recording(&cfg, GestureClass::SwipeLeft, &p, 2).unwrap();
        let az: Vec<f64> = rec.ground_truth.unwrap().iter().flatten().map(|t| t.azimuth).collect();
        assert!(az.windows(2).all(|w| w[1] < w[0]));
        assert!(az[0] > 0.0 && *az.last().unwrap() < 0.0);
    }

    #[test]
    fn swipe_right_and_vertical_sweeps() {
        let cfg = RadarConfig::default();
        let p = GestureParams::centered(&cfg);
        let right = p.hand_state(&cfg, GestureClass::SwipeRight, p.window_start).unwrap();
        assert!(right.azimuth < 0.0);
        let up: Vec<f64> = (0..p.window_frames)
            .filter_map(|j| p.hand_state(&cfg, GestureClass::SwipeUp, p.window_start + j))
            .map(|t| t.elevation)
            .collect();
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        let down = p.hand_state(&cfg, GestureClass::SwipeDown, p.window_start).unwrap();
        assert!(down.elevation > 0.0);
    }

    #[test]
    fn background_has_no_hand() {
        let cfg = RadarConfig::default();
        let p = GestureParams::centered(&cfg);
        let rec = synth_gesture_recording(&cfg, GestureClass::Background, &p, 3).unwrap();
        assert!(rec.ground_truth.unwrap().iter().all(Option::is_none));
    }

    #[test]
    fn invalid_trajectory_rejected() {
        let cfg = RadarConfig::default();
        let mut p = GestureParams::centered(&cfg);
        p.min_range = -0.1;
        assert!(synth_gesture_recording(&cfg, GestureClass::Push, &p, 0).is_err());
        let mut p = GestureParams::centered(&cfg);
        p.window_start = cfg.n_frames - 3;
        assert!(synth_gesture_recording(&cfg, GestureClass::Push, &p, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = GestureParams::randomized(&cfg, GestureClass::SwipeUp, 0.05, &mut rng);
        let a = synth_gesture_recording(&cfg, GestureClass::SwipeUp, &p, 77).unwrap();
        let b = synth_gesture_recording(&cfg, GestureClass::SwipeUp, &p, 77).unwrap();
        assert_eq!(a, b);
        a.check_dims(&cfg).unwrap();
        assert!(a.samples.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn randomized_params_are_valid() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            for kind in GestureClass::ALL {
                let p = GestureParams::randomized(&cfg, kind, 0.05, &mut rng);
                p.validate(&cfg).unwrap();
                for f in 0..cfg.n_frames {
                    if let Some(t) = p.hand_state(&cfg, kind, f) {
                        t.validate(&cfg).unwrap();
                    }
                }
            }
        }
    }
}
