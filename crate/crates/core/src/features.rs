//! Five per-frame features computed at the detected hand bin, and the
//! standardizing scaler fitted on the training split.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{goertzel, monopulse_angle, preprocess, wrap_phase, PreprocessedFrame};
use crate::error::{Error, Result};
use crate::radar::{GestureClass, RadarConfig};
use crate::raf::{detect_target, RafConfig};

pub const N_FEATURES: usize = 5;

/// Features of one frame. All zero when no target was detected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Detected range bin (0 when absent).
    pub range_bin: f64,
    /// Mean chirp-to-chirp phase advance (rad).
    pub doppler_phase: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub rms_amplitude: f64,
}

impl FeatureVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.range_bin,
            self.doppler_phase,
            self.azimuth,
            self.elevation,
            self.rms_amplitude,
        ]
    }

    pub fn from_array(v: [f64; N_FEATURES]) -> Self {
        Self {
            range_bin: v[0],
            doppler_phase: v[1],
            azimuth: v[2],
            elevation: v[3],
            rms_amplitude: v[4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&v| v == 0.0)
    }
}

/// Goertzel coefficients at `bin` for every antenna and chirp.
pub fn goertzel_matrix(frame: &PreprocessedFrame, bin: usize) -> Result<Array2<Complex64>> {
    let half = frame.n_samples() / 2;
    if bin == 0 || bin >= half {
        return Err(Error::BinOutOfRange { bin, len: half });
    }
    let mut g = Array2::zeros((frame.n_antennas(), frame.n_chirps()));
    for ((a, c), v) in g.indexed_iter_mut() {
        *v = goertzel(frame.chirp(a, c), bin)?;
    }
    Ok(g)
}

fn phase_diff(a: Complex64, b: Complex64) -> Option<f64> {
    if a == Complex64::new(0.0, 0.0) || b == Complex64::new(0.0, 0.0) {
        return None;
    }
    Some(wrap_phase(a.arg() - b.arg()))
}

fn mean_or_zero(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Phase advance between the first two chirps, averaged over antennas.
pub fn doppler_feature(g: &Array2<Complex64>) -> Result<f64> {
    if g.ncols() < 2 {
        return Err(Error::dims(">= 2 chirps", g.ncols()));
    }
    Ok(mean_or_zero(
        g.rows().into_iter().filter_map(|row| phase_diff(row[1], row[0])),
    ))
}

/// Azimuth from the antenna 2/0 pair and elevation from the 2/1 pair, each
/// phase difference averaged over chirps.
pub fn angle_features(g: &Array2<Complex64>, spacing_wavelengths: f64) -> Result<(f64, f64)> {
    if g.nrows() != 3 {
        return Err(Error::dims("3 antennas", g.nrows()));
    }
    let pair = |a: usize, b: usize| {
        mean_or_zero((0..g.ncols()).filter_map(|c| phase_diff(g[[a, c]], g[[b, c]])))
    };
    Ok((
        monopulse_angle(pair(2, 0), spacing_wavelengths),
        monopulse_angle(pair(2, 1), spacing_wavelengths),
    ))
}

pub fn rms_amplitude(g: &Array2<Complex64>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    (g.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64).sqrt()
}

/// Features of a preprocessed frame at an already detected bin.
pub fn features_at_bin(
    frame: &PreprocessedFrame,
    bin: Option<usize>,
    radar: &RadarConfig,
) -> Result<FeatureVector> {
    let Some(bin) = bin else {
        return Ok(FeatureVector::zero());
    };
    let g = goertzel_matrix(frame, bin)?;
    let (azimuth, elevation) = angle_features(&g, radar.antenna_spacing_wavelengths)?;
    Ok(FeatureVector {
        range_bin: bin as f64,
        doppler_phase: doppler_feature(&g)?,
        azimuth,
        elevation,
        rms_amplitude: rms_amplitude(&g),
    })
}

/// Full per-frame chain: preprocess, RAF detection, Goertzel features.
pub fn extract_features(
    frame: ArrayView3<'_, f64>,
    raf: &RafConfig,
    radar: &RadarConfig,
) -> Result<FeatureVector> {
    let expected = [radar.n_antennas, radar.n_chirps, radar.n_samples];
    if frame.shape() != expected {
        return Err(Error::dims(format!("{expected:?}"), format!("{:?}", frame.shape())));
    }
    let pre = preprocess(frame);
    let detection = detect_target(&pre, raf)?;
    features_at_bin(&pre, detection.bin, radar)
}

/// Per-feature standardization fitted on training frames only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl FeatureScaler {
    /// Variance floor for constant columns.
    pub const EPSILON: f64 = 1e-8;

    /// Population mean/std per column.
    pub fn fit(rows: &[[f64; N_FEATURES]]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "scaler needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; N_FEATURES];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.map(|s| (s / n).sqrt().max(Self::EPSILON));
        Ok(Self { mean, std })
    }

    pub fn transform(&self, row: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|i| (row[i] - self.mean[i]) / self.std[i])
    }

    pub fn transform_all(&self, rows: &[[f64; N_FEATURES]]) -> Vec<[f64; N_FEATURES]> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scaler: Self = serde_json::from_str(text)?;
        if scaler.std.iter().any(|&s| s.is_nan() || s < Self::EPSILON) {
            return Err(Error::Format("scaler std below variance floor".into()));
        }
        Ok(scaler)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One line of the features CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub recording_id: usize,
    pub frame: usize,
    pub features: FeatureVector,
    pub label: GestureClass,
}

pub const FEATURES_HEADER: [&str; 8] = [
    "recording_id",
    "frame",
    "range_bin",
    "doppler_phase",
    "azimuth",
    "elevation",
    "rms_amplitude",
    "label",
];

pub fn write_features_csv<W: Write>(writer: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURES_HEADER)?;
    for row in rows {
        let mut record = vec![row.recording_id.to_string(), row.frame.to_string()];
        record.extend(row.features.to_array().iter().map(|v| v.to_string()));
        record.push(row.label.index().to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(FEATURES_HEADER.iter().copied()) {
        return Err(Error::Format(format!("unexpected features header: {header:?}")));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
    };
    let parse_int = |s: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|e| Error::Format(format!("bad integer {s:?}: {e}")))
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            let mut f = [0.0; N_FEATURES];
            for (i, v) in f.iter_mut().enumerate() {
                *v = parse(&rec[2 + i])?;
            }
            Ok(FeatureRow {
                recording_id: parse_int(&rec[0])?,
                frame: parse_int(&rec[1])?,
                features: FeatureVector::from_array(f),
                label: GestureClass::from_index(parse_int(&rec[7])?)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{minmax_normalize, naive_dft_bin};
    use crate::radar::{synth_frame, TargetState};
    use ndarray::Array3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn target(bin: f64, velocity: f64, az: f64, el: f64) -> TargetState {
        let cfg = RadarConfig::default();
        TargetState {
            range: bin * cfg.range_resolution(),
            radial_velocity: velocity,
            azimuth: az,
            elevation: el,
            amplitude: 1.0,
        }
    }

    fn pre(targets: &[TargetState]) -> PreprocessedFrame {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        preprocess(synth_frame(&cfg, targets, 0.0, &mut rng).unwrap().view())
    }

    #[test]
    fn static_target_magnitude_constant_over_chirps() {
        // without clutter removal a static target keeps its slow-time magnitude
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = synth_frame(&cfg, &[target(12.0, 0.0, 0.2, 0.1)], 0.0, &mut rng).unwrap();
        let g = goertzel_matrix(&minmax_normalize(raw), 12).unwrap();
        for row in g.rows() {
            for v in row.iter() {
                assert!((v.norm() - row[0].norm()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_frame_gives_zero_matrix() {
        let frame = minmax_normalize(Array3::zeros((3, 32, 64)));
        assert!(goertzel_matrix(&frame, 5).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(goertzel_matrix(&frame, 0).is_err());
        assert!(goertzel_matrix(&frame, 32).is_err());
    }

    #[test]
    fn goertzel_matrix_matches_dft() {
        let frame = pre(&[target(7.3, 0.8, 0.3, -0.2), target(20.0, -0.5, 0.0, 0.0)]);
        let g = goertzel_matrix(&frame, 9).unwrap();
        for ((a, c), v) in g.indexed_iter() {
            let o = naive_dft_bin(frame.chirp(a, c), 9).unwrap();
            assert!((v - o).norm() < 1e-9);
        }
    }

    #[test]
    fn doppler_of_static_and_half_vmax() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = synth_frame(&cfg, &[target(12.0, 0.0, 0.2, 0.1)], 0.0, &mut rng).unwrap();
        let g = goertzel_matrix(&minmax_normalize(raw), 12).unwrap();
        assert!(doppler_feature(&g).unwrap().abs() < 1e-6);

        let frame = pre(&[target(12.0, cfg.max_velocity() / 2.0, 0.2, 0.1)]);
        let g = goertzel_matrix(&frame, 12).unwrap();
        assert!((doppler_feature(&g).unwrap() - PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn doppler_independent_of_antenna_count() {
        let one = Array2::from_shape_fn((1, 4), |(_, c)| Complex64::from_polar(1.0, 0.3 * c as f64));
        let three = Array2::from_shape_fn((3, 4), |(_, c)| Complex64::from_polar(2.0, 0.3 * c as f64));
        let d1 = doppler_feature(&one).unwrap();
        let d3 = doppler_feature(&three).unwrap();
        assert!((d1 - d3).abs() < 1e-12 && (d1 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_are_excluded() {
        let mut g = Array2::from_elem((3, 4), Complex64::new(0.0, 0.0));
        assert_eq!(doppler_feature(&g).unwrap(), 0.0);
        assert_eq!(angle_features(&g, 0.5).unwrap(), (0.0, 0.0));
        g[[1, 0]] = Complex64::from_polar(1.0, 0.1);
        g[[1, 1]] = Complex64::from_polar(1.0, 0.5);
        assert!((doppler_feature(&g).unwrap() - 0.4).abs() < 1e-12);
        assert!(angle_features(&Array2::from_elem((2, 4), Complex64::new(1.0, 0.0)), 0.5).is_err());
    }

    #[test]
    fn angle_recovery() {
        let cfg = RadarConfig::default();
        let v = cfg.max_velocity() / 4.0;
        let g = goertzel_matrix(&pre(&[target(10.0, v, 0.0, 0.0)]), 10).unwrap();
        let (az, el) = angle_features(&g, 0.5).unwrap();
        assert!(az.abs() < 1e-6 && el.abs() < 1e-6);

        let g = goertzel_matrix(&pre(&[target(10.0, v, PI / 6.0, 0.0)]), 10).unwrap();
        let (az, el) = angle_features(&g, 0.5).unwrap();
        assert!((az - PI / 6.0).abs() < 1e-9 && el.abs() < 1e-3);

        let el_true = -20f64.to_radians();
        let g = goertzel_matrix(&pre(&[target(10.0, v, 0.0, el_true)]), 10).unwrap();
        let (_, el) = angle_features(&g, 0.5).unwrap();
        assert!((el - (-0.349)).abs() < 1e-3);
    }

    #[test]
    fn rms_examples() {
        let g = Array2::from_shape_fn((3, 4), |(a, c)| Complex64::from_polar(2.0, (a + c) as f64));
        assert!((rms_amplitude(&g) - 2.0).abs() < 1e-12);
        assert_eq!(rms_amplitude(&Array2::zeros((3, 4))), 0.0);
        let doubled = g.mapv(|v| v * 2.0);
        assert!((rms_amplitude(&doubled) - 2.0 * rms_amplitude(&g)).abs() < 1e-12);
    }

    #[test]
    fn extract_features_of_a_hand() {
        let cfg = RadarConfig::default();
        let raf = RafConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (az, el) = (15f64.to_radians(), -10f64.to_radians());
        let raw = synth_frame(&cfg, &[target(10.0, 1.0, az, el)], 0.0, &mut rng).unwrap();
        let f = extract_features(raw.view(), &raf, &cfg).unwrap();
        assert_eq!(f.range_bin, 10.0);
        let doppler = cfg.doppler_phase_per_chirp(1.0);
        let close = |got: f64, want: f64| (got - want).abs() <= (0.05 * want.abs()).max(0.02);
        assert!(close(f.doppler_phase, doppler), "{} vs {doppler}", f.doppler_phase);
        assert!(close(f.azimuth, az) && close(f.elevation, el), "{f:?}");

        let pre = preprocess(raw.view());
        let oracle: f64 = (0..3)
            .flat_map(|a| (0..32).map(move |c| (a, c)))
            .map(|(a, c)| naive_dft_bin(pre.chirp(a, c), 10).unwrap().norm_sqr())
            .sum::<f64>()
            / 96.0;
        assert!((f.rms_amplitude - oracle.sqrt()).abs() < 1e-9);

        let again = extract_features(raw.view(), &raf, &cfg).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn noise_only_frame_gives_zero_vector() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw = synth_frame(&cfg, &[], 0.05, &mut rng).unwrap();
        assert!(extract_features(raw.view(), &RafConfig::default(), &cfg).unwrap().is_zero());
        assert!(extract_features(raw.slice(ndarray::s![.., .., ..32]), &RafConfig::default(), &cfg).is_err());
    }

    #[test]
    fn scaler_examples() {
        let rows = [[0.0, 5.0, 0.0, 0.0, 0.0], [2.0, 5.0, 0.0, 0.0, 0.0]];
        let s = FeatureScaler::fit(&rows).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.transform(&rows[0])[0], -1.0);
        assert_eq!(s.transform(&rows[1])[0], 1.0);
        assert_eq!(s.std[1], FeatureScaler::EPSILON);
        assert_eq!(s.transform(&rows[0])[1], 0.0);
        assert!(FeatureScaler::fit(&rows[..1]).is_err());
    }

    #[test]
    fn scaled_training_matrix_is_standard() {
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let rows: Vec<[f64; 5]> = (0..500)
            .map(|_| [next() * 30.0, next() - 0.5, next() * 2.0, -next(), next() * 100.0])
            .collect();
        let s = FeatureScaler::fit(&rows).unwrap();
        let t = s.transform_all(&rows);
        for j in 0..5 {
            let mean = t.iter().map(|r| r[j]).sum::<f64>() / 500.0;
            let var = t.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-6);
        }
        let text = s.to_json().unwrap();
        let back = FeatureScaler::from_json(&text).unwrap();
        assert_eq!(back, s);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["mean"].as_array().unwrap().len(), 5);
        assert_eq!(parsed["std"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn features_csv_round_trip() {
        let rows = vec![
            FeatureRow {
                recording_id: 3,
                frame: 0,
                features: FeatureVector::zero(),
                label: GestureClass::Background,
            },
            FeatureRow {
                recording_id: 3,
                frame: 1,
                features: FeatureVector::from_array([7.0, 0.1 + 0.2, -1.0 / 3.0, 1e-17, 12.5]),
                label: GestureClass::Push,
            },
        ];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "recording_id,frame,range_bin,doppler_phase,azimuth,elevation,rms_amplitude,label\n"
        ));
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let mut again = Vec::new();
        write_features_csv(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }
}
