//! Signal-processing kernels shared by the RAF and FFT pipelines.

use std::f64::consts::PI;

use ndarray::{Array3, ArrayView3, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A single DFT coefficient.
pub type ComplexCoefficient = Complex64;

/// A frame after clutter removal and min-max scaling, `[antenna][chirp][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedFrame(Array3<f64>);

impl PreprocessedFrame {
    pub fn values(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.0.view()
    }

    pub fn n_antennas(&self) -> usize {
        self.0.len_of(Axis(0))
    }

    pub fn n_chirps(&self) -> usize {
        self.0.len_of(Axis(1))
    }

    pub fn n_samples(&self) -> usize {
        self.0.len_of(Axis(2))
    }

    pub fn chirp(&self, antenna: usize, chirp: usize) -> &[f64] {
        let offset = (antenna * self.n_chirps() + chirp) * self.n_samples();
        &self.0.as_slice().expect("standard layout")[offset..offset + self.n_samples()]
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.0
    }
}

/// Wraps a phase into `(-pi, pi]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let wrapped = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Removes the fast-time mean of every chirp, then the slow-time mean of
/// every sample index, per antenna.
pub fn mti_mean_removal(frame: ArrayView3<'_, f64>) -> Array3<f64> {
    let mut out = frame.to_owned();
    for mut antenna in out.axis_iter_mut(Axis(0)) {
        for mut chirp in antenna.axis_iter_mut(Axis(0)) {
            let mean = chirp.sum() / chirp.len() as f64;
            chirp.mapv_inplace(|v| v - mean);
        }
        let n_chirps = antenna.len_of(Axis(0)) as f64;
        for mut column in antenna.axis_iter_mut(Axis(1)) {
            let mean = column.sum() / n_chirps;
            column.mapv_inplace(|v| v - mean);
        }
    }
    out
}

/// Scales the whole frame (all antennas jointly) into `[0, 1]`. A constant
/// frame maps to zeros.
pub fn minmax_normalize(frame: Array3<f64>) -> PreprocessedFrame {
    let (lo, hi) = frame
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut frame = frame.as_standard_layout().into_owned();
    if span > 0.0 && span.is_finite() {
        frame.mapv_inplace(|v| (v - lo) / span);
    } else {
        frame.fill(0.0);
    }
    PreprocessedFrame(frame)
}

pub fn preprocess(frame: ArrayView3<'_, f64>) -> PreprocessedFrame {
    minmax_normalize(mti_mean_removal(frame))
}

fn check_bin(bin: usize, len: usize) -> Result<()> {
    if bin >= len {
        return Err(Error::BinOutOfRange { bin, len });
    }
    Ok(())
}

/// Evaluates DFT bin `bin` of a real sequence with the Goertzel recursion.
pub fn goertzel(samples: &[f64], bin: usize) -> Result<ComplexCoefficient> {
    let n = samples.len();
    check_bin(bin, n)?;
    let omega = 2.0 * PI * bin as f64 / n as f64;
    let coeff = 2.0 * omega.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in samples {
        let s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    // e^{j omega N} = 1 for an integer bin, so this is exactly X[k]
    Ok(Complex64::from_polar(1.0, omega) * s1 - s2)
}

/// Direct-summation DFT coefficient.
pub fn naive_dft_bin(samples: &[f64], bin: usize) -> Result<ComplexCoefficient> {
    let n = samples.len();
    check_bin(bin, n)?;
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            // reduce k*n mod N first so the angle stays small
            let phase = -2.0 * PI * ((bin * i) % n) as f64 / n as f64;
            Complex64::from_polar(x, phase)
        })
        .sum())
}

/// In-place iterative radix-2 FFT (forward: `e^{-j...}`).
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64);
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(())
}

pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut data = input.to_vec();
    fft_in_place(&mut data, false)?;
    Ok(data)
}

pub fn ifft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut data = input.to_vec();
    fft_in_place(&mut data, true)?;
    Ok(data)
}

/// Range FFT of one chirp, keeping the `N/2` positive-frequency bins.
pub fn range_fft(chirp: &[f64]) -> Result<Vec<Complex64>> {
    let mut data: Vec<Complex64> = chirp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut data, false)?;
    data.truncate(chirp.len() / 2);
    Ok(data)
}

/// Doppler FFT across slow time of one range bin.
pub fn doppler_fft(coefficients: &[Complex64]) -> Result<Vec<Complex64>> {
    fft(coefficients)
}

/// Converts an inter-element phase difference into an arrival angle.
pub fn monopulse_angle(phase_diff: f64, spacing_wavelengths: f64) -> f64 {
    let arg = phase_diff / (2.0 * PI * spacing_wavelengths);
    arg.clamp(-1.0, 1.0).asin()
}
