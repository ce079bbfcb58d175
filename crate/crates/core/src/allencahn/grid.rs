use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Uniform periodic `n × n` grid on `[0, L)²` with 2D FFTs.
///
/// Values are stored row-major, `idx = iy * n + ix`. The forward
/// transform is unnormalized and the inverse divides by `n²`; spectra use
/// the same layout with integer wavenumbers `k ∈ {−n/2, …, n/2 − 1}`.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::domain(format!("grid size must be a power of two >= 4, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::domain(format!("domain length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(Self { n, length, forward, inverse, scratch_len })
    }

    /// `n × n` on `[0, 2π)²`.
    pub fn torus(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// `2π / L`, the angular frequency of wavenumber 1.
    pub fn base_frequency(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Signed wavenumber of spectral index `i`; index `n/2` maps to `−n/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wavenumber used for odd derivatives: the Nyquist mode has no
    /// real-valued derivative and is dropped.
    pub fn derivative_wavenumber(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.wavenumber(i) as f64
        }
    }

    /// `|k|²` (integer wavenumbers, Nyquist kept) for every spectral index.
    pub fn squared_wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|idx| {
                let (kx, ky) = (self.wavenumber(idx % n) as f64, self.wavenumber(idx / n) as f64);
                kx * kx + ky * ky
            })
            .collect()
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
        fft.process_with_scratch(data, &mut scratch);
        self.transpose(data);
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, self.forward.as_ref());
        data
    }

    /// Inverse transform; returns the real part. The imaginary part of a
    /// spectrum obtained from real data is round-off only.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(spectrum.to_vec()).into_iter().map(|c| c.re).collect()
    }

    pub fn inverse_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        debug_assert_eq!(data.len(), self.len());
        self.transform(&mut data, self.inverse.as_ref());
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// `∂_x` and `∂_y` multipliers `i (2π/L) k` for every spectral index.
    pub fn derivative_symbols(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let w = self.base_frequency();
        (0..n * n)
            .map(|idx| {
                (
                    Complex64::new(0.0, w * self.derivative_wavenumber(idx % n)),
                    Complex64::new(0.0, w * self.derivative_wavenumber(idx / n)),
                )
            })
            .unzip()
    }
}
