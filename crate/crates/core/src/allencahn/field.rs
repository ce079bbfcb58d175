use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;

use super::grid::SpectralGrid;
use crate::splitting::SplitState;
use crate::{Error, Result};

/// Real grid function with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.grid.n() == other.grid.n() && self.grid.length() == other.grid.length()
    }
}

impl Field {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(grid: Arc<SpectralGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let values = (0..grid.len()).map(|idx| f(grid.coordinate(idx % n), grid.coordinate(idx / n))).collect();
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn constant(grid: Arc<SpectralGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn zeros(grid: Arc<SpectralGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub(crate) fn from_spectrum(grid: Arc<SpectralGrid>, spectrum: Vec<Complex64>) -> Self {
        let values = grid.inverse(&spectrum);
        Self { grid, values, spectrum: OnceLock::from(spectrum) }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access; drops the cached spectrum.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Forget the cached spectrum, e.g. before storing many snapshots.
    pub fn drop_spectrum(&mut self) {
        self.spectrum = OnceLock::new();
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect(), spectrum: OnceLock::new() }
    }

    fn with_multiplier(&self, symbol: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let spec: Vec<Complex64> = self.spectrum().iter().enumerate().map(|(idx, c)| c * symbol(idx)).collect();
        self.grid.inverse(&spec)
    }

    /// Spectral `(∂_x u, ∂_y u)`.
    pub fn gradient(&self) -> (Vec<f64>, Vec<f64>) {
        let (dx, dy) = self.grid.derivative_symbols();
        (self.with_multiplier(|i| dx[i]), self.with_multiplier(|i| dy[i]))
    }

    /// Spectral `Δu`.
    pub fn laplacian(&self) -> Vec<f64> {
        let k2 = self.grid.squared_wavenumbers();
        let w2 = self.grid.base_frequency().powi(2);
        self.with_multiplier(|i| Complex64::new(-w2 * k2[i], 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl SplitState for Field {
    fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.values.len(), other.values.len(), "fields live on different grids");
        self.values_mut().iter_mut().zip(&other.values).for_each(|(a, b)| *a += alpha * b);
    }
}

/// Discrete norms of grid functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `(Σ |e|² Δx Δy)^{1/2}`.
    L2,
    /// `(Σ (|e|² + |∂_x e|² + |∂_y e|²) Δx Δy)^{1/2}`, derivatives spectral.
    W12,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::W12 => "w12",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(NormKind::L2),
            "w12" | "h1" => Ok(NormKind::W12),
            other => Err(Error::config(format!("unknown norm `{other}` (expected l2 or w12)"))),
        }
    }
}

/// The derivative energy uses Parseval on the spectrum, which equals the
/// pointwise sum of spectrally differentiated values exactly.
pub fn discrete_norm(field: &Field, kind: NormKind) -> f64 {
    let grid = field.grid();
    let cell = grid.spacing() * grid.spacing();
    match kind {
        NormKind::L2 => (field.values().iter().map(|v| v * v).sum::<f64>() * cell).sqrt(),
        NormKind::W12 => {
            let n = grid.n();
            let w2 = grid.base_frequency().powi(2);
            let energy: f64 = field
                .spectrum()
                .iter()
                .enumerate()
                .map(|(idx, c)| {
                    let (kx, ky) = (grid.derivative_wavenumber(idx % n), grid.derivative_wavenumber(idx / n));
                    (1.0 + w2 * (kx * kx + ky * ky)) * c.norm_sqr()
                })
                .sum();
            (energy / grid.len() as f64 * cell).sqrt()
        }
    }
}
