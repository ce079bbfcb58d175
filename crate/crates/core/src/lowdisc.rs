//! Radical-inverse sequences and discrepancy diagnostics.
//!
//! Everything here is a pure function of its inputs. Sequence points are
//! indexed from `n = 1`; index zero is rejected rather than mapped to `0.0`.

use crate::{Error, Result};

/// Digit-reversed radix expansion of `n` in `base`, as a point in `[0, 1)`.
///
/// Digits are extracted by integer division and the reversed integer is
/// divided by `base^(digits)` once at the end, so the result is exact for
/// power-of-two bases whenever `n < 2^53`.
pub fn radical_inverse(base: u32, n: u64) -> Result<f64> {
    if base < 2 {
        return Err(Error::domain(format!("radical inverse base must be >= 2, got {base}")));
    }
    if n < 1 {
        return Err(Error::domain("radical inverse index starts at 1"));
    }
    Ok(radical_inverse_unchecked(base as u64, n))
}

fn radical_inverse_unchecked(base: u64, mut n: u64) -> f64 {
    let base_wide = base as u128;
    let mut reversed: u128 = 0;
    let mut denom: u128 = 1;
    while n > 0 {
        reversed = reversed * base_wide + (n % base) as u128;
        denom *= base_wide;
        n /= base;
    }
    let z = reversed as f64 / denom as f64;
    // Both conversions can round for huge indices in non-binary bases.
    if z >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        z
    }
}

/// Base-`R` digits of `n`, least significant first.
pub fn digits(base: u32, mut n: u64) -> Vec<u32> {
    let base = base as u64;
    let mut out = Vec::new();
    while n > 0 {
        out.push((n % base) as u32);
        n /= base;
    }
    out
}

/// Deterministic stream `z_n = φ_R(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadicalInverseSequence {
    base: u32,
    cursor: u64,
}

impl RadicalInverseSequence {
    pub fn new(base: u32) -> Result<Self> {
        Self::with_offset(base, 0)
    }

    /// Sequence whose first emitted point is `z_{offset + 1}`.
    pub fn with_offset(base: u32, offset: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::domain(format!("radical inverse base must be >= 2, got {base}")));
        }
        Ok(Self { base, cursor: offset + 1 })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Index of the next point to be emitted.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// The point `z_n`, independent of the cursor.
    pub fn point(&self, n: u64) -> Result<f64> {
        radical_inverse(self.base, n)
    }
}

impl Iterator for RadicalInverseSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let z = radical_inverse_unchecked(self.base as u64, self.cursor);
        self.cursor += 1;
        Some(z)
    }
}

/// Star discrepancy of a finite point set via the sorted-point formula
/// `max_i max(|x_(i) - i/N|, |x_(i) - (i-1)/N|)`.
pub fn star_discrepancy(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::domain("star discrepancy of an empty point set"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_discrepancy(&sorted))
}

fn sorted_discrepancy(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let upper = (x - (i + 1) as f64 / n).abs();
            let lower = (x - i as f64 / n).abs();
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// Running star discrepancy of a growing prefix `x_1, ..., x_N`.
///
/// Points are kept sorted on insertion so each query is a single linear
/// scan; a full sweep over `N = 1..K` costs `O(K^2)` rather than
/// `O(K^2 log K)`.
#[derive(Debug, Default, Clone)]
pub struct DiscrepancySweep {
    sorted: Vec<f64>,
}

impl DiscrepancySweep {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let at = self.sorted.partition_point(|&y| y <= x);
        self.sorted.insert(at, x);
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn discrepancy(&self) -> Option<f64> {
        (!self.sorted.is_empty()).then(|| sorted_discrepancy(&self.sorted))
    }
}

fn log_constant(base: u32) -> f64 {
    (3.0 * base as f64 - 2.0) / (base as f64).ln()
}

/// Upper bound `(3R-2)/log R · log N / N` on the discrepancy of any `N`
/// consecutive radical-inverse points.
pub fn discrepancy_bound(base: u32, n: usize) -> f64 {
    log_constant(base) * (n as f64).ln() / n as f64
}

/// Upper bound `2(3R-2)/log R · log N` on `max_{n<=N} |S_n|`.
pub fn partial_sum_bound(base: u32, n: usize) -> f64 {
    2.0 * log_constant(base) * (n as f64).ln()
}

/// Upper bound `10(3R-2)/log R · τ log N` on the Wasserstein distance
/// between the paired measures of [`measure_decomposition`].
pub fn wasserstein_bound(base: u32, tau: f64, n: usize) -> f64 {
    10.0 * log_constant(base) * tau * (n as f64).ln()
}

/// `±1` signs from thresholding points at `1/2`, with partial sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSequence {
    signs: Vec<i8>,
    partial_sums: Vec<i64>,
}

impl SignSequence {
    /// Threshold the next `count` points of `seq` (`z >= 1/2` gives `+1`).
    pub fn from_sequence(seq: RadicalInverseSequence, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("sign sequence needs at least one point"));
        }
        Ok(Self::from_signs(
            seq.take(count).map(|z| if z >= 0.5 { 1 } else { -1 }).collect(),
        ))
    }

    /// Build from explicit signs. Panics if any entry is not `±1`.
    pub fn from_signs(signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|&s| s == 1 || s == -1), "signs must be +1 or -1");
        let mut partial_sums = Vec::with_capacity(signs.len() + 1);
        partial_sums.push(0);
        let mut acc = 0i64;
        for &s in &signs {
            acc += s as i64;
            partial_sums.push(acc);
        }
        Self { signs, partial_sums }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `ξ_1, ..., ξ_N`.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `S_0, ..., S_N` with `S_0 = 0`.
    pub fn partial_sums(&self) -> &[i64] {
        &self.partial_sums
    }

    /// `S_N`.
    pub fn total(&self) -> i64 {
        *self.partial_sums.last().unwrap_or(&0)
    }

    pub fn max_abs_partial_sum(&self) -> u64 {
        self.partial_sums.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Convenience wrapper: signs of the first `count` points of base `base`.
pub fn sign_sequence(base: u32, count: usize) -> Result<SignSequence> {
    SignSequence::from_sequence(RadicalInverseSequence::new(base)?, count)
}

/// `(1/N) Σ f(t_k) ξ_k` for sampled values `f(t_1), ..., f(t_N)`.
pub fn weighted_sign_sum(values: &[f64], signs: &SignSequence) -> Result<f64> {
    if values.len() != signs.len() {
        return Err(Error::DimensionMismatch { expected: signs.len(), found: values.len() });
    }
    if values.is_empty() {
        return Err(Error::domain("weighted sign sum over an empty sequence"));
    }
    let sum: f64 = values.iter().zip(&signs.signs).map(|(f, &s)| f * s as f64).sum();
    Ok(sum / values.len() as f64)
}

/// The constant `C_3 = 2(3R-2)/log R · (Lip(f) + ||f||_∞ / T)`.
///
/// Lipschitz constant and sup norm are caller inputs; nothing here tries to
/// estimate them from samples.
pub fn weighted_sum_constant(base: u32, lipschitz: f64, sup_norm: f64, horizon: f64) -> f64 {
    2.0 * log_constant(base) * (lipschitz + sup_norm / horizon)
}

/// The bound `C_3 τ log N` with `τ = T / N`.
pub fn weighted_sum_bound(base: u32, lipschitz: f64, sup_norm: f64, horizon: f64, n: usize) -> f64 {
    let tau = horizon / n as f64;
    weighted_sum_constant(base, lipschitz, sup_norm, horizon) * tau * (n as f64).ln()
}

/// Exact `W_p` between two uniform empirical measures with equal atom
/// counts, via the sorted-sample identity.
pub fn wasserstein_1d(a: &[f64], b: &[f64], order: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(Error::domain("Wasserstein distance between empty measures"));
    }
    if !(order >= 1.0) {
        return Err(Error::domain(format!("Wasserstein order must be >= 1, got {order}")));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mean = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(order)).sum::<f64>() / a.len() as f64;
    Ok(mean.powf(1.0 / order))
}

/// Split of the signed counting measure `Σ ξ_n δ_{t_n}` into
/// `M (μ+ − μ−) + ν_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDecomposition {
    /// Paired time indices `(p_i, m_i)`, `i = 1..M`, 1-based.
    pub pairs: Vec<(usize, usize)>,
    /// Unpaired surplus indices, all carrying the sign of `S_N`.
    pub residual_indices: Vec<usize>,
    /// `|N+ − N−|`.
    pub tv_residual: usize,
    /// `(p, W_p(μ+, μ−))`; empty when one side has no atoms.
    pub wasserstein: Vec<(f64, f64)>,
}

impl MeasureDecomposition {
    /// `M = min(N+, N−)`.
    pub fn paired_mass(&self) -> usize {
        self.pairs.len()
    }

    pub fn plus_support(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn minus_support(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.1)
    }

    pub fn wasserstein(&self, order: f64) -> Option<f64> {
        self.wasserstein.iter().find(|(p, _)| *p == order).map(|(_, w)| *w)
    }
}

/// Pair the i-th positive index with the i-th negative index, collect the
/// surplus, and compute `W_p(μ+, μ−)` exactly on the grid `t_n = n τ`.
pub fn measure_decomposition(signs: &SignSequence, tau: f64, orders: &[f64]) -> Result<MeasureDecomposition> {
    if signs.is_empty() {
        return Err(Error::domain("measure decomposition of an empty sign sequence"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {tau}")));
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, &s) in signs.signs().iter().enumerate() {
        if s > 0 { plus.push(k + 1) } else { minus.push(k + 1) }
    }
    let m = plus.len().min(minus.len());
    let pairs: Vec<(usize, usize)> = plus.iter().copied().zip(minus.iter().copied()).take(m).collect();
    let residual_indices: Vec<usize> = if plus.len() > m { plus[m..].to_vec() } else { minus[m..].to_vec() };
    let tv_residual = residual_indices.len();

    let mut wasserstein = Vec::with_capacity(orders.len());
    if m > 0 {
        let plus_times: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * tau).collect();
        let minus_times: Vec<f64> = pairs.iter().map(|p| p.1 as f64 * tau).collect();
        for &order in orders {
            wasserstein.push((order, wasserstein_1d(&plus_times, &minus_times, order)?));
        }
    }
    Ok(MeasureDecomposition { pairs, residual_indices, tv_residual, wasserstein })
}
