//! Bounded linear backend: `u' = (A_1 + ... + A_p) u` with dense real
//! matrices, exact matrix-exponential subflows, commutators and the BCH
//! one-step defect.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::splitting::{Flow, Propagator, SplitState, Trajectory};
use crate::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type StateVector = DVector<f64>;

/// Stream label for problem generation; disjoint from the ordering streams.
const PROBLEM_STREAM: u64 = 1;
const MAX_REDRAWS: usize = 100;
const COMMUTATOR_THRESHOLD: f64 = 1e-8;

impl SplitState for DVector<f64> {
    fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        nalgebra::Matrix::axpy(self, alpha, other, 1.0);
    }
}

fn check_square(a: &DenseMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    Ok(a.nrows())
}

fn check_finite(a: &DenseMatrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("matrix has non-finite entries"))
    }
}

fn one_norm(a: &DenseMatrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

// Higham (2005) Padé coefficients and 1-norm thresholds.
const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, &[f64]); 4] = [
    (1.495585217958292e-2, &PADE_3),
    (2.53939833006323e-1, &PADE_5),
    (9.504178996162932e-1, &PADE_7),
    (2.097847961257068e0, &PADE_9),
];
const THETA_13: f64 = 5.371920351148152;

fn pade_solve(u: DenseMatrix, v: DenseMatrix) -> Result<DenseMatrix> {
    (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or_else(|| Error::domain("singular Padé denominator in matrix exponential"))
}

fn pade_low(a: &DenseMatrix, b: &[f64]) -> Result<DenseMatrix> {
    let m = a.nrows();
    let a2 = a * a;
    let mut odd = DenseMatrix::identity(m, m) * b[1];
    let mut even = DenseMatrix::identity(m, m) * b[0];
    let mut power = DenseMatrix::identity(m, m);
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        odd += &power * b[2 * k + 1];
        even += &power * b[2 * k];
    }
    pade_solve(a * odd, even)
}

fn pade_13(a: &DenseMatrix) -> Result<DenseMatrix> {
    let b = &PADE_13;
    let m = a.nrows();
    let id = DenseMatrix::identity(m, m);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

/// `e^{tA}` by scaling and squaring with Padé approximants of degree
/// 3, 5, 7, 9 or 13 chosen from the 1-norm of `tA`.
pub fn expm(a: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    check_square(a)?;
    check_finite(a)?;
    if !t.is_finite() {
        return Err(Error::domain(format!("non-finite exponential time {t}")));
    }
    let scaled = a * t;
    let norm = one_norm(&scaled);
    for (theta, coeffs) in THETA {
        if norm <= theta {
            return pade_low(&scaled, coeffs);
        }
    }
    let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let mut r = pade_13(&(scaled * 2f64.powi(-squarings)))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// `AB − BA`.
pub fn commutator(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    check_square(a)?;
    Ok(a * b - b * a)
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

/// One-step Lie defect `e^{τA₂} e^{τA₁} − e^{τ(A₁+A₂)}` and its Taylor
/// prediction through third order.
#[derive(Debug, Clone)]
pub struct BchDefect {
    pub defect: DenseMatrix,
    /// `(τ²/2)[B, C]` with `B = A₂`, `C = A₁`.
    pub second_order: DenseMatrix,
    /// `(τ³/12)([B,[B,C]] − [C,[B,C]]) + (τ³/4)((B+C)[B,C] + [B,C](B+C))`.
    pub third_order: DenseMatrix,
}

impl BchDefect {
    pub fn prediction(&self) -> DenseMatrix {
        &self.second_order + &self.third_order
    }

    /// What is left after removing both predicted terms; `O(τ⁴)`.
    pub fn residual(&self) -> DenseMatrix {
        &self.defect - self.prediction()
    }
}

/// The operand order matches `S⁺ = S₂ S₁` acting on states: `A₁` acts
/// first, so the product is `e^{τA₂} e^{τA₁}`.
///
/// The third-order term is the full `τ³` coefficient of the difference.
/// Nested commutators alone only account for part of it; the symmetric
/// product `{B + C, [B, C]}` contributes as well because the comparison is
/// against `e^{τ(B+C)}` rather than against the BCH exponent.
pub fn bch_defect(a1: &DenseMatrix, a2: &DenseMatrix, tau: f64) -> Result<BchDefect> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {tau}")));
    }
    let (b, c) = (a2, a1);
    let k = commutator(b, c)?;
    let sum = b + c;
    let defect = expm(b, tau)? * expm(c, tau)? - expm(&sum, tau)?;
    let second_order = &k * (0.5 * tau * tau);
    let nested = commutator(b, &k)? - commutator(c, &k)?;
    let symmetric = &sum * &k + &k * &sum;
    let third_order = nested * (tau.powi(3) / 12.0) + symmetric * (tau.powi(3) / 4.0);
    Ok(BchDefect { defect, second_order, third_order })
}

/// `u' = Σ A_j u`, `u(0) = u0` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub matrices: Vec<DenseMatrix>,
    pub u0: StateVector,
    pub horizon: f64,
    /// Rejected draws before this instance was accepted.
    pub redraws: usize,
}

impl LinearProblem {
    pub fn from_parts(matrices: Vec<DenseMatrix>, u0: StateVector, horizon: f64) -> Result<Self> {
        let m = u0.len();
        if matrices.is_empty() {
            return Err(Error::domain("linear problem needs at least one matrix"));
        }
        for a in &matrices {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::DimensionMismatch { expected: m, found: a.nrows().max(a.ncols()) });
            }
            check_finite(a)?;
        }
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { matrices, u0, horizon, redraws: 0 })
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn p(&self) -> usize {
        self.matrices.len()
    }

    pub fn generator(&self) -> DenseMatrix {
        self.matrices.iter().fold(DenseMatrix::zeros(self.dim(), self.dim()), |acc, a| acc + a)
    }

    /// Largest pairwise `||[A_i, A_j]||_F`.
    pub fn max_commutator_norm(&self) -> f64 {
        max_commutator_norm(&self.matrices)
    }

    /// Subflows `S_j(τ) = e^{τA_j}` with exponentials precomputed for the
    /// given step sizes.
    pub fn flows(&self, steps: &[f64]) -> Result<Vec<Arc<dyn Flow<StateVector>>>> {
        self.matrices
            .iter()
            .map(|a| Ok(Arc::new(MatrixFlow::with_steps(a.clone(), steps)?) as Arc<dyn Flow<StateVector>>))
            .collect()
    }

    /// Leading one-step defect coefficient of `S⁺ = e^{τA₂}e^{τA₁}`:
    /// `Φ(v) = [A₂, A₁] v`.
    pub fn phi(&self, v: &StateVector) -> Result<StateVector> {
        if self.p() != 2 {
            return Err(Error::domain("Φ is defined for two-operator problems"));
        }
        Ok(commutator(&self.matrices[1], &self.matrices[0])? * v)
    }

    pub fn propagator(&self) -> ExactFlow {
        ExactFlow { generator: self.generator() }
    }
}

fn max_commutator_norm(mats: &[DenseMatrix]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            best = best.max((&mats[i] * &mats[j] - &mats[j] * &mats[i]).norm());
        }
    }
    best
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, m: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng))
}

/// Random problem: Gaussian matrices rescaled to `||A_j||₂ <= 1`, redrawn
/// while every pairwise commutator is below `1e-8` in Frobenius norm, and
/// a unit-norm Gaussian initial vector. `T = 1`.
pub fn generate_problem(m: usize, p: usize, seed: u64) -> Result<LinearProblem> {
    generate_with(m, p, seed, |rng, _attempt| (0..p).map(|_| gaussian_matrix(rng, m)).collect())
}

pub(crate) fn generate_with(
    m: usize,
    p: usize,
    seed: u64,
    mut draw: impl FnMut(&mut ChaCha20Rng, usize) -> Vec<DenseMatrix>,
) -> Result<LinearProblem> {
    if m < 2 || p < 2 {
        return Err(Error::domain(format!("need m >= 2 and p >= 2, got m = {m}, p = {p}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(PROBLEM_STREAM);
    for attempt in 0..=MAX_REDRAWS {
        let matrices: Vec<DenseMatrix> = draw(&mut rng, attempt)
            .into_iter()
            .map(|a| {
                let scale = spectral_norm(&a).max(1.0);
                a / scale
            })
            .collect();
        if max_commutator_norm(&matrices) < COMMUTATOR_THRESHOLD {
            continue;
        }
        let raw: StateVector = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let u0 = &raw / raw.norm();
        return Ok(LinearProblem { matrices, u0, horizon: 1.0, redraws: attempt });
    }
    Err(Error::RejectionExhausted(MAX_REDRAWS))
}

/// `u(t) = e^{t Σ A_j} u0`.
pub fn exact_flow(problem: &LinearProblem, t: f64, u0: &StateVector) -> Result<StateVector> {
    if t < 0.0 {
        return Err(Error::domain(format!("exact flow needs t >= 0, got {t}")));
    }
    Ok(expm(&problem.generator(), t)? * u0)
}

/// Exact solution at `t_n = n τ`, `n = 0..=steps`, each from its own
/// exponential so no propagation error accumulates.
pub fn exact_trajectory(problem: &LinearProblem, tau: f64, steps: usize) -> Result<Trajectory<StateVector>> {
    let generator = problem.generator();
    let states = (0..=steps)
        .map(|n| Ok(expm(&generator, n as f64 * tau)? * &problem.u0))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::new(tau, states))
}

/// `T(t) = e^{tG}` for a fixed generator.
#[derive(Debug, Clone)]
pub struct ExactFlow {
    generator: DenseMatrix,
}

impl Propagator<StateVector> for ExactFlow {
    fn propagate(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        Ok(expm(&self.generator, t)? * state)
    }
}

/// `S(τ) = e^{τA}` with a table of precomputed exponentials; other step
/// sizes are computed on demand.
#[derive(Debug, Clone)]
pub struct MatrixFlow {
    generator: DenseMatrix,
    table: Vec<(u64, DenseMatrix)>,
}

impl MatrixFlow {
    pub fn new(generator: DenseMatrix) -> Self {
        Self { generator, table: Vec::new() }
    }

    pub fn with_steps(generator: DenseMatrix, steps: &[f64]) -> Result<Self> {
        let table = steps
            .iter()
            .map(|&tau| Ok((tau.to_bits(), expm(&generator, tau)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { generator, table })
    }

    pub fn generator(&self) -> &DenseMatrix {
        &self.generator
    }
}

impl Flow<StateVector> for MatrixFlow {
    fn advance(&self, state: &mut StateVector, tau: f64) -> Result<()> {
        if state.len() != self.generator.ncols() {
            return Err(Error::DimensionMismatch { expected: self.generator.ncols(), found: state.len() });
        }
        let bits = tau.to_bits();
        *state = match self.table.iter().find(|(b, _)| *b == bits) {
            Some((_, e)) => e * &*state,
            None => expm(&self.generator, tau)? * &*state,
        };
        Ok(())
    }

    fn name(&self) -> &str {
        "matrix-exponential"
    }
}
