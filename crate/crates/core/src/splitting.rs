//! The splitting stepper.
//!
//! A scheme composes `p` exactly-solvable subflows once per step in an
//! order chosen by its [`Policy`]. Subflows act on states in place; the
//! stepper checks every intermediate state for non-finite values.

use std::borrow::Cow;
use std::sync::Arc;

use crate::ordering::{Driver, OrderingStream, Permutation};
use crate::{Error, Result};

/// State space of a splitting problem.
pub trait SplitState: Clone + Send + Sync {
    fn is_finite(&self) -> bool;

    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: f64, other: &Self);
}

/// One subflow `S_j(τ)`.
pub trait Flow<S>: Send + Sync {
    fn advance(&self, state: &mut S, tau: f64) -> Result<()>;

    fn name(&self) -> &str {
        "flow"
    }
}

/// The exact (or reference) solution operator `T(t)`.
pub trait Propagator<S>: Send + Sync {
    fn propagate(&self, state: &S, t: f64) -> Result<S>;
}

/// Reference solution sampled on the grid `t_n = n τ`.
pub trait Reference<S: Clone> {
    fn at(&self, n: usize, tau: f64) -> Result<Cow<'_, S>>;
}

/// States stored at `t_k = k · spacing`; serves any `τ` that is an
/// integer multiple of the spacing.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    spacing: f64,
    states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn new(spacing: f64, states: Vec<S>) -> Self {
        Self { spacing, states }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `k` with `value = k · unit`, if `value` is (numerically) an integer
/// multiple of `unit`.
pub(crate) fn integer_ratio(value: f64, unit: f64) -> Option<usize> {
    let ratio = value / unit;
    let k = ratio.round();
    (k >= 0.0 && (ratio - k).abs() <= 1e-9 * k.max(1.0)).then_some(k as usize)
}

impl<S: Clone> Reference<S> for Trajectory<S> {
    fn at(&self, n: usize, tau: f64) -> Result<Cow<'_, S>> {
        let stride = integer_ratio(tau, self.spacing).ok_or_else(|| {
            Error::domain(format!("step {tau} is not a multiple of the reference spacing {}", self.spacing))
        })?;
        self.states
            .get(n * stride)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::domain(format!("reference trajectory ends before t = {}", n as f64 * tau)))
    }
}

/// How the per-step ordering is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    /// The same Lie product every step.
    FixedLie(Permutation),
    /// Symmetric half-step composition.
    Strang,
    /// Fisher–Yates driven by a radical-inverse sequence.
    QuasiRandom { base: u32, offset: u64 },
    /// Fisher–Yates driven by a seeded ChaCha20 stream.
    Randomized { seed: u64, run: u64 },
}

impl Policy {
    pub fn lie(p: usize) -> Self {
        Policy::FixedLie(Permutation::identity(p))
    }

    fn driver(&self) -> Option<Driver> {
        match *self {
            Policy::QuasiRandom { base, offset } => Some(Driver::RadicalInverse { base, offset }),
            Policy::Randomized { seed, run } => Some(Driver::Seeded { seed, run }),
            _ => None,
        }
    }
}

/// `N = ⌈T / τ⌉`. A tiny relative slack keeps `T/τ` that is an integer up
/// to rounding from gaining a spurious extra step.
pub fn step_count(tau: f64, horizon: f64) -> usize {
    let ratio = horizon / tau;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-12 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

pub struct SplittingScheme<S> {
    flows: Vec<Arc<dyn Flow<S>>>,
    policy: Policy,
    tau: f64,
    horizon: f64,
}

impl<S> Clone for SplittingScheme<S> {
    fn clone(&self) -> Self {
        Self { flows: self.flows.clone(), policy: self.policy.clone(), tau: self.tau, horizon: self.horizon }
    }
}

impl<S: SplitState> SplittingScheme<S> {
    pub fn new(flows: Vec<Arc<dyn Flow<S>>>, policy: Policy, tau: f64, horizon: f64) -> Result<Self> {
        let p = flows.len();
        if p == 0 {
            return Err(Error::domain("a splitting scheme needs at least one flow"));
        }
        if !(tau > 0.0) || !(horizon > 0.0) {
            return Err(Error::domain(format!("need τ > 0 and T > 0, got τ = {tau}, T = {horizon}")));
        }
        match &policy {
            Policy::FixedLie(perm) if perm.len() != p => {
                return Err(Error::DimensionMismatch { expected: p, found: perm.len() })
            }
            Policy::Strang | Policy::QuasiRandom { .. } | Policy::Randomized { .. } if p < 2 => {
                return Err(Error::domain(format!("{policy:?} needs at least two flows")))
            }
            _ => {}
        }
        Ok(Self { flows, policy, tau, horizon })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.flows.clone(), self.policy.clone(), tau, self.horizon)
    }

    pub fn with_policy(&self, policy: Policy) -> Result<Self> {
        Self::new(self.flows.clone(), policy, self.tau, self.horizon)
    }

    pub fn p(&self) -> usize {
        self.flows.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn flows(&self) -> &[Arc<dyn Flow<S>>] {
        &self.flows
    }

    pub fn steps(&self) -> usize {
        step_count(self.tau, self.horizon)
    }

    /// Subflow evaluations a full run performs, see [`run`].
    pub fn subflow_evaluations(&self) -> u64 {
        let n = self.steps() as u64;
        let p = self.p() as u64;
        match self.policy {
            Policy::Strang => n * (2 * p - 2),
            _ => n * p,
        }
    }
}

fn advance_checked<S: SplitState>(flow: &dyn Flow<S>, state: &mut S, tau: f64) -> Result<()> {
    flow.advance(state, tau)?;
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step: 0, detail: format!("after subflow `{}`", flow.name()) })
    }
}

/// `S_{π_p}(τ) ··· S_{π_1}(τ)`: flow `π_1` acts first.
pub fn step<S: SplitState>(flows: &[Arc<dyn Flow<S>>], state: &mut S, perm: &Permutation, tau: f64) -> Result<()> {
    if perm.len() != flows.len() {
        return Err(Error::DimensionMismatch { expected: flows.len(), found: perm.len() });
    }
    for j in perm.flow_indices() {
        advance_checked(flows[j].as_ref(), state, tau)?;
    }
    Ok(())
}

/// `S_1(τ/2) ··· S_{p-1}(τ/2) S_p(τ) S_{p-1}(τ/2) ··· S_1(τ/2)`.
pub fn strang_step<S: SplitState>(flows: &[Arc<dyn Flow<S>>], tau: f64, state: &mut S) -> Result<()> {
    let p = flows.len();
    if p < 2 {
        return Err(Error::domain("Strang splitting needs at least two flows"));
    }
    for flow in &flows[..p - 1] {
        advance_checked(flow.as_ref(), state, tau / 2.0)?;
    }
    advance_checked(flows[p - 1].as_ref(), state, tau)?;
    for flow in flows[..p - 1].iter().rev() {
        advance_checked(flow.as_ref(), state, tau / 2.0)?;
    }
    Ok(())
}

/// Errors `||u_n - u(t_n)||` at every grid time, one series per norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrace {
    pub tau: f64,
    pub steps: usize,
    /// `errors[k][n]` is the `k`-th norm of `e_n`, `n = 0..=N`.
    pub errors: Vec<Vec<f64>>,
    pub subflow_evals: u64,
}

impl ErrorTrace {
    /// `max_{0<=n<=N} ||e_n||` in norm `k`.
    pub fn max_error(&self, k: usize) -> f64 {
        self.errors[k].iter().copied().fold(0.0, f64::max)
    }
}

pub type Norm<'a, S> = &'a (dyn Fn(&S) -> f64 + Sync);

fn measure<S: SplitState>(state: &S, reference: &S, norms: &[Norm<'_, S>], out: &mut [Vec<f64>]) {
    let mut diff = state.clone();
    diff.axpy(-1.0, reference);
    for (norm, series) in norms.iter().zip(out.iter_mut()) {
        series.push(norm(&diff));
    }
}

/// Run the scheme from `u0` over `N = ⌈T/τ⌉` steps, recording the error
/// against `reference` after every step.
///
/// Strang runs merge the adjacent `S_1(τ/2)` half steps of consecutive
/// steps into one `S_1(τ)`; the state at each `t_n` is recovered for
/// measurement by closing a copy with `S_1(τ/2)`, which is not counted as
/// a propagation cost. The opening and closing half steps of the whole run
/// are counted together as one evaluation, so the reported cost is
/// `N (2p - 2)`; Lie-type policies cost `N p`.
pub fn run<S: SplitState>(
    scheme: &SplittingScheme<S>,
    u0: &S,
    reference: &dyn Reference<S>,
    norms: &[Norm<'_, S>],
) -> Result<ErrorTrace> {
    if !u0.is_finite() {
        return Err(Error::NonFinite { step: 0, detail: "initial state".into() });
    }
    let n_steps = scheme.steps();
    let tau = scheme.tau;
    let flows = &scheme.flows;
    let mut errors: Vec<Vec<f64>> = norms.iter().map(|_| Vec::with_capacity(n_steps + 1)).collect();
    measure(u0, &*reference.at(0, tau)?, norms, &mut errors);

    let at_step = |n: usize| move |e: Error| match e {
        Error::NonFinite { detail, .. } => Error::NonFinite { step: n, detail },
        other => other,
    };

    let mut state = u0.clone();
    if let Policy::Strang = scheme.policy {
        let p = flows.len();
        let (first, inner) = (&flows[0], &flows[1..]);
        advance_checked(first.as_ref(), &mut state, tau / 2.0).map_err(at_step(0))?;
        for n in 0..n_steps {
            (|| {
                for flow in &inner[..p - 2] {
                    advance_checked(flow.as_ref(), &mut state, tau / 2.0)?;
                }
                advance_checked(inner[p - 2].as_ref(), &mut state, tau)?;
                for flow in inner[..p - 2].iter().rev() {
                    advance_checked(flow.as_ref(), &mut state, tau / 2.0)?;
                }
                let mut closed = state.clone();
                advance_checked(first.as_ref(), &mut closed, tau / 2.0)?;
                measure(&closed, &*reference.at(n + 1, tau)?, norms, &mut errors);
                if n + 1 < n_steps {
                    advance_checked(first.as_ref(), &mut state, tau)?;
                }
                Ok(())
            })()
            .map_err(at_step(n))?;
        }
    } else {
        let mut stream = scheme.policy.driver().map(|d| OrderingStream::new(&d, flows.len())).transpose()?;
        let fixed = match &scheme.policy {
            Policy::FixedLie(perm) => Some(perm.clone()),
            _ => None,
        };
        for n in 0..n_steps {
            let perm = match (&fixed, stream.as_mut()) {
                (Some(perm), _) => perm.clone(),
                (None, Some(s)) => s.next_permutation(),
                (None, None) => unreachable!("non-Strang policies carry an ordering"),
            };
            step(flows, &mut state, &perm, tau).map_err(at_step(n))?;
            measure(&state, &*reference.at(n + 1, tau)?, norms, &mut errors);
        }
    }
    Ok(ErrorTrace { tau, steps: n_steps, errors, subflow_evals: scheme.subflow_evaluations() })
}

/// One row of a local-defect table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectRow {
    pub tau: f64,
    /// `||S⁺(τ)a − T(τ)a − (τ²/2)Φ(a)||`
    pub plus: f64,
    /// `||S⁻(τ)a − T(τ)a + (τ²/2)Φ(a)||`
    pub minus: f64,
    /// `||S⁺(τ)a + S⁻(τ)a − 2T(τ)a||`
    pub symmetric: f64,
}

/// Probe the one-step defect of the two Lie orderings `S⁺ = S_2 S_1` and
/// `S⁻ = S_1 S_2` against `exact`, after removing the predicted leading
/// term `±(τ²/2) Φ(a)`. What remains should scale like `τ³`.
pub fn local_defect_probe<S: SplitState>(
    flows: &[Arc<dyn Flow<S>>],
    exact: &dyn Propagator<S>,
    a: &S,
    taus: &[f64],
    phi: &S,
    norm: Norm<'_, S>,
) -> Result<Vec<DefectRow>> {
    if flows.len() != 2 {
        return Err(Error::domain(format!("local defect probe needs two flows, got {}", flows.len())));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("time steps must be strictly decreasing"));
    }
    let plus_order = Permutation::identity(2);
    let minus_order = Permutation::new(vec![2, 1])?;
    taus.iter()
        .map(|&tau| {
            let exact_state = exact.propagate(a, tau)?;
            let mut plus = a.clone();
            step(flows, &mut plus, &plus_order, tau)?;
            let mut minus = a.clone();
            step(flows, &mut minus, &minus_order, tau)?;

            let mut sym = plus.clone();
            sym.axpy(1.0, &minus);
            sym.axpy(-2.0, &exact_state);

            let lead = 0.5 * tau * tau;
            plus.axpy(-1.0, &exact_state);
            plus.axpy(-lead, phi);
            minus.axpy(-1.0, &exact_state);
            minus.axpy(lead, phi);
            Ok(DefectRow { tau, plus: norm(&plus), minus: norm(&minus), symmetric: norm(&sym) })
        })
        .collect()
}
