use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::field::{discrete_norm, Field, NormKind};
use super::flows::Velocity;
use super::problem::ACProblem;
use crate::splitting::{integer_ratio, step_count, Propagator, SplitState, Trajectory};
use crate::{Error, Result};

/// Which parts of the right-hand side the reference solver integrates.
/// Switching terms off is a testing aid; experiments use [`Terms::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub diffusion: bool,
    pub reaction: bool,
    pub advection: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { diffusion: true, reaction: true, advection: true };
}

/// `φ_1, φ_2, φ_3` at real `z`; Taylor series near zero where the closed
/// forms cancel badly.
fn phi_functions(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            // φ_m(z) = Σ_j z^j / (j + m)!
            let m = k + 1;
            let mut term = (1..=m).fold(1.0, |acc, i| acc / i as f64);
            let mut sum = term;
            for j in 1..30 {
                term *= z / (j + m) as f64;
                sum += term;
            }
            *slot = sum;
        }
        out
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - z * z / 2.0) / (z * z * z);
        [p1, p2, p3]
    }
}

/// Fourth-order exponential Runge–Kutta (Cox–Matthews ETDRK4) in Fourier
/// space: the heat operator is propagated exactly, the reaction and
/// transport terms by the four-stage exponential quadrature.
#[derive(Debug, Clone)]
pub struct Etdrk4 {
    grid: Arc<super::SpectralGrid>,
    step: f64,
    full: Vec<f64>,
    half: Vec<f64>,
    half_weight: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
    reaction: bool,
    velocity: Option<Arc<Velocity>>,
    dx: Vec<Complex64>,
    dy: Vec<Complex64>,
}

impl Etdrk4 {
    pub fn new(problem: &ACProblem, terms: Terms, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::domain(format!("reference step must be positive, got {step}")));
        }
        let grid = problem.grid().clone();
        let w2 = grid.base_frequency().powi(2);
        let nu = if terms.diffusion { problem.nu } else { 0.0 };
        let len = grid.len();
        let mut s = Self {
            step,
            full: Vec::with_capacity(len),
            half: Vec::with_capacity(len),
            half_weight: Vec::with_capacity(len),
            f1: Vec::with_capacity(len),
            f2: Vec::with_capacity(len),
            f3: Vec::with_capacity(len),
            reaction: terms.reaction,
            velocity: if terms.advection { problem.velocity.clone() } else { None },
            dx: Vec::new(),
            dy: Vec::new(),
            grid: grid.clone(),
        };
        for k2 in grid.squared_wavenumbers() {
            let z = -nu * w2 * k2 * step;
            let [p1, p2, p3] = phi_functions(z);
            let [h1, _, _] = phi_functions(z / 2.0);
            s.full.push(z.exp());
            s.half.push((z / 2.0).exp());
            s.half_weight.push(step / 2.0 * h1);
            s.f1.push(step * (p1 - 3.0 * p2 + 4.0 * p3));
            s.f2.push(step * (p2 - 2.0 * p3));
            s.f3.push(step * (-p2 + 4.0 * p3));
        }
        if s.velocity.is_some() {
            (s.dx, s.dy) = grid.derivative_symbols();
        }
        Ok(s)
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Transform of `u − u³ − v · ∇u` (terms as configured).
    fn nonlinear(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let u = self.grid.inverse(spec);
        let mut out: Vec<f64> =
            if self.reaction { u.iter().map(|u| u - u * u * u).collect() } else { vec![0.0; u.len()] };
        if let Some(v) = &self.velocity {
            let gx = self.grid.inverse(&spec.iter().zip(&self.dx).map(|(c, d)| c * d).collect::<Vec<_>>());
            let gy = self.grid.inverse(&spec.iter().zip(&self.dy).map(|(c, d)| c * d).collect::<Vec<_>>());
            for (i, o) in out.iter_mut().enumerate() {
                *o -= v.vx[i] * gx[i] + v.vy[i] * gy[i];
            }
        }
        self.grid.forward(&out)
    }

    /// One step in Fourier space.
    pub fn advance_spectrum(&self, v: &mut [Complex64]) {
        let nv = self.nonlinear(v);
        let a: Vec<Complex64> = (0..v.len()).map(|k| v[k] * self.half[k] + nv[k] * self.half_weight[k]).collect();
        let na = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..v.len()).map(|k| v[k] * self.half[k] + na[k] * self.half_weight[k]).collect();
        let nb = self.nonlinear(&b);
        let c: Vec<Complex64> =
            (0..v.len()).map(|k| a[k] * self.half[k] + (nb[k] * 2.0 - nv[k]) * self.half_weight[k]).collect();
        let nc = self.nonlinear(&c);
        for k in 0..v.len() {
            v[k] = v[k] * self.full[k] + nv[k] * self.f1[k] + (na[k] + nb[k]) * (2.0 * self.f2[k]) + nc[k] * self.f3[k];
        }
    }

    pub fn advance(&self, field: &Field, steps: usize) -> Result<Field> {
        let mut spec = field.spectrum().to_vec();
        for s in 0..steps {
            self.advance_spectrum(&mut spec);
            if spec.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite { step: s, detail: "reference solver diverged".into() });
            }
        }
        Ok(Field::from_spectrum(self.grid.clone(), spec))
    }
}

/// Reference states on `t_k = k · spacing` up to the horizon, integrated
/// with ETDRK4 at `tau_ref`, which must divide the spacing.
pub fn reference_solve(problem: &ACProblem, terms: Terms, tau_ref: f64, spacing: f64) -> Result<Trajectory<Field>> {
    Ok(solve(problem, terms, tau_ref, spacing, false)?.0)
}

/// As [`reference_solve`], also integrating at `tau_ref / 2` in lockstep
/// and returning the largest discrete L² gap between the two solutions
/// over the sample times.
pub fn reference_with_gate(
    problem: &ACProblem,
    terms: Terms,
    tau_ref: f64,
    spacing: f64,
) -> Result<(Trajectory<Field>, f64)> {
    solve(problem, terms, tau_ref, spacing, true)
}

fn solve(problem: &ACProblem, terms: Terms, tau_ref: f64, spacing: f64, gate: bool) -> Result<(Trajectory<Field>, f64)> {
    let stride = integer_ratio(spacing, tau_ref)
        .filter(|&k| k >= 1)
        .ok_or_else(|| Error::domain(format!("reference step {tau_ref} does not divide the sample spacing {spacing}")))?;
    let samples = step_count(spacing, problem.horizon);
    let coarse = Etdrk4::new(problem, terms, tau_ref)?;
    let fine = if gate { Some(Etdrk4::new(problem, terms, tau_ref / 2.0)?) } else { None };

    let grid = problem.grid().clone();
    let mut states = Vec::with_capacity(samples + 1);
    let mut initial = problem.initial.clone();
    initial.drop_spectrum();
    states.push(initial);
    let mut spec = problem.initial.spectrum().to_vec();
    let mut fine_spec = fine.as_ref().map(|_| spec.clone());
    let mut gap: f64 = 0.0;
    for k in 0..samples {
        for s in 0..stride {
            coarse.advance_spectrum(&mut spec);
            if let (Some(f), Some(fs)) = (&fine, fine_spec.as_mut()) {
                f.advance_spectrum(fs);
                f.advance_spectrum(fs);
            }
            if spec.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite { step: k * stride + s, detail: "reference solver diverged".into() });
            }
        }
        let state = Field::new(grid.clone(), grid.inverse(&spec))?;
        if let Some(fs) = &fine_spec {
            let mut diff = Field::new(grid.clone(), grid.inverse(fs))?;
            diff.axpy(-1.0, &state);
            gap = gap.max(discrete_norm(&diff, NormKind::L2));
        }
        states.push(state);
    }
    Ok((Trajectory::new(spacing, states), gap))
}

/// `T(t)` by ETDRK4 with steps no longer than `max_step`.
#[derive(Debug, Clone)]
pub struct EtdPropagator {
    problem: ACProblem,
    terms: Terms,
    max_step: f64,
}

impl EtdPropagator {
    pub fn new(problem: ACProblem, terms: Terms, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) {
            return Err(Error::domain(format!("maximum step must be positive, got {max_step}")));
        }
        Ok(Self { problem, terms, max_step })
    }
}

impl Propagator<Field> for EtdPropagator {
    fn propagate(&self, state: &Field, t: f64) -> Result<Field> {
        if t < 0.0 {
            return Err(Error::domain(format!("cannot propagate backwards, t = {t}")));
        }
        if t == 0.0 {
            return Ok(state.clone());
        }
        let steps = (t / self.max_step).ceil().max(1.0) as usize;
        Etdrk4::new(&self.problem, self.terms, t / steps as f64)?.advance(state, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allencahn::flows::reaction_flow;
    use crate::allencahn::grid::SpectralGrid;
    use crate::harness::fit_slope;
    use crate::splitting::Reference;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn phi_functions_agree_across_the_switch() {
        for z in [-0.999_999, -1.000_001, 0.999_999, 1.000_001] {
            let series = {
                let mut out = [0.0; 3];
                let mut fact = 1.0;
                for m in 1..=3 {
                    fact *= m as f64;
                    out[m - 1] = (0..40)
                        .scan(1.0 / fact, |term, j| {
                            let cur = *term;
                            *term *= z / (j + m + 1) as f64;
                            Some(cur)
                        })
                        .sum();
                }
                out
            };
            let got = phi_functions(z);
            for m in 0..3 {
                assert!((got[m] - series[m]).abs() < 1e-13, "z = {z}, φ{}", m + 1);
            }
        }
        let [p1, p2, p3] = phi_functions(0.0);
        assert_eq!((p1, p2), (1.0, 0.5));
        assert!((p3 - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn pure_heat_limit() {
        let grid = Arc::new(SpectralGrid::torus(32).unwrap());
        let u0 = Field::from_fn(grid.clone(), |x, _| x.sin());
        let p = ACProblem::new(1.0, 1.0, None, u0).unwrap();
        let heat_only = Terms { diffusion: true, reaction: false, advection: false };
        let traj = reference_solve(&p, heat_only, 1.0 / 64.0, 0.25).unwrap();
        for (k, state) in traj.states().iter().enumerate() {
            let t = k as f64 * 0.25;
            let expected = Field::from_fn(grid.clone(), |x, _| (-t).exp() * x.sin());
            assert!(max_diff(state, &expected) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn pure_reaction_limit() {
        let p = ACProblem::standard(16, true).unwrap();
        let reaction_only = Terms { diffusion: false, reaction: true, advection: false };
        let traj = reference_solve(&p, reaction_only, 1.0 / 256.0, 0.5).unwrap();
        for (k, state) in traj.states().iter().enumerate() {
            let expected = reaction_flow(&p.initial, k as f64 * 0.5).unwrap();
            assert!(max_diff(state, &expected) < 1e-8);
        }
    }

    #[test]
    fn fourth_order_in_time() {
        let mut p = ACProblem::standard(32, true).unwrap();
        p.horizon = 0.25;
        let exact = reference_solve(&p, Terms::ALL, 2f64.powi(-13), 0.25).unwrap().states()[1].clone();
        let pts: Vec<(f64, f64)> = (6..=10)
            .map(|q| {
                let tau = 2f64.powi(-q);
                let mut d = reference_solve(&p, Terms::ALL, tau, 0.25).unwrap().states()[1].clone();
                d.axpy(-1.0, &exact);
                (tau, discrete_norm(&d, NormKind::L2))
            })
            .collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((3.6..=4.4).contains(&fit.slope), "slope {} from {pts:?}", fit.slope);
    }

    #[test]
    fn gate_measures_step_halving_gap() {
        let mut p = ACProblem::standard(32, false).unwrap();
        p.horizon = 0.125;
        let (traj, gap) = reference_with_gate(&p, Terms::ALL, 2f64.powi(-9), 2f64.powi(-5)).unwrap();
        assert_eq!(traj.len(), 5);
        assert!(gap > 0.0 && gap < 1e-8, "gap {gap}");
        let plain = reference_solve(&p, Terms::ALL, 2f64.powi(-9), 2f64.powi(-5)).unwrap();
        assert_eq!(plain.states(), traj.states());
        assert!(traj.at(2, 2f64.powi(-4)).is_ok());
        assert!(reference_solve(&p, Terms::ALL, 0.3, 2f64.powi(-5)).is_err());
    }

    #[test]
    fn propagator_matches_reference_solve() {
        let mut p = ACProblem::standard(16, false).unwrap();
        p.horizon = 0.0625;
        let traj = reference_solve(&p, Terms::ALL, 2f64.powi(-10), 0.0625).unwrap();
        let prop = EtdPropagator::new(p.clone(), Terms::ALL, 2f64.powi(-10)).unwrap();
        let out = prop.propagate(&p.initial, 0.0625).unwrap();
        assert!(max_diff(&out, &traj.states()[1]) < 1e-13);
        assert_eq!(prop.propagate(&p.initial, 0.0).unwrap(), p.initial);
    }
}
