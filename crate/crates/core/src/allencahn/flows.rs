use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::field::Field;
use super::grid::SpectralGrid;
use crate::splitting::Flow;
use crate::{Error, Result};

/// A velocity field sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl Velocity {
    /// `v(x, y) = (−amplitude · sin y, 0)`.
    pub fn shear(grid: &SpectralGrid, amplitude: f64) -> Self {
        let n = grid.n();
        let vx = (0..grid.len()).map(|idx| -amplitude * grid.coordinate(idx / n).sin()).collect();
        Self { vx, vy: vec![0.0; grid.len()] }
    }

    pub fn uniform(grid: &SpectralGrid, cx: f64, cy: f64) -> Self {
        Self { vx: vec![cx; grid.len()], vy: vec![cy; grid.len()] }
    }

    /// `v · ∇w`, gradient spectral.
    pub fn transport(&self, w: &Field) -> Vec<f64> {
        let (dx, dy) = w.gradient();
        self.vx.iter().zip(&self.vy).zip(dx.iter().zip(&dy)).map(|((vx, vy), (gx, gy))| vx * gx + vy * gy).collect()
    }
}

/// Exact heat flow: coefficient `k` is multiplied by `exp(−ν (2π/L)² |k|² τ)`.
pub fn heat_flow(field: &Field, nu: f64, tau: f64) -> Result<Field> {
    if tau < 0.0 {
        return Err(Error::domain(format!("heat flow needs τ >= 0, got {tau}")));
    }
    let grid = field.grid();
    let rate = nu * grid.base_frequency().powi(2) * tau;
    let k2 = grid.squared_wavenumbers();
    let spec: Vec<Complex64> = field.spectrum().iter().zip(&k2).map(|(c, k)| c * (-rate * k).exp()).collect();
    Ok(Field::from_spectrum(grid.clone(), spec))
}

/// Closed-form flow of `w' = w − w³`: `w / sqrt(w² + (1 − w²) e^{−2τ})`.
pub fn reaction_flow(field: &Field, tau: f64) -> Result<Field> {
    let decay = (-2.0 * tau).exp();
    let n = field.grid().n();
    let mut out = field.clone();
    for (idx, v) in out.values_mut().iter_mut().enumerate() {
        let w = *v;
        *v = w / (w * w + (1.0 - w * w) * decay).sqrt();
        if !v.is_finite() {
            return Err(Error::NonFinite {
                step: 0,
                detail: format!("reaction flow at grid point ({}, {}) from w = {w}, τ = {tau}", idx % n, idx / n),
            });
        }
    }
    Ok(out)
}

fn transport_rate(velocity: &Velocity, w: &Field) -> Vec<f64> {
    velocity.transport(w).into_iter().map(|t| -t).collect()
}

/// `∂_t w = −v · ∇w` by classical RK4 with `substeps` steps of `τ/substeps`.
pub fn advection_flow(field: &Field, velocity: &Velocity, tau: f64, substeps: usize) -> Result<Field> {
    if substeps == 0 {
        return Err(Error::domain("advection needs at least one RK4 substep"));
    }
    let grid = field.grid().clone();
    let h = tau / substeps as f64;
    let stage = |base: &Field, k: &[f64], scale: f64| -> Field {
        let values = base.values().iter().zip(k).map(|(b, k)| b + scale * k).collect();
        Field::new(grid.clone(), values).expect("stage lives on the same grid")
    };
    let mut w = field.clone();
    for _ in 0..substeps {
        let k1 = transport_rate(velocity, &w);
        let k2 = transport_rate(velocity, &stage(&w, &k1, h / 2.0));
        let k3 = transport_rate(velocity, &stage(&w, &k2, h / 2.0));
        let k4 = transport_rate(velocity, &stage(&w, &k3, h));
        for (i, v) in w.values_mut().iter_mut().enumerate() {
            *v += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(idx) = w.values().iter().position(|v| !v.is_finite()) {
            let n = grid.n();
            return Err(Error::NonFinite {
                step: 0,
                detail: format!("advection blew up at grid point ({}, {}); try more substeps", idx % n, idx / n),
            });
        }
    }
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct HeatFlow {
    pub nu: f64,
}

impl Flow<Field> for HeatFlow {
    fn advance(&self, state: &mut Field, tau: f64) -> Result<()> {
        *state = heat_flow(state, self.nu, tau)?;
        Ok(())
    }

    fn name(&self) -> &str {
        "diffusion"
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReactionFlow;

impl Flow<Field> for ReactionFlow {
    fn advance(&self, state: &mut Field, tau: f64) -> Result<()> {
        *state = reaction_flow(state, tau)?;
        Ok(())
    }

    fn name(&self) -> &str {
        "reaction"
    }
}

#[derive(Debug, Clone)]
pub struct AdvectionFlow {
    pub velocity: Arc<Velocity>,
    pub substeps: usize,
}

impl Flow<Field> for AdvectionFlow {
    fn advance(&self, state: &mut Field, tau: f64) -> Result<()> {
        *state = advection_flow(state, &self.velocity, tau, self.substeps)?;
        Ok(())
    }

    fn name(&self) -> &str {
        "advection"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allencahn::field::{discrete_norm, NormKind};
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::torus(n).unwrap())
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn rk4_scalar(w0: f64, t: f64, steps: usize) -> f64 {
        let f = |w: f64| w - w * w * w;
        let h = t / steps as f64;
        (0..steps).fold(w0, |w, _| {
            let k1 = f(w);
            let k2 = f(w + h / 2.0 * k1);
            let k3 = f(w + h / 2.0 * k2);
            let k4 = f(w + h * k3);
            w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        })
    }

    #[test]
    fn heat_examples() {
        let g = grid(32);
        let c = Field::constant(g.clone(), 1.7);
        assert!(max_diff(&heat_flow(&c, 1.0, 0.3).unwrap(), &c) < 1e-14);

        let tau: f64 = 0.37;
        let s = Field::from_fn(g.clone(), |x, _| x.sin());
        let expected = Field::from_fn(g.clone(), |x, _| (-tau).exp() * x.sin());
        assert!(max_diff(&heat_flow(&s, 1.0, tau).unwrap(), &expected) < 1e-14);

        let two = Field::from_fn(g.clone(), |x, y| x.sin() + (2.0 * y).cos());
        let expected = Field::from_fn(g.clone(), |x, y| (-tau).exp() * x.sin() + (-4.0 * tau).exp() * (2.0 * y).cos());
        assert!(max_diff(&heat_flow(&two, 1.0, tau).unwrap(), &expected) < 1e-14);
        assert!(heat_flow(&two, 1.0, -0.1).is_err());
    }

    #[test]
    fn heat_on_a_longer_domain() {
        let g = Arc::new(SpectralGrid::new(32, 4.0).unwrap());
        let w = 2.0 * std::f64::consts::PI / 4.0;
        let s = Field::from_fn(g.clone(), |x, _| (w * x).sin());
        let expected = Field::from_fn(g.clone(), |x, _| (-0.5 * w * w * 0.2).exp() * (w * x).sin());
        assert!(max_diff(&heat_flow(&s, 0.5, 0.2).unwrap(), &expected) < 1e-14);
    }

    #[test]
    fn heat_conserves_mean_and_composes() {
        let g = grid(32);
        let f = Field::from_fn(g.clone(), |x, y| 1.0 + 0.5 * x.sin() + (0.7 * y.sin()).exp());
        let once = heat_flow(&f, 1.0, 0.2).unwrap();
        assert!((once.mean() - f.mean()).abs() < 1e-13);
        let twice = heat_flow(&heat_flow(&f, 1.0, 0.1).unwrap(), 1.0, 0.1).unwrap();
        assert!(max_diff(&once, &twice) < 1e-12);
    }

    #[test]
    fn reaction_examples() {
        let g = grid(8);
        for c in [0.0, 1.0, -1.0] {
            let f = Field::constant(g.clone(), c);
            assert_eq!(reaction_flow(&f, 0.7).unwrap().values()[0], c);
        }
        let half = Field::constant(g.clone(), 0.5);
        let out = reaction_flow(&half, 2f64.ln()).unwrap().values()[0];
        assert!((out - 0.5 / (0.25f64 + 0.75 * 0.25).sqrt()).abs() < 1e-15);
        assert!((out - 0.755_928_946_018_454_5).abs() < 1e-12);
        assert!((out - rk4_scalar(0.5, 2f64.ln(), 4000)).abs() < 1e-12);

        let tau = 1e-4;
        for w in [-0.9, -0.3, 0.4, 0.8] {
            let f = Field::constant(g.clone(), w);
            let rate = (reaction_flow(&f, tau).unwrap().values()[0] - w) / tau;
            let exact = w - w * w * w;
            assert!(((rate - exact) / exact).abs() < 1e-4, "w = {w}");
        }
    }

    #[test]
    fn reaction_matches_ode_oracle_beyond_unit_interval() {
        let g = grid(8);
        for w in [1.5, 3.5, -2.7] {
            let f = Field::constant(g.clone(), w);
            let out = reaction_flow(&f, 0.3).unwrap().values()[0];
            assert!((out - rk4_scalar(w, 0.3, 20_000)).abs() < 1e-10, "w = {w}");
        }
    }

    #[test]
    fn reaction_reports_non_finite_location() {
        let g = grid(8);
        let mut f = Field::constant(g.clone(), 0.2);
        f.values_mut()[9] = f64::NAN;
        match reaction_flow(&f, 0.1) {
            Err(Error::NonFinite { detail, .. }) => assert!(detail.contains("(1, 1)")),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn reaction_composes_exactly() {
        let g = grid(16);
        let f = Field::from_fn(g.clone(), |x, y| 1.0 + 0.5 * x.sin() + (0.7 * y.sin()).exp());
        let once = reaction_flow(&f, 0.2).unwrap();
        let twice = reaction_flow(&reaction_flow(&f, 0.1).unwrap(), 0.1).unwrap();
        assert!(max_diff(&once, &twice) < 1e-12);
    }

    #[test]
    fn advection_examples() {
        let g = grid(32);
        let shear = Velocity::shear(&g, 0.75);
        let ys = Field::from_fn(g.clone(), |_, y| (y.sin() * 0.7).exp());
        assert!(max_diff(&advection_flow(&ys, &shear, 0.1, 1).unwrap(), &ys) < 1e-13);
        let c = Field::constant(g.clone(), 0.4);
        assert!(max_diff(&advection_flow(&c, &shear, 0.1, 1).unwrap(), &c) < 1e-14);
        assert!(advection_flow(&c, &shear, 0.1, 0).is_err());
    }

    #[test]
    fn advection_translates_at_fourth_order() {
        let g = grid(32);
        let speed = 0.8;
        let uniform = Velocity::uniform(&g, speed, 0.0);
        let s = Field::from_fn(g.clone(), |x, _| x.sin());
        let tau = 0.5;
        let exact = Field::from_fn(g.clone(), |x, _| (x - speed * tau).sin());
        let errs: Vec<(f64, f64)> = [2, 4, 8, 16]
            .iter()
            .map(|&m| {
                let out = advection_flow(&s, &uniform, tau, m).unwrap();
                (tau / m as f64, max_diff(&out, &exact))
            })
            .collect();
        let fit = crate::harness::fit_slope(&errs).unwrap();
        assert!((fit.slope - 4.0).abs() < 0.2, "slope {}", fit.slope);
        assert!(errs[3].1 < 1e-6);
    }

    #[test]
    fn advection_composes_to_rk4_accuracy() {
        let g = grid(32);
        let shear = Arc::new(Velocity::shear(&g, 0.75));
        let f = Field::from_fn(g.clone(), |x, y| 1.0 + 0.5 * x.sin() + (0.7 * y.sin()).exp());
        let once = advection_flow(&f, &shear, 0.02, 4).unwrap();
        let twice = advection_flow(&advection_flow(&f, &shear, 0.01, 2).unwrap(), &shear, 0.01, 2).unwrap();
        assert!(max_diff(&once, &twice) < 1e-14 * 100.0);
        let mut d = once.clone();
        crate::splitting::SplitState::axpy(&mut d, -1.0, &twice);
        assert!(discrete_norm(&d, NormKind::L2) < 1e-12);
    }

    proptest! {
        #[test]
        fn reaction_respects_maximum_principle(w in -1.0f64..=1.0, tau in 1e-6f64..20.0) {
            let g = Arc::new(SpectralGrid::torus(4).unwrap());
            let f = Field::constant(g, w);
            let out = reaction_flow(&f, tau).unwrap().values()[0];
            prop_assert!(out.abs() <= 1.0 + 1e-15);
            prop_assert!(out * w >= 0.0);
        }

        #[test]
        fn reaction_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, tau in 1e-4f64..2.0) {
            let g = Arc::new(SpectralGrid::torus(4).unwrap());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let fl = reaction_flow(&Field::constant(g.clone(), lo), tau).unwrap().values()[0];
            let fh = reaction_flow(&Field::constant(g, hi), tau).unwrap().values()[0];
            prop_assert!(fl <= fh);
        }
    }
}
