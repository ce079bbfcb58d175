use std::sync::Arc;

use super::field::Field;
use super::flows::{AdvectionFlow, HeatFlow, ReactionFlow, Velocity};
use super::grid::SpectralGrid;
use crate::splitting::Flow;
use crate::{Error, Result};

/// `∂_t u + v · ∇u = ν Δu + u − u³` on the periodic square.
#[derive(Debug, Clone)]
pub struct ACProblem {
    pub nu: f64,
    pub horizon: f64,
    pub velocity: Option<Arc<Velocity>>,
    pub initial: Field,
    /// RK4 substeps per advection subflow call.
    pub advection_substeps: usize,
}

/// `1 + 0.5 sin x + exp(0.7 sin y)`.
pub fn standard_initial(grid: Arc<SpectralGrid>) -> Field {
    Field::from_fn(grid, |x, y| 1.0 + 0.5 * x.sin() + (0.7 * y.sin()).exp())
}

impl ACProblem {
    pub fn new(nu: f64, horizon: f64, velocity: Option<Velocity>, initial: Field) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::domain(format!("diffusion coefficient must be positive, got {nu}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if let Some(v) = &velocity {
            if v.vx.len() != initial.grid().len() || v.vy.len() != initial.grid().len() {
                return Err(Error::DimensionMismatch { expected: initial.grid().len(), found: v.vx.len() });
            }
        }
        Ok(Self { nu, horizon, velocity: velocity.map(Arc::new), initial, advection_substeps: 1 })
    }

    /// `ν = 1`, `T = 1`, `L = 2π`, the standard initial data, and
    /// optionally the shear flow `v = (−0.75 sin y, 0)`.
    pub fn standard(n: usize, shear: bool) -> Result<Self> {
        let grid = Arc::new(SpectralGrid::torus(n)?);
        let velocity = shear.then(|| Velocity::shear(&grid, 0.75));
        Self::new(1.0, 1.0, velocity, standard_initial(grid))
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::domain("advection needs at least one RK4 substep"));
        }
        self.advection_substeps = substeps;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.initial.grid()
    }

    /// Subflows in label order: diffusion, reaction; with a velocity field
    /// advection comes first.
    pub fn flows(&self) -> Vec<Arc<dyn Flow<Field>>> {
        let mut flows: Vec<Arc<dyn Flow<Field>>> = Vec::with_capacity(3);
        if let Some(v) = &self.velocity {
            flows.push(Arc::new(AdvectionFlow { velocity: v.clone(), substeps: self.advection_substeps }));
        }
        flows.push(Arc::new(HeatFlow { nu: self.nu }));
        flows.push(Arc::new(ReactionFlow));
        flows
    }
}

/// `ν Δu + u − u³ − v · ∇u`.
pub fn full_rhs(field: &Field, problem: &ACProblem) -> Field {
    let lap = field.laplacian();
    let mut values: Vec<f64> =
        field.values().iter().zip(&lap).map(|(u, l)| problem.nu * l + u - u * u * u).collect();
    if let Some(v) = &problem.velocity {
        values.iter_mut().zip(v.transport(field)).for_each(|(r, t)| *r -= t);
    }
    Field::new(field.grid().clone(), values).expect("same grid")
}

/// Leading defect coefficient of `S_R S_L` for diffusion–reaction:
/// `Φ(a) = 6 ν a |∇a|²`.
pub fn phi_oracle(field: &Field, nu: f64) -> Field {
    let (dx, dy) = field.gradient();
    let values = field.values().iter().zip(dx.iter().zip(&dy)).map(|(a, (gx, gy))| 6.0 * nu * a * (gx * gx + gy * gy)).collect();
    Field::new(field.grid().clone(), values).expect("same grid")
}

/// The same coefficient from its definition `DR(a) La − L(R(a))`, i.e.
/// `(1 − 3a²) ν Δa − ν Δ(a − a³)`.
pub fn phi_defining_form(field: &Field, nu: f64) -> Field {
    let lap_a = field.laplacian();
    let reacted = field.map(|a| a - a * a * a);
    let lap_r = reacted.laplacian();
    let values = field
        .values()
        .iter()
        .zip(lap_a.iter().zip(&lap_r))
        .map(|(a, (la, lr))| (1.0 - 3.0 * a * a) * nu * la - nu * lr)
        .collect();
    Field::new(field.grid().clone(), values).expect("same grid")
}
