//! Allen–Cahn on the periodic square: Fourier spectral fields, the exact
//! heat and reaction subflows, RK4 transport, an ETDRK4 reference solver,
//! discrete Sobolev norms and the leading splitting-defect coefficient.

mod field;
mod flows;
mod grid;
mod problem;
mod reference;

pub use field::{discrete_norm, Field, NormKind};
pub use flows::{
    advection_flow, heat_flow, reaction_flow, AdvectionFlow, HeatFlow, ReactionFlow, Velocity,
};
pub use grid::SpectralGrid;
pub use problem::{full_rhs, phi_defining_form, phi_oracle, standard_initial, ACProblem};
pub use reference::{reference_solve, reference_with_gate, EtdPropagator, Etdrk4, Terms};
