//! Fixtures shared by the benchmarks.

use qsplit::allencahn::ACProblem;
use qsplit::linear::{generate_problem, LinearProblem};

/// The desk-scale linear problem: m = 20 and `p` operators.
pub fn linear_problem(p: usize) -> LinearProblem {
    generate_problem(20, p, 1).expect("desk problem generates")
}

/// The standard Allen–Cahn problem on an `n × n` grid.
pub fn allen_cahn_problem(n: usize, shear: bool) -> ACProblem {
    ACProblem::standard(n, shear).expect("power-of-two grid")
}
