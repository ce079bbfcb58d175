//! Quasi-random operator splitting for evolution equations.
//!
//! The crate is organised bottom-up:
//!
//! * [`lowdisc`] generates radical-inverse sequences and the discrepancy
//!   diagnostics built on them (sign sequences, weighted sums, the
//!   decomposition of the signed counting measure).
//! * [`ordering`] turns a stream of numbers in `[0, 1)` into one
//!   permutation of the subflows per time step via a Fisher–Yates shuffle.
//! * [`splitting`] is the generic stepper: Lie-type compositions driven by
//!   an ordering policy, Strang, error traces and local-defect probes.
//! * [`linear`] and [`allencahn`] are the two problem backends.
//! * [`harness`] runs convergence sweeps and writes CSV/SVG reports.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allencahn;
pub mod error;
pub mod harness;
pub mod linear;
pub mod lowdisc;
pub mod ordering;
pub mod splitting;

pub use error::{Error, Result};
pub use ordering::{Driver, OrderingStream, Permutation};
pub use splitting::{ErrorTrace, Flow, Policy, Reference, SplitState, SplittingScheme, Trajectory};
