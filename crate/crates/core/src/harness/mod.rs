//! Convergence experiments: configuration, parallel sweeps over policies
//! and time steps, ensemble aggregation, slope fits and CSV/SVG reports.

mod config;
mod experiment;
mod report;
mod slope;
mod svg;

pub use config::{parse_taus, Backend, ExperimentConfig, FlowKind, PolicyKind};
pub use experiment::{aggregate, allen_cahn_problem, run_allen_cahn, run_experiment, run_linear, CellStats};
pub use report::{
    emit_csv, read_csv, read_csv_from, write_csv, ConvergenceReport, ReportRow, RowFailure, SeriesFit, CSV_HEADER,
};
pub use slope::{fit_slope, SlopeFit, DEGENERATE_LEVEL};
pub use svg::{emit_svg, render_svg};
