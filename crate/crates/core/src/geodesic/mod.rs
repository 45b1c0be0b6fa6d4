//! Space-time solver for the degenerate geodesic equation and its continuity path.

pub mod barrier;
pub mod continuity;
mod field;
pub mod mms;
pub mod newton;
pub mod operator;
mod problem;

pub use barrier::{construct_subsolution, solve_supersolution, subsolution_margin_fd, BarrierPair, Subsolution, SubsolutionSearch};
pub use continuity::{continuity_solve, sweep_eps, ContinuityOptions, PathStep, PathTrace, SweepEntry};
pub use field::{SpaceTimeField, SpaceTimePoint};
pub use newton::{newton_solve, NewtonOptions, SolverReport};
pub use operator::{
    ellipticity_margin, energy, energy_with, full_linearization, operator_f, principal_symbol, symbol_matrix,
    ConeMargins, LevelCoefficients, OperatorCoefficients, SymbolReport,
};
pub use problem::ContinuityProblem;

use crate::geometry::GeometryError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeodesicError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("X is positive (max {max:.3e} at {coords:?})")]
    XPositive { max: f64, coords: Vec<f64> },
    #[error("iterate left the cone at s = {s} (level {}, point {})", point.level, point.index)]
    ConeExit { s: f64, point: SpaceTimePoint, iterate: Box<SpaceTimeField> },
    #[error("line search failed at s = {s} with residual {residual:.3e}")]
    LineSearchFail { s: f64, residual: f64, iterate: Box<SpaceTimeField> },
    #[error("no convergence at s = {s}; residual {residual:.3e}")]
    MaxIterations { s: f64, residual: f64, iterate: Box<SpaceTimeField> },
    #[error("singular Jacobian at s = {s}")]
    Singular { s: f64 },
    #[error("continuation stuck at s = {s} (step {step:.1e}): {last}")]
    PathStuck { s: f64, step: f64, last: Box<GeodesicError> },
    #[error("failure at s = {s}: {source}")]
    AtParameter { s: f64, source: Box<GeodesicError> },
    #[error("positivity fails at level {} point {} (value {value:.3e})", point.level, point.index)]
    Positivity { point: SpaceTimePoint, value: f64 },
    #[error("no subsolution in the search box; best margin {best_margin:.3e} at a = {a}, b = {b}")]
    SearchExhausted { best_margin: f64, a: f64, b: f64 },
    #[error("A of the linear interpolant is {value:.3e} at level {} point {}", point.level, point.index)]
    SubsolutionPrecondition { point: SpaceTimePoint, value: f64 },
    #[error("linear solve left residual {residual:.3e}")]
    LinearSolve { residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
