//! Balanced Calabi-Yau equation for `(u, b)`, the astheno classification and metric recovery.

mod astheno;
mod problem;
mod recover;
mod solver;

pub use astheno::{compute_e, AsthenoClass, AsthenoReport};
pub use problem::{chi_plugin, Assembly, ChiPlugin, CyProblem, ExactChi, ZeroChi};
pub use recover::{c0_report, chern_ricci, recover_balanced_metric, C0Report, RecoveredMetric};
pub use solver::{c0_sweep, solve_cy, C0SweepRow, CyOptions, CyReport, CySolution};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension {n} too small; need n >= 3")]
    DimensionTooSmall { n: usize },
    #[error("ω is not balanced: residual {residual:.3e} exceeds {tol:.1e}")]
    NotBalanced { residual: f64, tol: f64 },
    #[error("unknown χ plug-in `{0}`")]
    UnknownChi(String),
    #[error("ω̃_u left the positive cone (margin {margin:.3e} at {coords:?})")]
    ConeExit { margin: f64, coords: Vec<f64>, iterations: usize },
    #[error("line search failed with residual {residual:.3e}")]
    LineSearchFail { residual: f64 },
    #[error("no convergence in {iterations} iterations; residual {residual:.3e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("singular Newton system")]
    Singular,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
