//! Differential forms and Hermitian metric quantities on periodic grids.

mod form;
pub mod io;
mod metric;
mod ops;
mod torsion;

pub use form::ComplexForm;
pub use metric::{HermitianMetricField, PositivityReport};
pub use ops::{dense_from_operator, MetricOperators};
pub use torsion::{TorsionField, XReport};

use crate::grid::GridError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("total degree {degree} exceeds real dimension {max}")]
    DegreeOverflow { degree: usize, max: usize },
    #[error("matrix not positive-definite at grid point {point} (coords {coords:?})")]
    NotPositive { point: usize, coords: Vec<f64> },
    #[error("p = {p} out of range for n = {n}")]
    BadOrder { p: usize, n: usize },
    #[error("complex dimension {n} below the required {min}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("expected a form of bidegree {expected:?}, got {got:?}")]
    Bidegree { expected: (usize, usize), got: (usize, usize) },
    #[error(transparent)]
    Grid(#[from] GridError),
}
