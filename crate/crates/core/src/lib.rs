pub mod algebra;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod geodesic;
pub mod convergence;
pub mod cy;
pub mod verify;
