//! Fixtures shared by the criterion benches.

use std::f64::consts::PI;

use volform_core::geometry::HermitianMetricField;
use volform_core::grid::{DiffScheme, GridDomain};

pub fn domain(resolution: usize) -> GridDomain {
    GridDomain::uniform(3, 2.0 * PI, resolution, vec![0, 2], DiffScheme::Spectral).expect("valid grid")
}

pub fn balanced_root(d: &GridDomain) -> HermitianMetricField {
    let f = d.sample(|x| 0.3 * x[0].cos() + 0.2 * (x[0] + x[2]).sin());
    HermitianMetricField::balanced_root(d, &f).expect("positive metric")
}
