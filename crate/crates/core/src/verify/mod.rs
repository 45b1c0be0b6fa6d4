//! Sampled property checks and a priori estimate measurements on computed solutions.

mod energy;
mod estimates;
pub mod hyperdual;
pub mod lemmas;

pub use energy::{energy_minimality_probe, EnergyProbe, ProbeRow};
pub use estimates::{
    check_sandwich, check_time_monotone, estimate_ratios, estimate_report, gap_field_measurement, EstimateReport,
    GapFieldReport, MonotoneReport, SandwichReport, SweepSummary,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geodesic::{ContinuityProblem, GeodesicError};
use crate::geometry::HermitianMetricField;
use crate::grid::{DiffScheme, GridDomain};

/// Outcome of a sampled check: every observed margin must be `≥ -tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub failures: usize,
    /// Smallest observed margin.
    pub worst: f64,
    pub tol: f64,
    pub pass: bool,
    /// Inputs of the worst failing sample.
    pub counterexample: Option<serde_json::Value>,
}

impl CheckReport {
    pub fn new(name: &str, tol: f64) -> Self {
        Self { name: name.into(), samples: 0, failures: 0, worst: f64::INFINITY, tol, pass: true, counterexample: None }
    }

    pub fn observe<F: FnOnce() -> serde_json::Value>(&mut self, margin: f64, context: F) {
        self.samples += 1;
        let failed = !(margin >= -self.tol);
        if failed {
            self.failures += 1;
            self.pass = false;
        }
        if !(margin >= self.worst) {
            self.worst = margin;
            if failed {
                self.counterexample = Some(context());
            }
        }
    }
}

/// Runs the three sampled lemma suites with the given counts and seed.
pub fn lemma_suites(counts: [usize; 3], n: usize, seed: u64) -> Vec<CheckReport> {
    vec![
        lemmas::midpoint_concavity(counts[0], n, seed, 1e-12),
        lemmas::plurisubharmonic(counts[1], n, seed.wrapping_add(1), 1e-10),
        lemmas::gap_lemma(counts[2], n, seed.wrapping_add(2), 1e-12),
    ]
}

/// Flat Kähler benchmark: `n = 3`, `p = 2`, two active coordinates, smooth trigonometric data.
pub fn flat_kahler_benchmark(resolution: usize, eps: f64) -> Result<ContinuityProblem, GeodesicError> {
    let d = GridDomain::uniform(3, 2.0 * PI, resolution, vec![0, 2], DiffScheme::Spectral)
        .map_err(|e| GeodesicError::Config(e.to_string()))?;
    let phi0 = d.sample(|x| 0.5 * (2.0 * x[0]).cos());
    let phi1 = d.sample(|x| 0.5 * (2.0 * x[2]).sin() + 0.3 * (x[0] + x[2]).cos());
    ContinuityProblem::new(HermitianMetricField::flat(&d), 2, eps, phi0, phi1)
}
