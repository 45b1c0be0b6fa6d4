use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, NewtonOptions, SolverReport};
use super::operator::{ConeMargins, OperatorCoefficients};
use super::{ContinuityProblem, GeodesicError, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityOptions {
    pub newton: NewtonOptions,
    /// Number of time intervals.
    pub nt: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Largest `X` tolerated by the sign check.
    pub x_tol: f64,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), nt: 64, initial_step: 0.1, min_step: 1e-6, x_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub s: f64,
    pub step: f64,
    pub accepted: bool,
    pub iterations: usize,
    pub residual: f64,
    pub margins: Option<ConeMargins>,
    pub min_damping: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub steps: Vec<PathStep>,
    pub final_report: SolverReport,
    /// Margins of the accepted `s = 1` solution.
    pub final_margins: ConeMargins,
}

impl PathTrace {
    pub fn accepted_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.accepted).count()
    }
}

fn record(s: f64, step: f64, rep: &SolverReport) -> PathStep {
    PathStep {
        s,
        step,
        accepted: true,
        iterations: rep.iterations,
        residual: rep.final_residual,
        margins: rep.cone_history.last().copied(),
        min_damping: rep.step_lengths.iter().copied().fold(1.0, f64::min),
        failure: None,
    }
}

/// Marches `s` from 0 to 1, warm-starting Newton and halving the step on failure.
pub fn continuity_solve(
    prob: &ContinuityProblem,
    opts: &ContinuityOptions,
) -> Result<(SpaceTimeField, PathTrace), GeodesicError> {
    prob.check_x_nonpositive(opts.x_tol)?;
    let mut steps = Vec::new();
    let zero_start = prob.linear_path(opts.nt);
    let (mut phi, rep) = newton_solve(&prob.at_s(0.0), &zero_start, &opts.newton)
        .map_err(|e| GeodesicError::AtParameter { s: 0.0, source: Box::new(e) })?;
    steps.push(record(0.0, 0.0, &rep));
    let mut s = 0.0;
    let mut ds = opts.initial_step;
    let mut last = rep;
    while s < 1.0 {
        let target = (s + ds).min(1.0);
        match newton_solve(&prob.at_s(target), &phi, &opts.newton) {
            Ok((next, rep)) => {
                steps.push(record(target, target - s, &rep));
                phi = next;
                s = target;
                last = rep;
                ds = (2.0 * ds).min(opts.initial_step);
            }
            Err(e) => {
                steps.push(PathStep {
                    s: target,
                    step: target - s,
                    accepted: false,
                    iterations: 0,
                    residual: f64::NAN,
                    margins: None,
                    min_damping: f64::NAN,
                    failure: Some(e.to_string()),
                });
                ds *= 0.5;
                if ds < opts.min_step {
                    return Err(GeodesicError::PathStuck { s, step: ds, last: Box::new(e) });
                }
            }
        }
    }
    let final_margins = OperatorCoefficients::compute(&phi, prob).margins(1.0);
    Ok((phi, PathTrace { steps, final_report: last, final_margins }))
}

/// One solve of an ε-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub eps: f64,
    pub field: SpaceTimeField,
    pub report: SolverReport,
    pub margins: ConeMargins,
    /// True when the solve was warm-started from the previous ε instead of running the full path.
    pub warm_started: bool,
}

/// Solves at `s = 1` for each `ε` in order, warm-starting from the previous solution.
///
/// A warm start that fails falls back to the full continuity path.
pub fn sweep_eps(
    prob: &ContinuityProblem,
    eps_values: &[f64],
    opts: &ContinuityOptions,
) -> Result<Vec<SweepEntry>, GeodesicError> {
    let mut out: Vec<SweepEntry> = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        let p = prob.with_eps(eps)?.at_s(1.0);
        let warm = out.last().and_then(|prev| newton_solve(&p, &prev.field, &opts.newton).ok());
        let (field, report, warm_started) = match warm {
            Some((f, r)) => (f, r, true),
            None => {
                let (f, trace) = continuity_solve(&p, opts)?;
                (f, trace.final_report, false)
            }
        };
        let margins = OperatorCoefficients::compute(&field, &p).margins(1.0);
        out.push(SweepEntry { eps, field, report, margins, warm_started });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HermitianMetricField;
    use crate::grid::{DiffScheme, GridDomain};
    use std::f64::consts::PI;

    fn domain() -> GridDomain {
        GridDomain::uniform(3, 2.0 * PI, 8, vec![0, 2], DiffScheme::Spectral).unwrap()
    }

    #[test]
    fn flat_path_completes_inside_the_cone() {
        let d = domain();
        let phi0 = d.sample(|x| 0.2 * x[0].cos());
        let phi1 = d.sample(|x| 0.2 * x[2].sin());
        let prob = ContinuityProblem::new(HermitianMetricField::flat(&d), 2, 0.1, phi0, phi1).unwrap();
        let opts = ContinuityOptions { nt: 16, ..Default::default() };
        let (_, trace) = continuity_solve(&prob, &opts).unwrap();
        let m = trace.final_margins;
        assert!(m.min_g >= 0.5 * m.min_l && m.min_l > 0.0 && m.min_a > 0.0);
        assert!(trace.final_report.final_residual <= 1e-9);
    }

    #[test]
    fn equal_boundary_data_gives_time_symmetric_solution() {
        let d = domain();
        let w = d.sample(|x| 0.3 * (x[0] + x[2]).cos());
        let prob = ContinuityProblem::new(HermitianMetricField::flat(&d), 2, 0.05, w.clone(), w).unwrap();
        let opts = ContinuityOptions { nt: 16, ..Default::default() };
        let (phi, _) = continuity_solve(&prob, &opts).unwrap();
        assert!(phi.sup_distance(&phi.time_reversed()) <= 1e-8);
    }

    #[test]
    fn positive_x_is_a_configuration_error() {
        let d = domain();
        let z = vec![0.0; d.num_points()];
        let x = d.sample(|p| 0.01 * (1.0 + p[0].cos()));
        let prob = ContinuityProblem::with_x(HermitianMetricField::flat(&d), 2, 0.1, z.clone(), z, x).unwrap();
        assert!(matches!(continuity_solve(&prob, &ContinuityOptions::default()), Err(GeodesicError::XPositive { .. })));
    }
}
