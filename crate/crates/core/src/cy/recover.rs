use serde::{Deserialize, Serialize};

use super::astheno::alpha_trace;
use super::{CyError, CyProblem};
use crate::geometry::{ComplexForm, HermitianMetricField};

/// `Ric^C(g) = -i∂∂̄ log det g`.
pub fn chern_ricci(g: &HermitianMetricField) -> ComplexForm {
    let neg: Vec<f64> = g.log_det().iter().map(|v| -v).collect();
    ComplexForm::real_scalar(g.domain(), &neg).i_ddbar()
}

#[derive(Debug, Clone)]
pub struct RecoveredMetric {
    pub omega_u: HermitianMetricField,
    pub balanced_residual: f64,
    /// Largest mean over the torus of a coefficient of `ω_u^{n-1} - ω^{n-1}`.
    pub cohomology_residual: f64,
    /// `sup |Ric^C(ω_u) - Ψ|` over coefficients.
    pub ricci_error: f64,
}

/// Root of `ω^{n-1} + i∂∂̄(u α^{n-2})`.
pub fn recover_balanced_metric(u: &[f64], prob: &CyProblem) -> Result<RecoveredMetric, CyError> {
    let n = prob.alpha().n();
    let d = prob.alpha().domain();
    let base = prob.omega().kahler_form().wedge_power(n - 1)?;
    let diff = prob.alpha().kahler_form().wedge_power(n - 2)?.mul_real_field(u).i_ddbar();
    let omega_u = HermitianMetricField::michelsohn_root(&(&base + &diff))?;
    let cohomology_residual = diff
        .coeffs()
        .iter()
        .map(|c| {
            let re: Vec<f64> = c.iter().map(|v| v.re).collect();
            let im: Vec<f64> = c.iter().map(|v| v.im).collect();
            d.mean(&re).abs().max(d.mean(&im).abs())
        })
        .fold(0.0, f64::max);
    let ricci = chern_ricci(&omega_u);
    let ricci_error = (&ricci - &prob.target_ricci()).sup_norm();
    Ok(RecoveredMetric { balanced_residual: omega_u.balanced_residual(), omega_u, cohomology_residual, ricci_error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C0Report {
    pub sup_abs_u: f64,
    pub mean_u: f64,
    /// `min tr_α ω̃_u = Δ_α u + tr_α χ + X_E u + tr_α ω_h`.
    pub trace_margin: f64,
    pub min_eigenvalue: f64,
}

pub fn c0_report(u: &[f64], prob: &CyProblem) -> C0Report {
    let asm = prob.assemble(u, 0.0);
    let tr = alpha_trace(prob.alpha(), &asm.tilde);
    C0Report {
        sup_abs_u: u.iter().fold(0.0, |m, v| m.max(v.abs())),
        mean_u: prob.alpha().domain().mean(u),
        trace_margin: tr.into_iter().fold(f64::INFINITY, f64::min),
        min_eigenvalue: asm.margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cy::ZeroChi;
    use crate::grid::{DiffScheme, GridDomain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn ricci_of_flat_and_conformal() {
        let d = GridDomain::uniform(3, 2.0 * PI, 16, vec![0, 2], DiffScheme::Spectral).unwrap();
        assert!(chern_ricci(&HermitianMetricField::flat(&d)).sup_norm() < 1e-14);
        // e^f δ: Ric = -n i∂∂̄f
        let f = d.sample(|x| 0.3 * x[0].sin() + 0.2 * (x[0] + x[2]).cos());
        let ric = chern_ricci(&HermitianMetricField::conformal(&d, &f));
        let want = ComplexForm::real_scalar(&d, &f).i_ddbar().scale(crate::grid::C64::new(-3.0, 0.0));
        assert!((&ric - &want).sup_norm() < 1e-8);
    }

    #[test]
    fn zero_field_recovers_omega() {
        let d = GridDomain::uniform(3, 2.0 * PI, 12, vec![0, 2], DiffScheme::Spectral).unwrap();
        let f = d.sample(|x| 0.4 * x[0].cos());
        let omega = HermitianMetricField::balanced_root(&d, &f).unwrap();
        let flat = HermitianMetricField::flat(&d);
        let prob = CyProblem::new(flat, omega.clone(), vec![0.0; d.num_points()], Arc::new(ZeroChi), 1e-8).unwrap();
        let rec = recover_balanced_metric(&vec![0.0; d.num_points()], &prob).unwrap();
        let err = rec.omega_u.entries().iter().flatten().zip(omega.entries().iter().flatten())
            .map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let c0 = c0_report(&vec![0.0; d.num_points()], &prob);
        assert_eq!(c0.sup_abs_u, 0.0);
        assert!(c0.trace_margin > 0.0);
    }
}
