use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{jacobian_blocks, residual_unchecked, ConeMargins, OperatorCoefficients};
use super::{ContinuityProblem, GeodesicError, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Sup-norm residual tolerance on interior rows.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test on the residual 2-norm.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Fraction-to-boundary: the cone margin may shrink by at most this factor per step.
    pub cone_fraction: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 50, armijo: 1e-4, max_backtracks: 40, cone_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub s: f64,
    pub iterations: usize,
    /// Sup-norm residual before each step and after the last.
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub cone_history: Vec<ConeMargins>,
    pub converged: bool,
    pub final_residual: f64,
}

impl SolverReport {
    /// Ratios `r_{k+1}/r_k` of the last two steps.
    pub fn final_ratios(&self) -> Option<(f64, f64)> {
        let h = &self.residual_history;
        (h.len() >= 3).then(|| {
            let k = h.len();
            (h[k - 2] / h[k - 3], h[k - 1] / h[k - 2])
        })
    }
}

fn sup(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn l2(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the block-tridiagonal system `L_m x_{m-1} + D_m x_m + U_m x_{m+1} = b_m`.
pub(crate) fn block_thomas(
    blocks: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
    rhs: &[Vec<f64>],
) -> Option<Vec<Vec<f64>>> {
    let k = blocks.len();
    let mut c_prime: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    let mut d_prime: Vec<DVector<f64>> = Vec::with_capacity(k);
    for (m, (lower, diag, upper)) in blocks.into_iter().enumerate() {
        let mut b = DVector::from_column_slice(&rhs[m]);
        let s = if m == 0 {
            diag
        } else {
            b -= &lower * &d_prime[m - 1];
            diag - &lower * &c_prime[m - 1]
        };
        let lu = s.lu();
        c_prime.push(lu.solve(&upper)?);
        d_prime.push(lu.solve(&b)?);
        if !d_prime[m].iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    let mut x = vec![DVector::zeros(0); k];
    for m in (0..k).rev() {
        x[m] = if m + 1 == k { d_prime[m].clone() } else { &d_prime[m] - &c_prime[m] * &x[m + 1] };
    }
    Some(x.into_iter().map(|v| v.as_slice().to_vec()).collect())
}

/// Newton direction `δ` with `J δ = -R` on interior levels.
pub(crate) fn newton_direction(
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    coef: &OperatorCoefficients,
    residual: &[Vec<f64>],
) -> Option<Vec<f64>> {
    let nt = phi.nt();
    let h = phi.dt();
    let blocks: Vec<_> = (1..nt).into_par_iter().map(|m| jacobian_blocks(coef, m, prob, h)).collect();
    let rhs: Vec<Vec<f64>> = (1..nt).map(|m| residual[m].iter().map(|v| -v).collect()).collect();
    block_thomas(blocks, &rhs).map(|x| x.concat())
}

/// Damped Newton for `P_s(φ) = 0` starting from `init`.
///
/// Iterates stay in the `s`-cone `{sφ_tt+1-s > 0, sA+1-s > 0, (sφ_tt+1-s)(sA+1-s) - s²|∇φ_t|² > 0}`,
/// which at `s = 1` is the ellipticity cone `φ_tt > 0, A > 0, G > 0`.
pub fn newton_solve(
    prob: &ContinuityProblem,
    init: &SpaceTimeField,
    opts: &NewtonOptions,
) -> Result<(SpaceTimeField, SolverReport), GeodesicError> {
    prob.check_field(init)?;
    let s = prob.s();
    let mut phi = init.clone();
    let mut coef = OperatorCoefficients::compute(&phi, prob);
    if let Some((i, m)) = coef.first_cone_violation(s) {
        return Err(GeodesicError::ConeExit { s, point: phi.point(i, m), iterate: Box::new(phi) });
    }
    let mut res = residual_unchecked(&phi, prob);
    let mut report = SolverReport {
        s,
        iterations: 0,
        residual_history: vec![sup(&res)],
        step_lengths: Vec::new(),
        cone_history: vec![coef.margins(s)],
        converged: false,
        final_residual: sup(&res),
    };
    loop {
        let r_sup = sup(&res);
        if r_sup <= opts.tol {
            report.converged = true;
            report.final_residual = r_sup;
            return Ok((phi, report));
        }
        if report.iterations >= opts.max_iter {
            return Err(GeodesicError::MaxIterations { s, residual: r_sup, iterate: Box::new(phi) });
        }
        let delta = newton_direction(&phi, prob, &coef, &res).ok_or(GeodesicError::Singular { s })?;
        let r_l2 = l2(&res);
        let cone_floor = opts.cone_fraction * coef.margins(s).min_cone_g;
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut cone_blocked = None;
        for _ in 0..=opts.max_backtracks {
            let mut trial = phi.clone();
            trial.add_interior(&delta, alpha);
            let tc = OperatorCoefficients::compute(&trial, prob);
            let in_cone = match tc.first_cone_violation(s) {
                Some((i, m)) => {
                    cone_blocked = Some(trial.point(i, m));
                    false
                }
                None => tc.margins(s).min_cone_g >= cone_floor,
            };
            if in_cone {
                let tr = residual_unchecked(&trial, prob);
                if l2(&tr) <= (1.0 - opts.armijo * alpha) * r_l2 || sup(&tr) <= opts.tol {
                    accepted = Some((trial, tc, tr));
                    break;
                }
                cone_blocked = None;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, tc, tr)) => {
                phi = trial;
                coef = tc;
                res = tr;
                report.iterations += 1;
                report.step_lengths.push(alpha);
                report.residual_history.push(sup(&res));
                report.cone_history.push(coef.margins(s));
            }
            None => {
                return Err(match cone_blocked {
                    Some(point) => GeodesicError::ConeExit { s, point, iterate: Box::new(phi) },
                    None => GeodesicError::LineSearchFail { s, residual: r_sup, iterate: Box::new(phi) },
                })
            }
        }
    }
}
