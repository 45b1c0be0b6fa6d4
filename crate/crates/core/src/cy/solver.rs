use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::astheno::{entries_at, AsthenoClass};
use super::recover::{recover_balanced_metric, RecoveredMetric};
use super::{CyError, CyProblem};
use crate::geometry::{dense_from_operator, HermitianMetricField};
use crate::grid::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Prescribed mean of `u`.
    pub mean: f64,
}

impl Default for CyOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 50, armijo: 1e-4, max_backtracks: 40, mean: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub final_residual: f64,
    pub margin: f64,
    pub class: AsthenoClass,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CySolution {
    pub u: Vec<f64>,
    pub b: f64,
    pub tilde: HermitianMetricField,
    pub recovered: RecoveredMetric,
    pub report: CyReport,
}

fn sup(r: &[f64]) -> f64 {
    r.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn l2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn mean(r: &[f64]) -> f64 {
    r.iter().sum::<f64>() / r.len() as f64
}

/// Bordered Newton system `[J -1; 1ᵀ/N 0]` for `(δu, δb)`.
fn newton_step(prob: &CyProblem, tilde: &[Vec<C64>], residual: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = prob.alpha().n();
    let np = residual.len();
    let inverses: Vec<_> = (0..np)
        .map(|p| entries_at(tilde, n, p).try_inverse())
        .collect::<Option<Vec<_>>>()?;
    let jac = dense_from_operator(np, |v| {
        let lin = prob.linear_part(v);
        (0..np)
            .map(|p| {
                let inv = &inverses[p];
                let mut s = C64::new(0.0, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        s += inv[(k, j)] * lin[j * n + k][p];
                    }
                }
                s.re
            })
            .collect()
    });
    let mut m = DMatrix::zeros(np + 1, np + 1);
    m.view_mut((0, 0), (np, np)).copy_from(&jac);
    for i in 0..np {
        m[(i, np)] = -1.0;
        m[(np, i)] = 1.0 / np as f64;
    }
    let mut rhs = DVector::zeros(np + 1);
    for i in 0..np {
        rhs[i] = -residual[i];
    }
    let x = m.lu().solve(&rhs)?;
    x.iter().all(|v| v.is_finite()).then(|| (x.as_slice()[..np].to_vec(), x[np]))
}

/// Damped Newton on `(u, b)` with `mean(u)` fixed; `b` is re-centred on the mean log-residual each step.
pub fn solve_cy(prob: &CyProblem, init: Option<&[f64]>, opts: &CyOptions) -> Result<CySolution, CyError> {
    let np = prob.alpha().domain().num_points();
    let mut warnings = Vec::new();
    let class = prob.astheno().class;
    if matches!(class, AsthenoClass::Indefinite | AsthenoClass::Super) {
        warnings.push(format!("E is {class:?}; solvability is not covered by the sign condition"));
    }
    let mut u = match init {
        Some(u0) if u0.len() == np => u0.to_vec(),
        Some(_) => return Err(CyError::Config("initial field does not match the grid".into())),
        None => vec![0.0; np],
    };
    let shift = opts.mean - mean(&u);
    u.iter_mut().for_each(|v| *v += shift);
    let mut b = 0.0;
    let mut asm = prob.assemble(&u, b);
    if asm.margin <= 0.0 {
        let coords = prob.alpha().domain().coords(asm.margin_point);
        return Err(CyError::ConeExit { margin: asm.margin, coords, iterations: 0 });
    }
    let m0 = mean(&asm.residual);
    b += m0;
    asm.residual.iter_mut().for_each(|r| *r -= m0);
    let mut history = vec![sup(&asm.residual)];
    let mut steps = Vec::new();
    let mut iterations = 0;
    loop {
        let r_sup = sup(&asm.residual);
        if r_sup <= opts.tol {
            let tilde = HermitianMetricField::new(prob.alpha().domain(), asm.tilde.clone())?;
            let recovered = recover_balanced_metric(&u, prob)?;
            let report = CyReport {
                iterations,
                residual_history: history,
                step_lengths: steps,
                final_residual: r_sup,
                margin: asm.margin,
                class,
                warnings,
            };
            return Ok(CySolution { u, b, tilde, recovered, report });
        }
        if iterations >= opts.max_iter {
            return Err(CyError::MaxIterations { iterations, residual: r_sup });
        }
        let (du, db) = newton_step(prob, &asm.tilde, &asm.residual).ok_or(CyError::Singular)?;
        let r0 = l2(&asm.residual);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut last_cone = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + alpha * d).collect();
            let tb = b + alpha * db;
            let ta = prob.assemble(&trial, tb);
            if ta.margin > 0.0 {
                let m = mean(&ta.residual);
                let centred: Vec<f64> = ta.residual.iter().map(|r| r - m).collect();
                if l2(&centred) <= (1.0 - opts.armijo * alpha) * r0 || sup(&centred) <= opts.tol {
                    accepted = Some((trial, tb + m, crate::cy::Assembly { residual: centred, ..ta }));
                    break;
                }
            } else {
                last_cone = Some((ta.margin, ta.margin_point));
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((mut nu, nb, na)) => {
                // the bordered step keeps the mean only up to roundoff
                let drift = opts.mean - mean(&nu);
                nu.iter_mut().for_each(|v| *v += drift);
                u = nu;
                b = nb;
                asm = na;
                iterations += 1;
                steps.push(alpha);
                history.push(sup(&asm.residual));
            }
            None => {
                return Err(match last_cone {
                    Some((margin, p)) => {
                        CyError::ConeExit { margin, coords: prob.alpha().domain().coords(p), iterations }
                    }
                    None => CyError::LineSearchFail { residual: r_sup },
                })
            }
        }
    }
}

/// One amplitude of a ψ-family sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0SweepRow {
    pub amplitude: f64,
    pub sup_abs_u: f64,
    pub b: f64,
    pub iterations: usize,
    pub trace_margin: f64,
    pub min_eigenvalue: f64,
    /// Solver failure at this amplitude, if any.
    pub failure: Option<String>,
}

/// Solves with `ψ = c·shape` for each amplitude `c`, warm-starting from the previous solution.
pub fn c0_sweep(base: &CyProblem, shape: &[f64], amplitudes: &[f64], opts: &CyOptions) -> Vec<C0SweepRow> {
    let mut warm: Option<Vec<f64>> = None;
    amplitudes
        .iter()
        .map(|&c| {
            let prob = base.with_psi(shape.iter().map(|v| c * v).collect());
            match solve_cy(&prob, warm.as_deref(), opts) {
                Ok(sol) => {
                    let c0 = super::c0_report(&sol.u, &prob);
                    let row = C0SweepRow {
                        amplitude: c,
                        sup_abs_u: c0.sup_abs_u,
                        b: sol.b,
                        iterations: sol.report.iterations,
                        trace_margin: c0.trace_margin,
                        min_eigenvalue: c0.min_eigenvalue,
                        failure: None,
                    };
                    warm = Some(sol.u);
                    row
                }
                Err(e) => C0SweepRow {
                    amplitude: c,
                    sup_abs_u: f64::NAN,
                    b: f64::NAN,
                    iterations: 0,
                    trace_margin: f64::NAN,
                    min_eigenvalue: f64::NAN,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect()
}
