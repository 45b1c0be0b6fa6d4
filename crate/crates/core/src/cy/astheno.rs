use serde::{Deserialize, Serialize};

use super::CyError;
use crate::algebra::{relative_eigenvalues, CMat};
use crate::geometry::HermitianMetricField;
use crate::grid::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsthenoClass {
    Sub,
    Super,
    Astheno,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsthenoReport {
    /// Entries `E[j*n+k]` of `E = ⋆i∂∂̄α^{n-2}/(n-1)!`.
    #[serde(skip)]
    pub e: Vec<Vec<C64>>,
    /// Pointwise smallest and largest eigenvalues of `E` against `α`.
    #[serde(skip)]
    pub min_field: Vec<f64>,
    #[serde(skip)]
    pub max_field: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub class: AsthenoClass,
    pub tol: f64,
    /// `tr_α E`.
    #[serde(skip)]
    pub x_e: Vec<f64>,
    /// `sup |tr_α E - n X|` with `X` of `α` at order `p = n-1`.
    pub trace_discrepancy: f64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

pub(crate) fn entries_at(e: &[Vec<C64>], n: usize, p: usize) -> CMat {
    CMat::from_fn(n, n, |j, k| e[j * n + k][p])
}

/// `tr(α⁻¹ H)` at every point.
pub(crate) fn alpha_trace(alpha: &HermitianMetricField, h: &[Vec<C64>]) -> Vec<f64> {
    let n = alpha.n();
    let inv = alpha.inverse_entries();
    (0..alpha.domain().num_points())
        .map(|p| {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                for k in 0..n {
                    s += inv[k * n + j][p] * h[j * n + k][p];
                }
            }
            s.re
        })
        .collect()
}

/// Classifies `α` by the sign of `E` at every grid point.
pub fn compute_e(alpha: &HermitianMetricField, tol: f64) -> Result<AsthenoReport, CyError> {
    let n = alpha.n();
    if n < 3 {
        return Err(CyError::DimensionTooSmall { n });
    }
    let a = alpha.kahler_form().wedge_power(n - 2)?;
    let e_form = alpha.hodge_star(&a.i_ddbar()).scale(C64::new(1.0 / factorial(n - 1), 0.0));
    let e = e_form.hermitian_entries();
    let np = alpha.domain().num_points();
    let (mut min_field, mut max_field) = (Vec::with_capacity(np), Vec::with_capacity(np));
    for p in 0..np {
        let ev = relative_eigenvalues(&entries_at(&e, n, p), &alpha.matrix_at(p)).expect("α is positive");
        min_field.push(ev[0]);
        max_field.push(ev[n - 1]);
    }
    let min_eigenvalue = min_field.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = max_field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let class = match (max_eigenvalue <= tol, min_eigenvalue >= -tol) {
        (true, true) => AsthenoClass::Astheno,
        (true, false) => AsthenoClass::Sub,
        (false, true) => AsthenoClass::Super,
        (false, false) => AsthenoClass::Indefinite,
    };
    let x_e = alpha_trace(alpha, &e);
    let x = alpha.compute_x(n - 1)?.direct;
    let trace_discrepancy = x_e.iter().zip(&x).map(|(t, x)| (t - n as f64 * x).abs()).fold(0.0, f64::max);
    Ok(AsthenoReport { e, min_field, max_field, min_eigenvalue, max_eigenvalue, class, tol, x_e, trace_discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiffScheme, GridDomain};
    use std::f64::consts::PI;

    #[test]
    fn flat_alpha_is_astheno() {
        let d = GridDomain::uniform(3, 2.0 * PI, 8, vec![0, 2], DiffScheme::Spectral).unwrap();
        let r = compute_e(&HermitianMetricField::flat(&d), 1e-12).unwrap();
        assert_eq!(r.class, AsthenoClass::Astheno);
        assert!(r.e.iter().flatten().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn rejects_small_dimension() {
        let d = GridDomain::uniform(2, 2.0 * PI, 8, vec![0], DiffScheme::Spectral).unwrap();
        assert_eq!(compute_e(&HermitianMetricField::flat(&d), 1e-12), Err(CyError::DimensionTooSmall { n: 2 }));
    }

    #[test]
    fn conformal_alpha_matches_closed_form() {
        // α = e^f δ, n = 3: E_{jk̄} = e^{-f}/2 (tr h δ_jk - h_jk), h_{jk̄} = ∂_j∂̄_k e^f
        let d = GridDomain::uniform(3, 2.0 * PI, 24, vec![0, 3], DiffScheme::Spectral).unwrap();
        let f = |x: &[f64]| 0.3 * x[0].cos() + 0.2 * (x[0] - x[3]).sin();
        let alpha = HermitianMetricField::conformal(&d, &d.sample(f));
        let r = compute_e(&alpha, 1e-12).unwrap();
        // z_0 = x0 + i x1, z_1 = x2 + i x3; f depends on Re z_0 and Im z_1
        // ∂_0 = ½∂x0, ∂̄_0 = ½∂x0 on such f; ∂_1 = -i/2 ∂x3, ∂̄_1 = i/2 ∂x3
        let mut worst: f64 = 0.0;
        for p in 0..d.num_points() {
            let x = d.coords(p);
            let fv = f(&x);
            let (c0, s0, c3) = (x[0].cos(), x[0].sin(), (x[0] - x[3]).cos());
            let s03 = (x[0] - x[3]).sin();
            let f0 = -0.3 * s0 + 0.2 * c3;
            let f3 = -0.2 * c3;
            let f00 = -0.3 * c0 - 0.2 * s03;
            let f33 = -0.2 * s03;
            let f03 = 0.2 * s03;
            // derivatives of e^f: (e^f)_{ab} = e^f (f_ab + f_a f_b)
            let ef = fv.exp();
            let (g00, g33, g03) = (ef * (f00 + f0 * f0), ef * (f33 + f3 * f3), ef * (f03 + f0 * f3));
            let h = [
                [C64::new(0.25 * g00, 0.0), C64::new(0.0, 0.25) * g03],
                [C64::new(0.0, -0.25) * g03, C64::new(0.25 * g33, 0.0)],
            ];
            let tr = h[0][0] + h[1][1];
            let idx = [0usize, 1];
            for (a, &j) in idx.iter().enumerate() {
                for (b, &k) in idx.iter().enumerate() {
                    let delta = if a == b { tr } else { C64::new(0.0, 0.0) };
                    let want = (delta - h[a][b]) * (0.5 / ef);
                    worst = worst.max((r.e[j * 3 + k][p] - want).norm());
                }
            }
            let want22 = tr * (0.5 / ef);
            worst = worst.max((r.e[2 * 3 + 2][p] - want22).norm());
        }
        assert!(worst < 1e-8, "worst {worst}");
        assert!(r.trace_discrepancy < 1e-8, "{}", r.trace_discrepancy);
    }
}
