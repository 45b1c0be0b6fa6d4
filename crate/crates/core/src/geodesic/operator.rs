use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::{cholesky, hermitian_eigenvalues, CMat};
use crate::geometry::{HermitianMetricField, MetricOperators};
use crate::grid::{kahan_sum, C64};

use super::{ContinuityProblem, GeodesicError, SpaceTimeField};

/// Pointwise coefficients at one interior time level.
#[derive(Debug, Clone)]
pub struct LevelCoefficients {
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub phi_tt: Vec<f64>,
    /// `A = n + nXφ + Δφ`.
    pub a: Vec<f64>,
    /// `|∇φ_t|²`.
    pub grad_t_sq: Vec<f64>,
    /// `G = φ_tt A - |∇φ_t|²`.
    pub g: Vec<f64>,
    /// `L = ε - nXφ_t²/2`.
    pub l: Vec<f64>,
    pub(crate) grad_t: Vec<Vec<f64>>,
}

/// `A`, `G`, `L` on all interior time levels.
#[derive(Debug, Clone)]
pub struct OperatorCoefficients {
    /// Entry `m - 1` holds level `m`.
    pub levels: Vec<LevelCoefficients>,
}

/// Smallest values of the cone quantities; the `s`-cone reduces to `(φ_tt, A, G)` at `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConeMargins {
    pub min_a: f64,
    pub min_phi_tt: f64,
    pub min_g: f64,
    pub min_l: f64,
    /// `min (sφ_tt + 1 - s)`.
    pub min_cone_tt: f64,
    /// `min (sA + 1 - s)`.
    pub min_cone_a: f64,
    /// `min [(sφ_tt + 1 - s)(sA + 1 - s) - s²|∇φ_t|²]`.
    pub min_cone_g: f64,
}

fn min_of<'a, I: Iterator<Item = &'a f64>>(it: I) -> f64 {
    it.copied().fold(f64::INFINITY, f64::min)
}

impl OperatorCoefficients {
    pub fn compute(phi: &SpaceTimeField, prob: &ContinuityProblem) -> Self {
        let nt = phi.nt();
        let h = phi.dt();
        let n = prob.n() as f64;
        let ops = prob.ops();
        let x = prob.x();
        let levels = (1..nt)
            .into_par_iter()
            .map(|m| {
                let (prev, cur, next) = (phi.level(m - 1), phi.level(m), phi.level(m + 1));
                let phi_t: Vec<f64> = next.iter().zip(prev).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let phi_tt: Vec<f64> = (0..cur.len()).map(|i| (next[i] - 2.0 * cur[i] + prev[i]) / (h * h)).collect();
                let lap = ops.laplacian(cur);
                let a: Vec<f64> = (0..cur.len()).map(|i| n + n * x[i] * cur[i] + lap[i]).collect();
                let grad_t = ops.gradient(&phi_t);
                let grad_t_sq = ops.grad_pair_from(&grad_t, &grad_t);
                let g = (0..cur.len()).map(|i| phi_tt[i] * a[i] - grad_t_sq[i]).collect();
                let l = (0..cur.len()).map(|i| prob.eps() - 0.5 * n * x[i] * phi_t[i] * phi_t[i]).collect();
                LevelCoefficients { phi: cur.to_vec(), phi_t, phi_tt, a, grad_t_sq, g, l, grad_t }
            })
            .collect();
        Self { levels }
    }

    pub fn margins(&self, s: f64) -> ConeMargins {
        let all = |f: &dyn Fn(&LevelCoefficients) -> f64| self.levels.iter().map(f).fold(f64::INFINITY, f64::min);
        ConeMargins {
            min_a: all(&|l| min_of(l.a.iter())),
            min_phi_tt: all(&|l| min_of(l.phi_tt.iter())),
            min_g: all(&|l| min_of(l.g.iter())),
            min_l: all(&|l| min_of(l.l.iter())),
            min_cone_tt: all(&|l| min_of(l.phi_tt.iter()).mul_add(s, 1.0 - s)),
            min_cone_a: all(&|l| min_of(l.a.iter()).mul_add(s, 1.0 - s)),
            min_cone_g: all(&|l| {
                (0..l.a.len())
                    .map(|i| (s * l.phi_tt[i] + 1.0 - s) * (s * l.a[i] + 1.0 - s) - s * s * l.grad_t_sq[i])
                    .fold(f64::INFINITY, f64::min)
            }),
        }
    }

    /// First `(index, level)` outside the `s`-cone, if any.
    pub fn first_cone_violation(&self, s: f64) -> Option<(usize, usize)> {
        for (k, l) in self.levels.iter().enumerate() {
            for i in 0..l.a.len() {
                let ctt = s * l.phi_tt[i] + 1.0 - s;
                let ca = s * l.a[i] + 1.0 - s;
                if !(ctt > 0.0 && ca > 0.0 && ctt * ca - s * s * l.grad_t_sq[i] > 0.0) {
                    return Some((i, k + 1));
                }
            }
        }
        None
    }

    /// Residual of `P_s` on interior level `m`.
    fn residual_level(&self, m: usize, prob: &ContinuityProblem) -> Vec<f64> {
        let c = &self.levels[m - 1];
        let s = prob.s();
        let n = prob.n() as f64;
        let x = prob.x();
        let r = prob.forcing().map(|f| f[m].as_slice());
        (0..c.a.len())
            .map(|i| {
                let v = s * c.g[i] + (1.0 - s) * (c.phi_tt[i] + c.a[i]) - prob.eps()
                    + 0.5 * n * s * x[i] * c.phi_t[i] * c.phi_t[i];
                v - r.map_or(0.0, |r| r[i])
            })
            .collect()
    }
}

/// Residual of `P_s` at every time level; boundary rows are zero.
pub fn operator_f(phi: &SpaceTimeField, prob: &ContinuityProblem) -> Result<Vec<Vec<f64>>, GeodesicError> {
    prob.check_field(phi)?;
    Ok(residual_unchecked(phi, prob))
}

pub(crate) fn residual_unchecked(phi: &SpaceTimeField, prob: &ContinuityProblem) -> Vec<Vec<f64>> {
    let coef = OperatorCoefficients::compute(phi, prob);
    let np = phi.domain().num_points();
    let nt = phi.nt();
    let mut out = vec![vec![0.0; np]; nt + 1];
    for m in 1..nt {
        out[m] = coef.residual_level(m, prob);
    }
    out
}

/// Directional derivative of `P_s` at `φ` along `u` (`u` vanishes on the boundary slices).
pub fn full_linearization(
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    u: &SpaceTimeField,
) -> Result<Vec<Vec<f64>>, GeodesicError> {
    prob.check_field(phi)?;
    if u.nt() != phi.nt() || u.phi0().iter().chain(u.phi1()).any(|v| *v != 0.0) {
        return Err(GeodesicError::Config("direction must vanish on the boundary slices".into()));
    }
    let coef = OperatorCoefficients::compute(phi, prob);
    let (s, n, h) = (prob.s(), prob.n() as f64, phi.dt());
    let ops = prob.ops();
    let x = prob.x();
    let nt = phi.nt();
    let mut out = vec![vec![0.0; x.len()]; nt + 1];
    for m in 1..nt {
        let c = &coef.levels[m - 1];
        let (um, u0, up) = (u.level(m - 1), u.level(m), u.level(m + 1));
        let u_t: Vec<f64> = up.iter().zip(um).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let lap = ops.laplacian(u0);
        let pair = ops.grad_pair_from(&c.grad_t, &ops.gradient(&u_t));
        out[m] = (0..x.len())
            .map(|i| {
                let u_tt = (up[i] - 2.0 * u0[i] + um[i]) / (h * h);
                let da = n * x[i] * u0[i] + lap[i];
                s * (u_tt * c.a[i] + c.phi_tt[i] * da - 2.0 * pair[i])
                    + (1.0 - s) * (u_tt + da)
                    + n * s * x[i] * c.phi_t[i] * u_t[i]
            })
            .collect();
    }
    Ok(out)
}

/// Dense Jacobian blocks `(lower, diag, upper)` of interior level `m`.
pub(crate) fn jacobian_blocks(
    coef: &OperatorCoefficients,
    m: usize,
    prob: &ContinuityProblem,
    h: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let c = &coef.levels[m - 1];
    let (s, n) = (prob.s(), prob.n() as f64);
    let ops = prob.ops();
    let x = prob.x();
    let np = x.len();
    let lap = ops.dense_laplacian();
    let w = if s > 0.0 { ops.dense_gradient_pairing(&c.grad_t) * 2.0 } else { DMatrix::zeros(np, np) };
    let (h2, h1) = (1.0 / (h * h), 1.0 / (2.0 * h));
    let mut lower = &w * (s * h1);
    let mut upper = &w * (-s * h1);
    let mut diag = DMatrix::zeros(np, np);
    for i in 0..np {
        let drift = n * s * x[i] * c.phi_t[i] * h1;
        let coupling = s * c.a[i] * h2 + (1.0 - s) * h2;
        lower[(i, i)] += coupling - drift;
        upper[(i, i)] += coupling + drift;
        let row_scale = s * c.phi_tt[i] + (1.0 - s);
        for j in 0..np {
            diag[(i, j)] = row_scale * lap[(i, j)];
        }
        diag[(i, i)] += -2.0 * (s * c.a[i] + 1.0 - s) * h2 + row_scale * n * x[i];
    }
    (lower, diag, upper)
}

/// `(n+1)×(n+1)` symbol with first row `(A, -v̄)` and diagonal `φ_tt`.
pub fn symbol_matrix(a: f64, phi_tt: f64, v: &[C64]) -> CMat {
    let k = v.len();
    let mut m = CMat::zeros(k + 1, k + 1);
    m[(0, 0)] = C64::new(a, 0.0);
    for j in 0..k {
        m[(0, j + 1)] = -v[j].conj();
        m[(j + 1, 0)] = -v[j];
        m[(j + 1, j + 1)] = C64::new(phi_tt, 0.0);
    }
    m
}

#[derive(Debug, Clone)]
pub struct SymbolReport {
    pub matrix: CMat,
    pub eigenvalues: Vec<f64>,
    pub margin: f64,
}

/// Principal symbol at grid point `index` and interior level `level`, in a unitary frame of the metric.
pub fn principal_symbol(
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    index: usize,
    level: usize,
) -> Result<SymbolReport, GeodesicError> {
    prob.check_field(phi)?;
    if level == 0 || level >= phi.nt() {
        return Err(GeodesicError::Config(format!("level {level} is not interior")));
    }
    let coef = OperatorCoefficients::compute(phi, prob);
    Ok(symbol_from(&coef, prob, index, level))
}

pub(crate) fn symbol_from(coef: &OperatorCoefficients, prob: &ContinuityProblem, index: usize, level: usize) -> SymbolReport {
    let c = &coef.levels[level - 1];
    let d = prob.metric().domain();
    let dphi = d.holo_gradient(&c.phi_t);
    let grad: Vec<C64> = dphi.iter().map(|f| f[index]).collect();
    let l = cholesky(&prob.metric().matrix_at(index)).expect("positive-definite metric");
    let v = l.solve_lower_triangular(&nalgebra::DVector::from_vec(grad)).expect("invertible factor");
    let matrix = symbol_matrix(c.a[index], c.phi_tt[index], v.as_slice());
    let eigenvalues = hermitian_eigenvalues(&matrix);
    SymbolReport { margin: eigenvalues[0], eigenvalues, matrix }
}

/// Smallest symbol eigenvalue over all interior points.
pub fn ellipticity_margin(phi: &SpaceTimeField, prob: &ContinuityProblem) -> Result<f64, GeodesicError> {
    prob.check_field(phi)?;
    let coef = OperatorCoefficients::compute(phi, prob);
    let np = phi.domain().num_points();
    Ok((1..phi.nt())
        .into_par_iter()
        .map(|m| (0..np).map(|i| symbol_from(&coef, prob, i, m).margin).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min))
}

/// Normalized energy `∫₀¹ ⨍_M φ_t² (1 + Δφ/n + Xφ) ω^n dt` (trapezoid rule in time).
pub fn energy(path: &SpaceTimeField, g: &HermitianMetricField, p: usize) -> Result<f64, GeodesicError> {
    let x = g.compute_x(p)?.direct;
    energy_with(path, &MetricOperators::new(g), &x, &g.det())
}

/// Energy with precomputed operators, `X` and volume weights.
pub fn energy_with(path: &SpaceTimeField, ops: &MetricOperators, x: &[f64], weights: &[f64]) -> Result<f64, GeodesicError> {
    let n = path.domain().n() as f64;
    let phi_t = path.phi_t();
    let total_w = kahan_sum(weights.iter().copied());
    let mut per_level = Vec::with_capacity(path.nt() + 1);
    for (m, pt) in phi_t.iter().enumerate() {
        let phi = path.level(m);
        let lap = ops.laplacian(phi);
        let mut vals = Vec::with_capacity(phi.len());
        for i in 0..phi.len() {
            let pos = 1.0 + lap[i] / n + x[i] * phi[i];
            if !(pos > 0.0) {
                return Err(GeodesicError::Positivity { point: path.point(i, m), value: pos });
            }
            vals.push(pt[i] * pt[i] * pos * weights[i]);
        }
        per_level.push(kahan_sum(vals) / total_w);
    }
    let nt = path.nt();
    let inner = kahan_sum(per_level[1..nt].iter().copied());
    Ok(path.dt() * (inner + 0.5 * (per_level[0] + per_level[nt])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiffScheme, GridDomain};
    use std::f64::consts::PI;

    fn flat_problem(eps: f64, res: usize) -> ContinuityProblem {
        let d = GridDomain::uniform(3, 2.0 * PI, res, vec![0, 2], DiffScheme::Spectral).unwrap();
        let z = vec![0.0; d.num_points()];
        ContinuityProblem::new(HermitianMetricField::flat(&d), 2, eps, z.clone(), z).unwrap()
    }

    #[test]
    fn exact_s0_solution_has_zero_residual() {
        let prob = flat_problem(0.1, 4).at_s(0.0);
        let d = prob.metric().domain().clone();
        let phi = SpaceTimeField::from_fn(&d, 16, |_, t| 0.5 * (0.1 - 3.0) * t * (t - 1.0));
        let r = operator_f(&phi, &prob).unwrap();
        assert!(r.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!((phi.level(8)[0] - 0.3625).abs() < 1e-15);
    }

    #[test]
    fn linear_path_residual_is_minus_l() {
        let d = GridDomain::uniform(3, 2.0 * PI, 8, vec![0, 2], DiffScheme::Spectral).unwrap();
        let w = d.sample(|x| 0.3 * x[0].cos());
        let x = d.sample(|p| -0.1 - 0.05 * p[2].sin());
        let prob = ContinuityProblem::with_x(HermitianMetricField::flat(&d), 2, 0.2, w.clone(), w.clone(), x.clone()).unwrap();
        let phi = SpaceTimeField::linear(&d, 8, &w, &w);
        let r = operator_f(&phi, &prob).unwrap();
        let coef = OperatorCoefficients::compute(&phi, &prob);
        for m in 1..8 {
            for i in 0..w.len() {
                assert!((r[m][i] + coef.levels[m - 1].l[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linearization_reduces_to_principal_part() {
        // X = 0 and φ_t spatially constant: L u = A u_tt + φ_tt Δu
        let prob = flat_problem(0.1, 8);
        let d = prob.metric().domain().clone();
        let phi = SpaceTimeField::from_fn(&d, 16, |_, t| t * t - t);
        let u = SpaceTimeField::from_fn(&d, 16, |x, t| t * (1.0 - t) * x[0].cos());
        let lu = full_linearization(&phi, &prob, &u).unwrap();
        let coef = OperatorCoefficients::compute(&phi, &prob);
        for m in 1..16 {
            let c = &coef.levels[m - 1];
            let lap = prob.ops().laplacian(u.level(m));
            let utt = u.phi_tt_at(m);
            for i in 0..lap.len() {
                assert!((lu[m][i] - (c.a[i] * utt[i] + c.phi_tt[i] * lap[i])).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn symbol_closed_forms() {
        let m = symbol_matrix(3.0, 1.0, &[C64::new(0.0, 0.0); 3]);
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[3] - 3.0).abs() < 1e-14);
        let ev = hermitian_eigenvalues(&symbol_matrix(2.0, 1.0, &[C64::new(0.6, 0.8)]));
        assert!((ev[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((ev[0] - 0.381966).abs() < 1e-6);
        assert!((ev[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn energy_of_simple_paths() {
        let d = GridDomain::uniform(2, 1.0, 4, vec![0], DiffScheme::Spectral).unwrap();
        let g = HermitianMetricField::flat(&d);
        let c = SpaceTimeField::linear(&d, 8, &vec![1.5; 4], &vec![1.5; 4]);
        assert_eq!(energy(&c, &g, 2).unwrap(), 0.0);
        let lin = SpaceTimeField::linear(&d, 8, &vec![0.0; 4], &vec![2.0; 4]);
        assert!((energy(&lin, &g, 2).unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn energy_reports_first_positivity_failure() {
        let d = GridDomain::uniform(2, 2.0 * PI, 8, vec![0], DiffScheme::Spectral).unwrap();
        let g = HermitianMetricField::flat(&d);
        // Δ(-24 t cos x) / 2 = 3 t cos x, so 1 + Δφ/n fails once t cos x ≤ -1/3
        let path = SpaceTimeField::from_fn(&d, 10, |x, t| -24.0 * t * x[0].cos());
        match energy(&path, &g, 2) {
            Err(GeodesicError::Positivity { point, value }) => {
                assert!(value <= 0.0);
                assert_eq!(point.level, 4);
                assert!((point.coords[0] - PI).abs() < 1e-12);
            }
            other => panic!("expected a positivity failure, got {other:?}"),
        }
    }
}
