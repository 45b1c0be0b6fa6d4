use std::fmt::Debug;
use std::sync::Arc;

use super::astheno::{alpha_trace, compute_e, entries_at, AsthenoReport};
use super::CyError;
use crate::algebra::{cholesky, relative_eigenvalues};
use crate::geometry::{ComplexForm, HermitianMetricField};
use crate::grid::C64;

/// Gradient term `χ(∂u, ∂̄u)`; must be linear in `u`.
pub trait ChiPlugin: Debug + Send + Sync {
    fn name(&self) -> &str;
    /// Entries `χ[j*n+k]` of the `(1,1)`-form for the field `u`.
    fn apply(&self, alpha: &HermitianMetricField, u: &[f64]) -> Vec<Vec<C64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroChi;

impl ChiPlugin for ZeroChi {
    fn name(&self) -> &str {
        "none"
    }

    fn apply(&self, alpha: &HermitianMetricField, _u: &[f64]) -> Vec<Vec<C64>> {
        let n = alpha.n();
        vec![vec![C64::new(0.0, 0.0); alpha.domain().num_points()]; n * n]
    }
}

/// First-order part of `⋆i∂∂̄(u α^{n-2})/(n-1)!`, so that `ω̃_u = ⋆ω_u^{n-1}/(n-1)!`.
#[derive(Debug, Clone, Default)]
pub struct ExactChi;

impl ChiPlugin for ExactChi {
    fn name(&self) -> &str {
        "exact"
    }

    fn apply(&self, alpha: &HermitianMetricField, u: &[f64]) -> Vec<Vec<C64>> {
        let n = alpha.n();
        let a = alpha.kahler_form().wedge_power(n - 2).expect("degree fits");
        let full = a.mul_real_field(u).i_ddbar();
        let second = ComplexForm::real_scalar(alpha.domain(), u).i_ddbar().wedge(&a).expect("degree fits");
        let zeroth = a.i_ddbar().mul_real_field(u);
        let grad = &(&full - &second) - &zeroth;
        let scale = 1.0 / (1..n).map(|v| v as f64).product::<f64>();
        alpha.hodge_star(&grad).scale(C64::new(scale, 0.0)).hermitian_entries()
    }
}

pub fn chi_plugin(name: &str) -> Result<Arc<dyn ChiPlugin>, CyError> {
    match name {
        "none" | "zero" => Ok(Arc::new(ZeroChi)),
        "exact" => Ok(Arc::new(ExactChi)),
        other => Err(CyError::UnknownChi(other.into())),
    }
}

/// `det(ω̃_u) = e^{ψ+b} det α` with `ω̃_u = ω_h + (Δ_α u α - i∂∂̄u)/(n-1) + χ + E u`.
#[derive(Debug, Clone)]
pub struct CyProblem {
    pub(crate) alpha: Arc<HermitianMetricField>,
    pub(crate) omega: Arc<HermitianMetricField>,
    pub(crate) psi: Vec<f64>,
    pub(crate) chi: Arc<dyn ChiPlugin>,
    pub(crate) astheno: Arc<AsthenoReport>,
    pub(crate) omega_h: Arc<Vec<Vec<C64>>>,
    pub(crate) log_det_alpha: Arc<Vec<f64>>,
}

/// `ω̃_u` and the equation residual at one iterate.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Entries `ω̃[j*n+k]`.
    pub tilde: Vec<Vec<C64>>,
    /// `log det ω̃_u - ψ - b - log det α`; `NaN` where `ω̃_u` is not positive.
    pub residual: Vec<f64>,
    /// Smallest eigenvalue of `ω̃_u` against `α`.
    pub margin: f64,
    pub margin_point: usize,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl CyProblem {
    /// `balanced_tol` bounds `sup |dω^{n-1}|`.
    pub fn new(
        alpha: HermitianMetricField,
        omega: HermitianMetricField,
        psi: Vec<f64>,
        chi: Arc<dyn ChiPlugin>,
        balanced_tol: f64,
    ) -> Result<Self, CyError> {
        let n = alpha.n();
        if n < 3 {
            return Err(CyError::DimensionTooSmall { n });
        }
        if alpha.domain() != omega.domain() || psi.len() != alpha.domain().num_points() {
            return Err(CyError::Config("α, ω and ψ must share one grid".into()));
        }
        let residual = omega.balanced_residual();
        if !(residual <= balanced_tol) {
            return Err(CyError::NotBalanced { residual, tol: balanced_tol });
        }
        let astheno = compute_e(&alpha, 1e-10)?;
        let wn = omega.kahler_form().wedge_power(n - 1)?;
        let omega_h = alpha.hodge_star(&wn).scale(C64::new(1.0 / factorial(n - 1), 0.0)).hermitian_entries();
        let log_det_alpha = alpha.log_det();
        Ok(Self {
            alpha: Arc::new(alpha),
            omega: Arc::new(omega),
            psi,
            chi,
            astheno: Arc::new(astheno),
            omega_h: Arc::new(omega_h),
            log_det_alpha: Arc::new(log_det_alpha),
        })
    }

    /// Problem whose target Chern-Ricci form is `Ric^C(ω) + i∂∂̄ρ`.
    pub fn from_rho(
        alpha: HermitianMetricField,
        omega: HermitianMetricField,
        rho: &[f64],
        chi: Arc<dyn ChiPlugin>,
        balanced_tol: f64,
    ) -> Result<Self, CyError> {
        let n1 = (alpha.n() - 1) as f64;
        let psi = omega
            .log_det()
            .iter()
            .zip(alpha.log_det())
            .zip(rho)
            .map(|((w, a), r)| n1 * (w - a - r))
            .collect();
        Self::new(alpha, omega, psi, chi, balanced_tol)
    }

    /// Manufactured instance: `ψ = log det ω̃_{u*} - log det α`, so `(u*, 0)` solves it.
    pub fn manufactured(
        alpha: HermitianMetricField,
        omega: HermitianMetricField,
        u_star: &[f64],
        chi: Arc<dyn ChiPlugin>,
        balanced_tol: f64,
    ) -> Result<Self, CyError> {
        let zero = vec![0.0; u_star.len()];
        let base = Self::new(alpha, omega, zero, chi, balanced_tol)?;
        let asm = base.assemble(u_star, 0.0);
        if asm.margin <= 0.0 {
            return Err(CyError::Config(format!("u* is outside the cone (margin {:.3e})", asm.margin)));
        }
        Ok(Self { psi: asm.residual, ..base })
    }

    pub fn with_psi(&self, psi: Vec<f64>) -> Self {
        Self { psi, ..self.clone() }
    }

    pub fn alpha(&self) -> &HermitianMetricField {
        &self.alpha
    }

    pub fn omega(&self) -> &HermitianMetricField {
        &self.omega
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn chi(&self) -> &dyn ChiPlugin {
        self.chi.as_ref()
    }

    pub fn astheno(&self) -> &AsthenoReport {
        &self.astheno
    }

    pub fn omega_h(&self) -> &[Vec<C64>] {
        &self.omega_h
    }

    pub fn log_det_alpha(&self) -> &[f64] {
        &self.log_det_alpha
    }

    /// Target `Ψ = Ric^C(α) - i∂∂̄ψ/(n-1)`, the Chern-Ricci form of any solution's `ω_u`.
    pub fn target_ricci(&self) -> ComplexForm {
        let d = self.alpha.domain();
        let n1 = (self.alpha.n() - 1) as f64;
        let s: Vec<f64> = self.log_det_alpha.iter().zip(&self.psi).map(|(a, p)| -(a + p / n1)).collect();
        ComplexForm::real_scalar(d, &s).i_ddbar()
    }

    /// The part of `ω̃_u - ω_h` that is linear in `u`.
    pub fn linear_part(&self, u: &[f64]) -> Vec<Vec<C64>> {
        let n = self.alpha.n();
        let d = self.alpha.domain();
        let h = d.complex_hessian(u);
        let flat_h: Vec<Vec<C64>> = (0..n * n).map(|jk| h[jk / n][jk % n].clone()).collect();
        let lap = alpha_trace(&self.alpha, &flat_h);
        let chi = self.chi.apply(&self.alpha, u);
        let inv = 1.0 / (n - 1) as f64;
        (0..n * n)
            .map(|jk| {
                let a = self.alpha.entry(jk / n, jk % n);
                (0..u.len())
                    .map(|p| (a[p] * lap[p] - flat_h[jk][p]) * inv + chi[jk][p] + self.astheno.e[jk][p] * u[p])
                    .collect()
            })
            .collect()
    }

    pub fn assemble(&self, u: &[f64], b: f64) -> Assembly {
        let n = self.alpha.n();
        let lin = self.linear_part(u);
        let tilde: Vec<Vec<C64>> =
            lin.iter().zip(self.omega_h.iter()).map(|(l, h)| l.iter().zip(h).map(|(a, b)| a + b).collect()).collect();
        let mut residual = Vec::with_capacity(u.len());
        let mut margin = (f64::INFINITY, 0);
        for p in 0..u.len() {
            let m = entries_at(&tilde, n, p);
            let ev = relative_eigenvalues(&m, &self.alpha.matrix_at(p)).expect("α is positive");
            if !(ev[0] >= margin.0) {
                margin = (ev[0], p);
            }
            let logdet = cholesky(&((&m + m.adjoint()) * C64::new(0.5, 0.0)))
                .map(|l| 2.0 * l.diagonal().iter().map(|v| v.re.ln()).sum::<f64>());
            residual.push(match logdet {
                Some(ld) => ld - self.psi[p] - b - self.log_det_alpha[p],
                None => f64::NAN,
            });
        }
        Assembly { tilde, residual, margin: margin.0, margin_point: margin.1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiffScheme, GridDomain};
    use std::f64::consts::PI;

    fn domain() -> GridDomain {
        GridDomain::uniform(3, 2.0 * PI, 12, vec![0, 2], DiffScheme::Spectral).unwrap()
    }

    #[test]
    fn zero_field_gives_omega_h() {
        let d = domain();
        let flat = HermitianMetricField::flat(&d);
        let psi = d.sample(|x| 0.2 * x[0].sin());
        let prob = CyProblem::new(flat.clone(), flat, psi.clone(), Arc::new(ZeroChi), 1e-10).unwrap();
        let asm = prob.assemble(&vec![0.0; d.num_points()], 0.0);
        for (r, p) in asm.residual.iter().zip(&psi) {
            assert!((r + p).abs() < 1e-13);
        }
        assert!((asm.margin - 1.0).abs() < 1e-13);
    }

    #[test]
    fn residual_at_zero_matches_direct_determinant() {
        let d = domain();
        let f = d.sample(|x| 0.4 * x[0].cos() + 0.3 * (x[0] + x[2]).sin());
        let omega = HermitianMetricField::balanced_root(&d, &f).unwrap();
        let alpha = HermitianMetricField::conformal(&d, &d.sample(|x| 0.2 * x[2].cos()));
        let prob = CyProblem::new(alpha.clone(), omega, vec![0.0; d.num_points()], Arc::new(ZeroChi), 1e-8).unwrap();
        let asm = prob.assemble(&vec![0.0; d.num_points()], 0.3);
        let la = alpha.log_det();
        for p in 0..d.num_points() {
            let det = entries_at(prob.omega_h(), 3, p).determinant().re;
            assert!((asm.residual[p] - (det.ln() - 0.3 - la[p])).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_of_second_order_block() {
        // tr_α [Δ_α u α - i∂∂̄u] = (n-1) Δ_α u
        let d = domain();
        let alpha = HermitianMetricField::conformal(&d, &d.sample(|x| 0.3 * (x[0] - x[2]).cos()));
        let u = d.sample(|x| (x[0] + 2.0 * x[2]).sin() + 0.5 * x[0].cos());
        let h = d.complex_hessian(&u);
        let flat_h: Vec<Vec<C64>> = (0..9).map(|jk| h[jk / 3][jk % 3].clone()).collect();
        let lap = alpha_trace(&alpha, &flat_h);
        let block: Vec<Vec<C64>> = (0..9)
            .map(|jk| {
                let a = alpha.entry(jk / 3, jk % 3);
                (0..u.len()).map(|p| a[p] * lap[p] - flat_h[jk][p]).collect()
            })
            .collect();
        let tr = alpha_trace(&alpha, &block);
        for (t, l) in tr.iter().zip(&lap) {
            assert!((t - 2.0 * l).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_chi_reconstructs_the_star_of_the_perturbed_form() {
        let d = domain();
        let alpha = HermitianMetricField::conformal(&d, &d.sample(|x| 0.3 * x[0].cos() + 0.1 * x[2].sin()));
        let omega = HermitianMetricField::flat(&d);
        let u = d.sample(|x| 0.1 * (x[0] + x[2]).cos());
        let prob = CyProblem::new(alpha.clone(), omega.clone(), vec![0.0; u.len()], Arc::new(ExactChi), 1e-10).unwrap();
        let tilde = prob.assemble(&u, 0.0).tilde;
        let a = alpha.kahler_form().wedge_power(1).unwrap();
        let theta = &omega.kahler_form().wedge_power(2).unwrap() + &a.mul_real_field(&u).i_ddbar();
        let want = alpha.hodge_star(&theta).scale(C64::new(0.5, 0.0)).hermitian_entries();
        let err = tilde.iter().flatten().zip(want.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        // χ is linear
        let c1 = ExactChi.apply(&alpha, &u);
        let u2: Vec<f64> = u.iter().map(|v| 2.5 * v).collect();
        let c2 = ExactChi.apply(&alpha, &u2);
        for (a, b) in c1.iter().flatten().zip(c2.iter().flatten()) {
            assert!((a * 2.5 - b).norm() < 1e-12);
        }
    }
}
