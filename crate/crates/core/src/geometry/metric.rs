use rayon::prelude::*;

use crate::algebra::{change_frame, cholesky, flat_volume_coefficient, star_orthonormal, Basis, CMat};
use crate::grid::{GridDomain, C64};

use super::{ComplexForm, GeometryError};

/// Pointwise Hermitian matrix field `g_{jk̄}`; the metric form is `ω = i g_{jk̄} dz_j∧dz̄_k`.
#[derive(Debug, Clone)]
pub struct HermitianMetricField {
    domain: GridDomain,
    /// Entry `(j,k)` at index `j*n+k`, one field per entry.
    g: Vec<Vec<C64>>,
}

/// Pointwise value of `1 + Δφ/n + Xφ` and its wedge-based counterpart.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub value: Vec<f64>,
    pub wedge_value: Vec<f64>,
    pub positive: Vec<bool>,
    pub margin: f64,
    pub discrepancy: f64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl HermitianMetricField {
    /// Wraps entry fields after checking Hermitian symmetry and positivity.
    pub fn new(domain: &GridDomain, g: Vec<Vec<C64>>) -> Result<Self, GeometryError> {
        let n = domain.n();
        assert_eq!(g.len(), n * n);
        let mut g = g;
        // enforce exact Hermitian symmetry
        for j in 0..n {
            let d: Vec<C64> = g[j * n + j].iter().map(|v| C64::new(v.re, 0.0)).collect();
            g[j * n + j] = d;
            for k in j + 1..n {
                let avg: Vec<C64> = g[j * n + k]
                    .iter()
                    .zip(&g[k * n + j])
                    .map(|(a, b)| 0.5 * (a + b.conj()))
                    .collect();
                g[k * n + j] = avg.iter().map(|v| v.conj()).collect();
                g[j * n + k] = avg;
            }
        }
        let m = Self { domain: domain.clone(), g };
        m.check_positive()?;
        Ok(m)
    }

    pub fn flat(domain: &GridDomain) -> Self {
        Self::conformal_unchecked(domain, &vec![0.0; domain.num_points()])
    }

    fn conformal_unchecked(domain: &GridDomain, f: &[f64]) -> Self {
        let n = domain.n();
        let zero = vec![C64::new(0.0, 0.0); domain.num_points()];
        let mut g = vec![zero; n * n];
        for j in 0..n {
            g[j * n + j] = f.iter().map(|v| C64::new(v.exp(), 0.0)).collect();
        }
        Self { domain: domain.clone(), g }
    }

    /// `e^f δ_{jk}`.
    pub fn conformal(domain: &GridDomain, f: &[f64]) -> Self {
        Self::conformal_unchecked(domain, f)
    }

    /// `δ_{jk} + ∂_j∂_k̄ ρ`, the Kähler metric `ω_flat + i∂∂̄ρ`.
    ///
    /// Built with the form-level `∂∂̄` so that `dω = 0` holds exactly for the discrete operators.
    pub fn kahler_perturbed(domain: &GridDomain, rho: &[f64]) -> Result<Self, GeometryError> {
        let form = &Self::flat(domain).kahler_form() + &ComplexForm::real_scalar(domain, rho).i_ddbar();
        Self::from_form(&form)
    }

    /// Root of `Q = ω_flat^{n-1} + i∂∂̄(f ω_flat^{n-2})`, a balanced and generally non-Kähler metric.
    pub fn balanced_root(domain: &GridDomain, f: &[f64]) -> Result<Self, GeometryError> {
        let n = domain.n();
        let flat = Self::flat(domain).kahler_form();
        let base = flat.wedge_power(n - 1)?;
        let pot = flat.wedge_power(n - 2)?.mul_real_field(f).i_ddbar();
        Self::michelsohn_root(&(&base + &pot))
    }

    /// Metric whose Kähler form is the given real `(1,1)`-form.
    pub fn from_form(form: &ComplexForm) -> Result<Self, GeometryError> {
        if form.bidegree() != (1, 1) {
            return Err(GeometryError::Bidegree { expected: (1, 1), got: form.bidegree() });
        }
        Self::new(form.domain(), form.hermitian_entries())
    }

    /// The unique positive `ω` with `ω^{n-1} = Q`.
    ///
    /// With `M_{jk}` defined by `(i dz_j∧dz̄_k)∧Q = M_{jk}·ω_flat^n/n!`, one has
    /// `M = (n-1)! det(g) g^{-T}`, which inverts pointwise.
    pub fn michelsohn_root(q: &ComplexForm) -> Result<Self, GeometryError> {
        let domain = q.domain().clone();
        let n = domain.n();
        if q.bidegree() != (n - 1, n - 1) {
            return Err(GeometryError::Bidegree { expected: (n - 1, n - 1), got: q.bidegree() });
        }
        let vol = flat_volume_coefficient(n);
        let scale = 1.0 / factorial(n - 1);
        let mut m = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let e = ComplexForm::basis_element(&domain, &[j], &[k]).scale(C64::i());
                let top = e.wedge(q)?;
                m.push(top.top_coefficient().iter().map(|v| v / vol * scale).collect::<Vec<_>>());
            }
        }
        let np = domain.num_points();
        let mats: Vec<Result<CMat, GeometryError>> = (0..np)
            .into_par_iter()
            .map(|p| {
                let mp = CMat::from_fn(n, n, |j, k| m[j * n + k][p]);
                let mp = (&mp + mp.adjoint()) * C64::new(0.5, 0.0);
                let not_pos = || GeometryError::NotPositive { point: p, coords: domain.coords(p) };
                let l = cholesky(&mp).ok_or_else(not_pos)?;
                let det: f64 = l.diagonal().iter().map(|v| v.re * v.re).product();
                let inv = mp.try_inverse().ok_or_else(not_pos)?;
                Ok(inv.transpose() * C64::new(det.powf(1.0 / (n as f64 - 1.0)), 0.0))
            })
            .collect();
        let mut g = vec![vec![C64::new(0.0, 0.0); np]; n * n];
        for (p, r) in mats.into_iter().enumerate() {
            let mat = r?;
            for j in 0..n {
                for k in 0..n {
                    g[j * n + k][p] = mat[(j, k)];
                }
            }
        }
        Self::new(&domain, g)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn entry(&self, j: usize, k: usize) -> &[C64] {
        &self.g[j * self.n() + k]
    }

    pub fn entries(&self) -> &[Vec<C64>] {
        &self.g
    }

    pub fn matrix_at(&self, p: usize) -> CMat {
        let n = self.n();
        CMat::from_fn(n, n, |j, k| self.g[j * n + k][p])
    }

    pub fn matrices(&self) -> Vec<CMat> {
        (0..self.domain.num_points()).into_par_iter().map(|p| self.matrix_at(p)).collect()
    }

    fn check_positive(&self) -> Result<(), GeometryError> {
        let bad = (0..self.domain.num_points())
            .into_par_iter()
            .find_first(|&p| cholesky(&self.matrix_at(p)).is_none());
        match bad {
            Some(p) => Err(GeometryError::NotPositive { point: p, coords: self.domain.coords(p) }),
            None => Ok(()),
        }
    }

    /// Smallest eigenvalue over all grid points.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrices()
            .par_iter()
            .map(|m| crate::algebra::hermitian_eigenvalues(m)[0])
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn det(&self) -> Vec<f64> {
        self.matrices().par_iter().map(|m| m.determinant().re).collect()
    }

    pub fn log_det(&self) -> Vec<f64> {
        self.det().iter().map(|d| d.ln()).collect()
    }

    /// Entry fields of `g^{-1}`: `(j,k)` holds `(G^{-1})_{jk}`.
    pub fn inverse_entries(&self) -> Vec<Vec<C64>> {
        let n = self.n();
        let inv: Vec<CMat> = self
            .matrices()
            .into_par_iter()
            .map(|m| m.try_inverse().expect("positive-definite metric"))
            .collect();
        let mut out = vec![vec![C64::new(0.0, 0.0); inv.len()]; n * n];
        for (p, m) in inv.iter().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    out[j * n + k][p] = m[(j, k)];
                }
            }
        }
        out
    }

    /// `ω = i g_{jk̄} dz_j∧dz̄_k` as a `(1,1)`-form.
    pub fn kahler_form(&self) -> ComplexForm {
        ComplexForm::from_hermitian(&self.domain, &self.g)
    }

    /// Hodge star of this metric, normalized so that `⋆(ω^k/k!) = ω^{n-k}/(n-k)!`.
    pub fn hodge_star(&self, f: &ComplexForm) -> ComplexForm {
        assert_eq!(f.domain(), &self.domain);
        let n = self.n();
        let (p, q) = f.bidegree();
        let in_basis = f.basis().clone();
        let out_basis = Basis::new(n, n - q, n - p);
        let np = self.domain.num_points();
        let columns: Vec<Vec<C64>> = (0..np)
            .into_par_iter()
            .map(|pt| {
                let l = cholesky(&self.matrix_at(pt)).expect("positive-definite metric");
                let lt = l.transpose();
                let pmat = lt.clone().try_inverse().expect("invertible factor");
                let framed = change_frame(&in_basis, &f.at_point(pt), &pmat);
                let (ob, starred) = star_orthonormal(&in_basis, &framed);
                change_frame(&ob, &starred, &lt)
            })
            .collect();
        let mut out = ComplexForm::zero(&self.domain, n - q, n - p);
        for (pt, c) in columns.iter().enumerate() {
            out.set_point(pt, c);
        }
        debug_assert_eq!(out.basis(), &out_basis);
        out
    }

    /// `ω^n` top coefficient divided by the flat one; equals `n!·det g`.
    pub fn volume_ratio(&self) -> Vec<f64> {
        let nf = factorial(self.n());
        self.det().iter().map(|d| d * nf).collect()
    }

    /// `Δf = tr_ω(i∂∂̄f) = g^{jk̄}∂_j∂_k̄ f`.
    pub fn chern_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        let h = self.domain.complex_hessian(f);
        let inv = self.inverse_entries();
        (0..f.len())
            .map(|p| {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        s += inv[k * n + j][p] * h[j][k][p];
                    }
                }
                s.re
            })
            .collect()
    }

    /// `|∇f|² = g^{jk̄} ∂_j f ∂_k̄ f` for a real field.
    pub fn grad_norm_sq(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        let d = self.domain.holo_gradient(f);
        let inv = self.inverse_entries();
        (0..f.len())
            .map(|p| {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        s += inv[k * n + j][p] * d[j][p] * d[k][p].conj();
                    }
                }
                s.re
            })
            .collect()
    }

    /// Ratio `η/ω^n` for a top-degree form `η`.
    pub fn top_ratio(&self, top: &ComplexForm) -> Vec<f64> {
        let vol = flat_volume_coefficient(self.n());
        top.top_coefficient()
            .iter()
            .zip(self.volume_ratio())
            .map(|(c, v)| (c / vol).re / v)
            .collect()
    }

    /// Sup-norm of the coefficients of `dω^{n-1}`.
    pub fn balanced_residual(&self) -> f64 {
        let w = self.kahler_form().wedge_power(self.n() - 1).expect("degree fits");
        w.del().sup_norm().max(w.dbar().sup_norm())
    }

    /// Membership of `φ` in the space of mixed-volume forms of order `p`.
    pub fn mixed_volume_positivity(&self, phi: &[f64], x: &[f64], p: usize) -> Result<PositivityReport, GeometryError> {
        let n = self.n();
        if !(2..=n).contains(&p) {
            return Err(GeometryError::BadOrder { p, n });
        }
        let lap = self.chern_laplacian(phi);
        let value: Vec<f64> = (0..phi.len()).map(|i| 1.0 + lap[i] / n as f64 + x[i] * phi[i]).collect();
        let w = self.kahler_form();
        let omega_p = w.wedge_power(p)?;
        let inner = w.wedge_power(p - 1)?.mul_real_field(phi).i_ddbar();
        let top = (&omega_p + &inner).wedge(&w.wedge_power(n - p)?)?;
        let wedge_value = self.top_ratio(&top);
        let positive: Vec<bool> = value.iter().map(|v| *v > 0.0).collect();
        let margin = value.iter().copied().fold(f64::INFINITY, f64::min);
        let discrepancy = value.iter().zip(&wedge_value).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(PositivityReport { value, wedge_value, positive, margin, discrepancy })
    }

    /// Lemma (i) residual: sup-norm of `∂ω^{p-1}∧ω^{n-p}`.
    pub fn lemma_first_residual(&self, p: usize) -> Result<f64, GeometryError> {
        let n = self.n();
        if !(2..=n).contains(&p) {
            return Err(GeometryError::BadOrder { p, n });
        }
        let w = self.kahler_form();
        Ok(w.wedge_power(p - 1)?.del().wedge(&w.wedge_power(n - p)?)?.sup_norm())
    }

    /// Lemma (ii) residual: sup-norm of `∂∂̄ω^{p-1}∧ω^{n-p} - (n-p)(p-1) ∂̄ω∧∂ω∧ω^{n-3}`.
    pub fn lemma_second_residual(&self, p: usize) -> Result<f64, GeometryError> {
        let n = self.n();
        if !(2..=n).contains(&p) {
            return Err(GeometryError::BadOrder { p, n });
        }
        if n < 3 {
            return Err(GeometryError::DimensionTooSmall { n, min: 3 });
        }
        let w = self.kahler_form();
        let lhs = w.wedge_power(p - 1)?.dbar().del().wedge(&w.wedge_power(n - p)?)?;
        let rhs = w.dbar().wedge(&w.del())?.wedge(&w.wedge_power(n - 3)?)?;
        let c = ((n - p) * (p - 1)) as f64;
        Ok((&lhs - &rhs.scale(C64::new(c, 0.0))).sup_norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{kahan_sum, DiffScheme};
    use std::f64::consts::PI;

    fn domain(res: usize) -> GridDomain {
        GridDomain::uniform(3, 2.0 * PI, res, vec![0, 2], DiffScheme::Spectral).unwrap()
    }

    fn test_f(d: &GridDomain) -> Vec<f64> {
        d.sample(|x| 0.1 * (x[0].cos() + 0.5 * (x[2] + x[0]).sin()))
    }

    #[test]
    fn star_of_power_matches_convention() {
        let d = domain(4);
        let g = HermitianMetricField::flat(&d);
        let w = g.kahler_form();
        for k in 0..=3 {
            let lhs = g.hodge_star(&w.wedge_power(k).unwrap().scale(C64::new(1.0 / factorial(k), 0.0)));
            let rhs = w.wedge_power(3 - k).unwrap().scale(C64::new(1.0 / factorial(3 - k), 0.0));
            assert!((&lhs - &rhs).sup_norm() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn star_convention_on_curved_metric() {
        let d = domain(8);
        let g = HermitianMetricField::balanced_root(&d, &test_f(&d)).unwrap();
        let w = g.kahler_form();
        let w2 = w.wedge_power(2).unwrap().scale(C64::new(0.5, 0.0));
        assert!((&g.hodge_star(&w2) - &w).sup_norm() < 1e-13);
        let one = ComplexForm::one(&d);
        let vol = w.wedge_power(3).unwrap().scale(C64::new(1.0 / 6.0, 0.0));
        assert!((&g.hodge_star(&one) - &vol).sup_norm() < 1e-13);
    }

    #[test]
    fn double_star_is_identity_on_two_forms() {
        // pointwise oracle: ⋆⋆ = (-1)^k on k-forms in real dimension 2n
        let d = domain(4);
        let g = HermitianMetricField::balanced_root(&d, &test_f(&d)).unwrap();
        let coeffs: Vec<Vec<C64>> = (0..9)
            .map(|i| d.sample(|x| (i as f64 + x[0]).sin()).iter().zip(d.sample(|x| (x[2] * i as f64).cos())).map(|(a, b)| C64::new(*a, b)).collect())
            .collect();
        let f = ComplexForm::from_coeffs(&d, 1, 1, coeffs);
        assert!((&g.hodge_star(&g.hodge_star(&f)) - &f).sup_norm() < 1e-12);
        let h = ComplexForm::from_coeffs(&d, 1, 0, (0..3).map(|i| vec![C64::new(i as f64, 1.0); d.num_points()]).collect());
        assert!((&g.hodge_star(&g.hodge_star(&h)) + &h).sup_norm() < 1e-12);
    }

    #[test]
    fn root_of_flat_power_is_flat() {
        let d = domain(4);
        let w = HermitianMetricField::flat(&d).kahler_form();
        let g = HermitianMetricField::michelsohn_root(&w.wedge_power(2).unwrap()).unwrap();
        for (i, e) in g.entries().iter().enumerate() {
            let target = if i % 4 == 0 { 1.0 } else { 0.0 };
            assert!(e.iter().all(|v| (v - target).norm() < 1e-14));
        }
    }

    #[test]
    fn root_roundtrip_and_scaling() {
        let d = domain(8);
        let g = HermitianMetricField::kahler_perturbed(&d, &d.sample(|x| 0.2 * (x[0] - x[2]).sin())).unwrap();
        let q = g.kahler_form().wedge_power(2).unwrap();
        let r = HermitianMetricField::michelsohn_root(&q).unwrap();
        let back = r.kahler_form().wedge_power(2).unwrap();
        assert!((&back - &q).sup_norm() / q.sup_norm() < 1e-12);
        let r2 = HermitianMetricField::michelsohn_root(&q.scale(C64::new(2.0, 0.0))).unwrap();
        let s = 2f64.sqrt();
        for (a, b) in r2.entries().iter().zip(r.entries()) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y * s).norm() < 1e-12));
        }
    }

    #[test]
    fn root_reports_non_positive_point() {
        let d = domain(4);
        let w = HermitianMetricField::flat(&d).kahler_form();
        let q = w.wedge_power(2).unwrap().mul_real_field(&d.sample(|x| if x[0] > 3.0 { -1.0 } else { 1.0 }));
        match HermitianMetricField::michelsohn_root(&q) {
            Err(GeometryError::NotPositive { coords, .. }) => assert!(coords[0] > 3.0),
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn flat_laplacian_normalization() {
        let d = GridDomain::uniform(2, 3.0, 16, vec![0, 1], DiffScheme::Spectral).unwrap();
        let g = HermitianMetricField::flat(&d);
        let k = 2.0 * PI / 3.0;
        let f = d.sample(|x| (k * x[0]).cos());
        let lap = g.chern_laplacian(&f);
        for (l, v) in lap.iter().zip(&f) {
            assert!((l + 0.25 * k * k * v).abs() < 1e-12);
        }
        assert!(g.chern_laplacian(&vec![1.0; d.num_points()]).iter().all(|v| *v == 0.0));
        assert!(g.grad_norm_sq(&vec![1.0; d.num_points()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_matches_wedge_trace() {
        let d = domain(16);
        let g = HermitianMetricField::balanced_root(&d, &test_f(&d)).unwrap();
        let f = d.sample(|x| (x[0] + 2.0 * x[2]).sin());
        let w = g.kahler_form();
        let top = ComplexForm::real_scalar(&d, &f).i_ddbar().wedge(&w.wedge_power(2).unwrap()).unwrap();
        let ratio = g.top_ratio(&top);
        for (a, b) in g.chern_laplacian(&f).iter().zip(ratio) {
            assert!((a - 3.0 * b).abs() < 1e-11);
        }
    }

    #[test]
    fn leibniz_quadrature_on_balanced_metric() {
        // ∫ Δf·h ω^n + ∫ <∂f, ∂h> ω^n = 0 when d(ω^{n-1}) = 0
        let d = domain(32);
        let g = HermitianMetricField::balanced_root(&d, &test_f(&d)).unwrap();
        let f = d.sample(|x| (x[0] - x[2]).cos());
        let h = d.sample(|x| (2.0 * x[2]).sin() + x[0].sin());
        let lap = g.chern_laplacian(&f);
        let vol = g.volume_ratio();
        let inv = g.inverse_entries();
        let df = d.holo_gradient(&f);
        let dh = d.holo_gradient(&h);
        let total = kahan_sum((0..f.len()).map(|p| {
            let mut cross = C64::new(0.0, 0.0);
            for j in 0..3 {
                for k in 0..3 {
                    cross += inv[k * 3 + j][p] * df[j][p] * dh[k][p].conj();
                }
            }
            (lap[p] * h[p] + cross.re) * vol[p]
        }));
        assert!(total.abs() / (f.len() as f64) < 1e-10, "{total}");
    }

    #[test]
    fn kahler_perturbation_is_balanced() {
        let d = domain(16);
        let g = HermitianMetricField::kahler_perturbed(&d, &d.sample(|x| 0.3 * x[0].sin() * x[2].cos())).unwrap();
        assert!(g.balanced_residual() < 1e-12);
        assert!(HermitianMetricField::flat(&d).balanced_residual() == 0.0);
    }

    #[test]
    fn positivity_at_zero_and_sign_failure() {
        let d = domain(8);
        let g = HermitianMetricField::balanced_root(&d, &test_f(&d)).unwrap();
        let x = vec![0.0; d.num_points()];
        let r = g.mixed_volume_positivity(&x, &x, 2).unwrap();
        assert!(r.value.iter().all(|v| *v == 1.0) && r.margin == 1.0);
        let xneg = d.sample(|p| -0.5 - 0.5 * p[0].cos());
        let phi = vec![-10.0; d.num_points()];
        let r = g.mixed_volume_positivity(&phi, &xneg, 2).unwrap();
        assert!(r.positive.iter().zip(&xneg).all(|(ok, xv)| *ok == (1.0 - 10.0 * xv > 0.0)));
    }

    #[test]
    fn positivity_matches_wedge_on_kahler_metric() {
        let d = domain(16);
        let g = HermitianMetricField::kahler_perturbed(&d, &d.sample(|x| 0.2 * x[2].sin())).unwrap();
        let phi = d.sample(|x| 0.3 * (x[0] + x[2]).cos());
        let x = vec![0.0; d.num_points()];
        for p in 2..=3 {
            let r = g.mixed_volume_positivity(&phi, &x, p).unwrap();
            assert!(r.discrepancy < 1e-10, "p = {p}: {}", r.discrepancy);
        }
        assert!(matches!(g.mixed_volume_positivity(&phi, &x, 1), Err(GeometryError::BadOrder { .. })));
    }
}
