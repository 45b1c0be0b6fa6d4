use std::ops::{Add, Sub};

use crate::algebra::{merge_sign, wedge_sign, Basis};
use crate::grid::{sup_norm_c, GridDomain, C64};

use super::GeometryError;

/// Coefficient field of a `(p,q)`-form on a periodic grid.
///
/// Coefficients are stored per basis element `dz_I∧dz̄_J` (ordered multi-indices),
/// so antisymmetry within each block holds by construction.
#[derive(Debug, Clone)]
pub struct ComplexForm {
    domain: GridDomain,
    basis: Basis,
    coeffs: Vec<Vec<C64>>,
}

impl ComplexForm {
    pub fn zero(domain: &GridDomain, p: usize, q: usize) -> Self {
        let basis = Basis::new(domain.n(), p, q);
        let coeffs = vec![vec![C64::new(0.0, 0.0); domain.num_points()]; basis.len()];
        Self { domain: domain.clone(), basis, coeffs }
    }

    /// A `(0,0)`-form.
    pub fn scalar(domain: &GridDomain, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), domain.num_points());
        Self { domain: domain.clone(), basis: Basis::new(domain.n(), 0, 0), coeffs: vec![values] }
    }

    pub fn real_scalar(domain: &GridDomain, values: &[f64]) -> Self {
        Self::scalar(domain, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Constant 1 as a `(0,0)`-form.
    pub fn one(domain: &GridDomain) -> Self {
        Self::scalar(domain, vec![C64::new(1.0, 0.0); domain.num_points()])
    }

    /// Builds a form of bidegree `(p,q)` from basis-ordered coefficient fields.
    pub fn from_coeffs(domain: &GridDomain, p: usize, q: usize, coeffs: Vec<Vec<C64>>) -> Self {
        let basis = Basis::new(domain.n(), p, q);
        assert_eq!(coeffs.len(), basis.len(), "coefficient count does not match bidegree");
        assert!(coeffs.iter().all(|c| c.len() == domain.num_points()));
        Self { domain: domain.clone(), basis, coeffs }
    }

    /// Constant-coefficient basis element `dz_I ∧ dz̄_J` (index lists, any order).
    pub fn basis_element(domain: &GridDomain, holo: &[usize], anti: &[usize]) -> Self {
        let mut f = Self::one(domain);
        for &k in holo {
            f = f.wedge(&Self::dz(domain, k)).expect("degree fits");
        }
        for &k in anti {
            f = f.wedge(&Self::dzbar(domain, k)).expect("degree fits");
        }
        f
    }

    pub fn dz(domain: &GridDomain, k: usize) -> Self {
        let mut f = Self::zero(domain, 1, 0);
        let idx = f.basis.index_of(1 << k, 0).expect("index in range");
        f.coeffs[idx].fill(C64::new(1.0, 0.0));
        f
    }

    pub fn dzbar(domain: &GridDomain, k: usize) -> Self {
        let mut f = Self::zero(domain, 0, 1);
        let idx = f.basis.index_of(0, 1 << k).expect("index in range");
        f.coeffs[idx].fill(C64::new(1.0, 0.0));
        f
    }

    /// Real `(1,1)`-form `i Σ h_{jk̄} dz_j∧dz̄_k` from matrix entries `h[j*n+k]`.
    pub fn from_hermitian(domain: &GridDomain, h: &[Vec<C64>]) -> Self {
        let n = domain.n();
        let mut f = Self::zero(domain, 1, 1);
        for j in 0..n {
            for k in 0..n {
                let idx = f.basis.index_of(1 << j, 1 << k).unwrap();
                f.coeffs[idx] = h[j * n + k].iter().map(|v| C64::i() * v).collect();
            }
        }
        f
    }

    /// Matrix entries `h[j*n+k]` of a `(1,1)`-form written as `i Σ h_{jk̄} dz_j∧dz̄_k`.
    pub fn hermitian_entries(&self) -> Vec<Vec<C64>> {
        assert_eq!(self.bidegree(), (1, 1), "hermitian_entries needs a (1,1)-form");
        let n = self.domain.n();
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let idx = self.basis.index_of(1 << j, 1 << k).unwrap();
                out.push(self.coeffs[idx].iter().map(|v| -C64::i() * v).collect());
            }
        }
        out
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.basis.p, self.basis.q)
    }

    pub fn degree(&self) -> usize {
        self.basis.p + self.basis.q
    }

    pub fn coeffs(&self) -> &[Vec<C64>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec<C64>] {
        &mut self.coeffs
    }

    /// Coefficient field of `dz_I∧dz̄_J` given as masks.
    pub fn coeff(&self, holo: u32, anti: u32) -> Option<&[C64]> {
        self.basis.index_of(holo, anti).map(|i| self.coeffs[i].as_slice())
    }

    /// Coefficients of all basis elements at one grid point.
    pub fn at_point(&self, idx: usize) -> Vec<C64> {
        self.coeffs.iter().map(|c| c[idx]).collect()
    }

    pub fn set_point(&mut self, idx: usize, values: &[C64]) {
        for (c, v) in self.coeffs.iter_mut().zip(values) {
            c[idx] = *v;
        }
    }

    /// Coefficient of the top element `dz_1..dz_n∧dz̄_1..dz̄_n` of an `(n,n)`-form.
    pub fn top_coefficient(&self) -> &[C64] {
        let n = self.domain.n();
        assert_eq!(self.bidegree(), (n, n), "not a top-degree form");
        &self.coeffs[0]
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for f in &mut out.coeffs {
            for v in f.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Pointwise product with a scalar field.
    pub fn mul_field(&self, field: &[C64]) -> Self {
        let mut out = self.clone();
        for f in &mut out.coeffs {
            for (v, s) in f.iter_mut().zip(field) {
                *v *= s;
            }
        }
        out
    }

    pub fn mul_real_field(&self, field: &[f64]) -> Self {
        let mut out = self.clone();
        for f in &mut out.coeffs {
            for (v, s) in f.iter_mut().zip(field) {
                *v *= s;
            }
        }
        out
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.domain, other.domain, "forms live on different domains");
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self, GeometryError> {
        self.check_compatible(other);
        let n = self.domain.n();
        let total = self.degree() + other.degree();
        if total > 2 * n {
            return Err(GeometryError::DegreeOverflow { degree: total, max: 2 * n });
        }
        let (p, q) = (self.basis.p + other.basis.p, self.basis.q + other.basis.q);
        let mut out = Self::zero(&self.domain, p, q);
        if out.basis.is_empty() {
            return Ok(out);
        }
        for (a, ca) in self.coeffs.iter().enumerate() {
            let (i, j) = self.basis.element(a);
            for (b, cb) in other.coeffs.iter().enumerate() {
                let (k, l) = other.basis.element(b);
                let s = wedge_sign(i, j, k, l);
                if s == 0 {
                    continue;
                }
                let t = out.basis.index_of(i | k, j | l).expect("target in basis");
                let s = s as f64;
                for ((o, x), y) in out.coeffs[t].iter_mut().zip(ca).zip(cb) {
                    *o += s * x * y;
                }
            }
        }
        Ok(out)
    }

    /// `k`-fold wedge power (`k = 0` gives the constant 1).
    pub fn wedge_power(&self, k: usize) -> Result<Self, GeometryError> {
        let mut out = Self::one(&self.domain);
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// `∂`, raising the holomorphic degree by one.
    pub fn del(&self) -> Self {
        let n = self.domain.n();
        let mut out = Self::zero(&self.domain, self.basis.p + 1, self.basis.q);
        if out.basis.is_empty() {
            return out;
        }
        for (a, c) in self.coeffs.iter().enumerate() {
            if c.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                continue;
            }
            let (i, j) = self.basis.element(a);
            for k in 0..n {
                let s = merge_sign(1 << k, i);
                if s == 0 {
                    continue;
                }
                let d = self.domain.d_holo(c, k);
                let t = out.basis.index_of(i | 1 << k, j).unwrap();
                let s = s as f64;
                for (o, v) in out.coeffs[t].iter_mut().zip(d) {
                    *o += s * v;
                }
            }
        }
        out
    }

    /// `∂̄`, raising the antiholomorphic degree by one.
    pub fn dbar(&self) -> Self {
        let n = self.domain.n();
        let mut out = Self::zero(&self.domain, self.basis.p, self.basis.q + 1);
        if out.basis.is_empty() {
            return out;
        }
        for (a, c) in self.coeffs.iter().enumerate() {
            if c.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                continue;
            }
            let (i, j) = self.basis.element(a);
            for k in 0..n {
                let s = wedge_sign(0, 1 << k, i, j);
                if s == 0 {
                    continue;
                }
                let d = self.domain.d_antiholo(c, k);
                let t = out.basis.index_of(i, j | 1 << k).unwrap();
                let s = s as f64;
                for (o, v) in out.coeffs[t].iter_mut().zip(d) {
                    *o += s * v;
                }
            }
        }
        out
    }

    /// `i ∂∂̄` applied to this form.
    pub fn i_ddbar(&self) -> Self {
        self.dbar().del().scale(C64::i())
    }

    /// Complex conjugate form; `(p,q)` becomes `(q,p)`.
    pub fn conjugate(&self) -> Self {
        let (p, q) = self.bidegree();
        let mut out = Self::zero(&self.domain, q, p);
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        for (a, c) in self.coeffs.iter().enumerate() {
            let (i, j) = self.basis.element(a);
            let t = out.basis.index_of(j, i).unwrap();
            out.coeffs[t] = c.iter().map(|v| sign * v.conj()).collect();
        }
        out
    }

    /// Sup-norm of `self - conj(self)`; zero for real `(k,k)`-forms.
    pub fn reality_residual(&self) -> f64 {
        (self - &self.conjugate()).sup_norm()
    }

    /// Largest coefficient modulus over all basis elements and grid points.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| sup_norm_c(c)).fold(0.0, f64::max)
    }

    fn combine(&self, other: &Self, s: f64) -> Self {
        self.check_compatible(other);
        assert_eq!(self.bidegree(), other.bidegree(), "bidegree mismatch");
        let mut out = self.clone();
        for (o, c) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in o.iter_mut().zip(c) {
                *x += s * y;
            }
        }
        out
    }
}

impl Add for &ComplexForm {
    type Output = ComplexForm;
    fn add(self, rhs: Self) -> ComplexForm {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &ComplexForm {
    type Output = ComplexForm;
    fn sub(self, rhs: Self) -> ComplexForm {
        self.combine(rhs, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DiffScheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn domain() -> GridDomain {
        GridDomain::uniform(3, 2.0 * PI, 8, vec![0, 2], DiffScheme::Spectral).unwrap()
    }

    fn random_form(d: &GridDomain, p: usize, q: usize, rng: &mut ChaCha8Rng) -> ComplexForm {
        let b = Basis::new(d.n(), p, q);
        let coeffs = (0..b.len())
            .map(|_| {
                let (a, c, ph) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0));
                d.sample(|x| a * (x[0] + ph).cos() + c * (x[2] - ph).sin() + 0.3)
                    .into_iter()
                    .zip(d.sample(|x| c * (2.0 * x[0] + x[2]).sin()))
                    .map(|(re, im)| C64::new(re, im))
                    .collect()
            })
            .collect();
        ComplexForm::from_coeffs(d, p, q, coeffs)
    }

    #[test]
    fn basis_product_of_two_kahler_factors() {
        let d = domain();
        let e1 = ComplexForm::basis_element(&d, &[0], &[0]).scale(C64::i());
        let e2 = ComplexForm::basis_element(&d, &[1], &[1]).scale(C64::i());
        let prod = e1.wedge(&e2).unwrap();
        // (i dz1∧dz̄1)∧(i dz2∧dz̄2) = - dz1∧dz̄1∧dz2∧dz̄2 = dz1∧dz2∧dz̄1∧dz̄2
        let c = prod.coeff(0b011, 0b011).unwrap();
        assert!(c.iter().all(|v| (*v - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(prod.sup_norm(), 1.0);
    }

    #[test]
    fn graded_commutativity() {
        let d = domain();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p1, q1, p2, q2) in [(1, 0, 0, 1), (1, 1, 1, 0), (2, 1, 0, 1), (1, 1, 1, 1)] {
            let a = random_form(&d, p1, q1, &mut rng);
            let b = random_form(&d, p2, q2, &mut rng);
            let s = if ((p1 + q1) * (p2 + q2)) % 2 == 0 { 1.0 } else { -1.0 };
            let r = &a.wedge(&b).unwrap() - &b.wedge(&a).unwrap().scale(C64::new(s, 0.0));
            assert!(r.sup_norm() < 1e-14);
        }
    }

    #[test]
    fn wedge_rejects_degree_overflow() {
        let d = domain();
        let a = ComplexForm::zero(&d, 2, 2);
        let b = ComplexForm::zero(&d, 2, 1);
        assert!(matches!(a.wedge(&b), Err(GeometryError::DegreeOverflow { degree: 7, max: 6 })));
        let c = ComplexForm::zero(&d, 3, 0).wedge(&ComplexForm::zero(&d, 1, 0)).unwrap();
        assert!(c.basis().is_empty());
    }

    #[test]
    fn del_of_constant_vanishes_exactly() {
        let d = domain();
        let f = ComplexForm::real_scalar(&d, &vec![2.5; d.num_points()]);
        assert_eq!(f.del().sup_norm(), 0.0);
        assert_eq!(f.dbar().sup_norm(), 0.0);
    }

    #[test]
    fn nilpotency_and_anticommutation() {
        let d = domain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, q) in [(0, 0), (1, 0), (1, 1), (0, 2)] {
            let f = random_form(&d, p, q, &mut rng);
            assert!(f.del().del().sup_norm() < 1e-12);
            assert!(f.dbar().dbar().sup_norm() < 1e-12);
            assert!((&f.dbar().del() + &f.del().dbar()).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn i_ddbar_of_real_function_is_real() {
        let d = domain();
        let f = d.sample(|x| (x[0]).cos() * (2.0 * x[2]).sin() + 0.2 * (x[0] + x[2]).sin());
        let form = ComplexForm::real_scalar(&d, &f).i_ddbar();
        assert_eq!(form.bidegree(), (1, 1));
        assert!(form.reality_residual() < 1e-13);
        let h = form.hermitian_entries();
        // ∂_1∂_1̄ f = (1/4) ∂²_{x0} f
        let exact = d.sample(|x| -0.25 * ((x[0]).cos() * (2.0 * x[2]).sin() + 0.2 * (x[0] + x[2]).sin()));
        for (v, e) in h[0].iter().zip(&exact) {
            assert!((v.re - e).abs() < 1e-13 && v.im.abs() < 1e-13);
        }
    }

    #[test]
    fn conjugation_is_an_involution() {
        let d = domain();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_form(&d, 2, 1, &mut rng);
        assert!((&f.conjugate().conjugate() - &f).sup_norm() == 0.0);
    }

    #[test]
    fn associativity_matches_coefficient_expansion() {
        // Oracle: expand all three forms at a point into explicit generator words and
        // sort them with a bubble sort, independent of the mask-based sign rule.
        fn word_sign(word: &[usize]) -> (i32, Vec<usize>) {
            let mut w = word.to_vec();
            let mut s = 1;
            for i in 0..w.len() {
                for j in 0..w.len() - 1 - i {
                    if w[j] == w[j + 1] {
                        return (0, w);
                    }
                    if w[j] > w[j + 1] {
                        w.swap(j, j + 1);
                        s = -s;
                    }
                }
            }
            if w.windows(2).any(|p| p[0] == p[1]) {
                return (0, w);
            }
            (s, w)
        }
        fn gens(n: usize, i: u32, j: u32) -> Vec<usize> {
            let mut g: Vec<usize> = (0..n).filter(|b| i >> b & 1 == 1).collect();
            g.extend((0..n).filter(|b| j >> b & 1 == 1).map(|b| n + b));
            g
        }
        let d = GridDomain::uniform(3, 1.0, 4, vec![0], DiffScheme::Spectral).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let degs = [(1, 0), (0, 1), (1, 1), (1, 0), (0, 1)];
        for trial in 0..100 {
            let (p1, q1) = degs[trial % 5];
            let (p2, q2) = degs[(trial + 1) % 5];
            let (p3, q3) = degs[(trial + 3) % 5];
            let a = random_form(&d, p1, q1, &mut rng);
            let b = random_form(&d, p2, q2, &mut rng);
            let c = random_form(&d, p3, q3, &mut rng);
            let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
            let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
            let scale = left.sup_norm().max(1e-300);
            assert!((&left - &right).sup_norm() / scale < 1e-13);
            // direct expansion at point 0
            let n = 3;
            let mut expect = std::collections::HashMap::<Vec<usize>, C64>::new();
            for (ia, va) in a.at_point(0).iter().enumerate() {
                let (i1, j1) = a.basis().element(ia);
                for (ib, vb) in b.at_point(0).iter().enumerate() {
                    let (i2, j2) = b.basis().element(ib);
                    for (ic, vc) in c.at_point(0).iter().enumerate() {
                        let (i3, j3) = c.basis().element(ic);
                        let mut w = gens(n, i1, j1);
                        w.extend(gens(n, i2, j2));
                        w.extend(gens(n, i3, j3));
                        let (s, key) = word_sign(&w);
                        if s != 0 {
                            *expect.entry(key).or_default() += va * vb * vc * s as f64;
                        }
                    }
                }
            }
            for (idx, v) in left.at_point(0).iter().enumerate() {
                let (i, j) = left.basis().element(idx);
                let e = expect.get(&gens(n, i, j)).copied().unwrap_or_default();
                assert!((v - e).norm() <= 1e-13 * scale.max(1.0));
            }
        }
    }
}
