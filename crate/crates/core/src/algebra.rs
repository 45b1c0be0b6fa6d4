//! Pointwise exterior algebra of `(p,q)`-forms on `C^n`.
//!
//! Basis elements are `dz_I ∧ dz̄_J` with `I`, `J` strictly increasing index
//! sets encoded as bitmasks; the holomorphic block always comes first.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::grid::C64;

pub type CMat = DMatrix<Complex64>;

/// Basis masks of a fixed bidegree in dimension `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    holo: Vec<u32>,
    anti: Vec<u32>,
    rank_holo: Vec<usize>,
    rank_anti: Vec<usize>,
}

/// Masks with `k` bits set among the lowest `n`, increasing order (empty when `k > n`).
pub fn masks_of(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1u32 << n)).filter(|m| m.count_ones() as usize == k).collect()
}

fn ranks(n: usize, masks: &[u32]) -> Vec<usize> {
    let mut r = vec![usize::MAX; 1 << n];
    for (i, m) in masks.iter().enumerate() {
        r[*m as usize] = i;
    }
    r
}

impl Basis {
    /// Bidegrees beyond `n` are allowed and yield an empty basis (the zero space).
    pub fn new(n: usize, p: usize, q: usize) -> Self {
        assert!(n <= 16, "dimension {n} too large");
        let holo = masks_of(n, p);
        let anti = masks_of(n, q);
        let rank_holo = ranks(n, &holo);
        let rank_anti = ranks(n, &anti);
        Self { n, p, q, holo, anti, rank_holo, rank_anti }
    }

    pub fn len(&self) -> usize {
        self.holo.len() * self.anti.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(I, J)` masks of basis element `idx`.
    pub fn element(&self, idx: usize) -> (u32, u32) {
        let a = self.anti.len();
        (self.holo[idx / a], self.anti[idx % a])
    }

    pub fn index_of(&self, i: u32, j: u32) -> Option<usize> {
        let (a, b) = (*self.rank_holo.get(i as usize)?, *self.rank_anti.get(j as usize)?);
        (a != usize::MAX && b != usize::MAX).then(|| a * self.anti.len() + b)
    }

    pub fn holo_masks(&self) -> &[u32] {
        &self.holo
    }

    pub fn anti_masks(&self) -> &[u32] {
        &self.anti
    }
}

/// Sign of concatenating sorted index sets `a` then `b` into sorted order; 0 if they overlap.
pub fn merge_sign(a: u32, b: u32) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let k = bb.trailing_zeros();
        bb &= bb - 1;
        inversions += (a >> (k + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `(dz_I∧dz̄_J) ∧ (dz_K∧dz̄_L) = sign · dz_{I∪K}∧dz̄_{J∪L}`.
pub fn wedge_sign(i: u32, j: u32, k: u32, l: u32) -> i32 {
    let s1 = merge_sign(i, k);
    let s2 = merge_sign(j, l);
    if s1 == 0 || s2 == 0 {
        return 0;
    }
    let cross = (j.count_ones() * k.count_ones()) % 2;
    let s = s1 * s2;
    if cross == 1 {
        -s
    } else {
        s
    }
}

/// Coefficient of the top basis element `dz_1..dz_n dz̄_1..dz̄_n` in `ω_flat^n / n!`.
pub fn flat_volume_coefficient(n: usize) -> C64 {
    // Π (i dz_a ∧ dz̄_a) reordered into the holomorphic-first basis.
    let reorder = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    C64::i().powu(n as u32) * reorder
}

/// Matrix of `k×k` minors: entry `(I, A) = det P[I, A]` over `k`-subsets in mask order.
pub fn minor_matrix(p: &CMat, k: usize) -> CMat {
    let n = p.nrows();
    let masks = masks_of(n, k);
    let m = masks.len();
    let idx = |mask: u32| -> Vec<usize> { (0..n).filter(|b| mask >> b & 1 == 1).collect() };
    let mut out = CMat::zeros(m, m);
    for (r, &mi) in masks.iter().enumerate() {
        let rows = idx(mi);
        for (c, &ma) in masks.iter().enumerate() {
            let cols = idx(ma);
            if k == 0 {
                out[(r, c)] = C64::new(1.0, 0.0);
            } else {
                let sub = CMat::from_fn(k, k, |a, b| p[(rows[a], cols[b])]);
                out[(r, c)] = sub.determinant();
            }
        }
    }
    out
}

/// Coefficients of a form at one point, arranged as a `C(n,p) × C(n,q)` matrix.
pub fn coeff_matrix(basis: &Basis, coeffs: &[C64]) -> CMat {
    let cols = basis.anti_masks().len();
    CMat::from_fn(basis.holo_masks().len(), cols, |r, c| coeffs[r * cols + c])
}

pub fn coeff_vec(m: &CMat) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            v.push(m[(r, c)]);
        }
    }
    v
}

/// Rewrites a form under the linear substitution `dz_j = Σ_a P[j,a] θ_a`.
pub fn change_frame(basis: &Basis, coeffs: &[C64], p: &CMat) -> Vec<C64> {
    let c = coeff_matrix(basis, coeffs);
    let hp = minor_matrix(p, basis.p);
    let hq = minor_matrix(&p.map(|z| z.conj()), basis.q);
    coeff_vec(&(hp.transpose() * c * hq))
}

/// Hodge star in an orthonormal coframe `θ` (where the metric form is `i Σ θ_a∧θ̄_a`).
///
/// Complex-linear extension of the Riemannian star; maps bidegree `(p,q)` to
/// `(n-q, n-p)` and satisfies `⋆1 = ω^n/n!`.
pub fn star_orthonormal(basis: &Basis, coeffs: &[C64]) -> (Basis, Vec<C64>) {
    let n = basis.n;
    let (p, q) = (basis.p, basis.q);
    let out_basis = Basis::new(n, n - q, n - p);
    let full = (1u32 << n) - 1;
    let vol = flat_volume_coefficient(n);
    let pair_sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = vec![C64::new(0.0, 0.0); out_basis.len()];
    for (idx, c) in coeffs.iter().enumerate() {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        let (i, j) = basis.element(idx);
        let (jc, ic) = (full & !j, full & !i);
        // (θ_J∧θ̄_I) ∧ κ θ_{J^c}∧θ̄_{I^c} = g(θ_J∧θ̄_I, θ_I∧θ̄_J) vol = (-1)^{pq} vol
        let sigma = wedge_sign(j, i, jc, ic) as f64;
        let kappa = vol * pair_sign / sigma;
        let o = out_basis.index_of(jc, ic).expect("complement element exists");
        out[o] += c * kappa;
    }
    (out_basis, out)
}

/// Lower Cholesky factor of a Hermitian matrix; `None` unless every pivot is positive.
pub fn cholesky(g: &CMat) -> Option<CMat> {
    let n = g.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Eigenvalues of the Hermitian pencil `(a, g)`, i.e. of `g^{-1} a`, ascending.
pub fn relative_eigenvalues(a: &CMat, g: &CMat) -> Option<Vec<f64>> {
    let l = cholesky(g)?;
    let linv = l.clone().try_inverse()?;
    let m = &linv * a * linv.adjoint();
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(ev)
}

pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let m = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}
