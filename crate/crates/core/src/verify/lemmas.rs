use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hyperdual::{hessian, HyperDual};
use super::CheckReport;
use crate::algebra::{hermitian_eigenvalues, CMat};
use crate::grid::C64;

/// `log(xy - Σz_k²)` on `v = (x, y, z_1, …)`, or `None` outside the cone.
pub fn log_cone(v: &[f64]) -> Option<f64> {
    let q = v[0] * v[1] - v[2..].iter().map(|z| z * z).sum::<f64>();
    (v[0] > 0.0 && v[1] > 0.0 && q > 0.0).then(|| q.ln())
}

fn sample_cone(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let x: f64 = rng.random_range(0.05..5.0);
    let y: f64 = rng.random_range(0.05..5.0);
    let dir: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
    let r = (x * y).sqrt() * rng.random_range(0.0..0.999);
    let mut v = vec![x, y];
    v.extend(dir.iter().map(|d| d / norm * r));
    v
}

/// Midpoint concavity of [`log_cone`] on `samples` random pairs with `k` extra coordinates.
pub fn midpoint_concavity(samples: usize, k: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CheckReport::new("log-cone midpoint concavity", tol);
    for _ in 0..samples {
        let p = sample_cone(&mut rng, k);
        let q = sample_cone(&mut rng, k);
        let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fp, fq) = (log_cone(&p).expect("sampled in cone"), log_cone(&q).expect("sampled in cone"));
        match log_cone(&mid) {
            Some(fm) => rep.observe(fm - 0.5 * (fp + fq), || serde_json::json!({ "p": p, "q": q })),
            None => rep.observe(f64::NEG_INFINITY, || serde_json::json!({ "p": p, "q": q, "midpoint": "outside" })),
        }
    }
    rep
}

fn neg_log_cone_hd(v: &[HyperDual]) -> HyperDual {
    let mut q = v[0] * v[1];
    for z in &v[2..] {
        q = q - *z * *z;
    }
    -q.ln()
}

/// Levi form of `-log(xy - Σ|z_k|²)` in complex coordinates `(w₀, w₁, z_1, …)` with `x = Re w₀`, `y = Re w₁`.
///
/// `real` holds `(Re w₀, Im w₀, Re w₁, Im w₁, Re z_1, Im z_1, …)`.
pub fn levi_form(real: &[f64]) -> CMat {
    let m = real.len() / 2;
    let f = |v: &[HyperDual]| {
        let mut args = vec![v[0], v[2]];
        args.extend(v[4..].iter().copied());
        neg_log_cone_hd(&args)
    };
    let h = hessian(f, real);
    CMat::from_fn(m, m, |a, b| {
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        C64::new(h[xa][xb] + h[ya][yb], h[xa][yb] - h[ya][xb]) * 0.25
    })
}

/// Positive semidefiniteness of [`levi_form`] at random cone points; tolerance is relative to the spectral radius.
pub fn plurisubharmonic(samples: usize, k: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CheckReport::new("plurisubharmonicity of -log(xy - |z|^2)", tol);
    for _ in 0..samples {
        let x: f64 = rng.random_range(0.05..5.0);
        let y: f64 = rng.random_range(0.05..5.0);
        let dir: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
        let r = (x * y).sqrt() * rng.random_range(0.0..0.999);
        let mut real = vec![x, rng.random_range(-1.0..1.0), y, rng.random_range(-1.0..1.0)];
        real.extend(dir.iter().map(|d| d / norm * r));
        let ev = hermitian_eigenvalues(&levi_form(&real));
        let scale = ev.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
        rep.observe(ev[0] / scale, || serde_json::json!({ "point": real, "eigenvalues": ev }));
    }
    rep
}

/// `F(A) = A⁰⁰ Σ_{i≥1} Aⁱⁱ - Σ_{i≥1} (Aⁱ⁰)²`.
pub fn gap_f(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows() - 1;
    a[(0, 0)] * (1..=n).map(|i| a[(i, i)]).sum::<f64>() - (1..=n).map(|i| a[(i, 0)] * a[(i, 0)]).sum::<f64>()
}

fn in_gap_cone(a: &DMatrix<f64>) -> bool {
    let n = a.nrows() - 1;
    a[(0, 0)] > 0.0 && (1..=n).map(|i| a[(i, i)]).sum::<f64>() > 0.0 && gap_f(a) > 0.0
}

/// `Σ_ij F^{ij}(A) M_ij` for symmetric `M`.
pub fn gap_derivative(a: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let n = a.nrows() - 1;
    let tr: f64 = (1..=n).map(|i| a[(i, i)]).sum();
    let mut v = tr * m[(0, 0)];
    for i in 1..=n {
        v += a[(0, 0)] * m[(i, i)] - a[(i, 0)] * (m[(i, 0)] + m[(0, i)]);
    }
    v
}

/// `Σ_i F^{ii}(A)`.
pub fn gap_trace(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows() - 1;
    (1..=n).map(|i| a[(i, i)]).sum::<f64>() + n as f64 * a[(0, 0)]
}

/// Largest `ε` (to bisection accuracy, from below) with `B - εI` in the cone and `F(B - εI) > F(A)`.
pub fn bisect_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let fa = gap_f(a);
    let ok = |e: f64| {
        let shifted = b - DMatrix::identity(n, n) * e;
        in_gap_cone(&shifted) && gap_f(&shifted) > fa
    };
    if !ok(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, b[(0, 0)]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    lo
}

fn sample_gap_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=i {
                let v = if i == j { rng.random_range(0.05..3.0) } else { rng.random_range(-1.5..1.5) };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        if in_gap_cone(&m) {
            return m;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub lhs: f64,
    pub eps: f64,
    pub trace: f64,
}

/// `Σ F^{ij}(A)(B - A)_ij` against `ε Σ F^{ii}(A)`; requires `F(B) > F(A)`.
pub fn gap_inequality(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<GapSample> {
    (in_gap_cone(a) && in_gap_cone(b) && gap_f(b) > gap_f(a)).then(|| GapSample {
        lhs: gap_derivative(a, &(b - a)),
        eps: bisect_gap(a, b),
        trace: gap_trace(a),
    })
}

/// Sampled gap inequality on `(n+1)×(n+1)` symmetric matrices.
pub fn gap_lemma(samples: usize, n: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CheckReport::new("gap inequality", tol);
    let mut taken = 0;
    while taken < samples {
        let mut a = sample_gap_matrix(&mut rng, n);
        let mut b = sample_gap_matrix(&mut rng, n);
        if gap_f(&a) > gap_f(&b) {
            std::mem::swap(&mut a, &mut b);
        }
        let Some(s) = gap_inequality(&a, &b) else { continue };
        taken += 1;
        let scale = s.lhs.abs().max(s.eps * s.trace).max(1.0);
        rep.observe((s.lhs - s.eps * s.trace) / scale, || {
            serde_json::json!({ "a": a.as_slice(), "b": b.as_slice(), "sample": s })
        });
    }
    rep
}
