use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::grid::{GridDomain, C64};

use super::HermitianMetricField;

/// Scalar operators of a metric written over the active real coordinates.
///
/// For real `f`, `Δf = Σ_{ab} c_{ab} D_a D_b f` and `|∇f|² = Σ_{ab} c_{ab} D_a f D_b f`
/// with the same real symmetric coefficient fields `c_{ab}`.
#[derive(Debug)]
pub struct MetricOperators {
    domain: GridDomain,
    /// Field `c_{ab}` at index `a*m+b`, `m` the number of active coordinates.
    coef: Vec<Vec<f64>>,
    dense_d: OnceLock<Vec<DMatrix<f64>>>,
    dense_lap: OnceLock<DMatrix<f64>>,
}

impl Clone for MetricOperators {
    fn clone(&self) -> Self {
        Self {
            domain: self.domain.clone(),
            coef: self.coef.clone(),
            dense_d: OnceLock::new(),
            dense_lap: OnceLock::new(),
        }
    }
}

/// Columns of the dense matrix of a linear map on grid fields.
pub fn dense_from_operator<F: Fn(&[f64]) -> Vec<f64> + Sync>(size: usize, op: F) -> DMatrix<f64> {
    use rayon::prelude::*;
    let cols: Vec<Vec<f64>> = (0..size)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; size];
            e[j] = 1.0;
            op(&e)
        })
        .collect();
    DMatrix::from_fn(size, size, |i, j| cols[j][i])
}

impl MetricOperators {
    pub fn new(g: &HermitianMetricField) -> Self {
        let domain = g.domain().clone();
        let n = domain.n();
        let active = domain.active().to_vec();
        let m = active.len();
        let inv = g.inverse_entries();
        let np = domain.num_points();
        let mut coef = vec![vec![0.0; np]; m * m];
        // ∂_j∂_k̄ = ¼ Σ (-i)^α i^β D_{2j+α} D_{2k+β}; weight by g^{jk̄} = (G^{-1})_{kj}
        for (ia, &a) in active.iter().enumerate() {
            for (ib, &b) in active.iter().enumerate() {
                let (j, alpha) = (a / 2, a % 2);
                let (k, beta) = (b / 2, b % 2);
                let phase = C64::new(0.0, -1.0).powu(alpha as u32) * C64::new(0.0, 1.0).powu(beta as u32) * 0.25;
                let ginv = &inv[k * n + j];
                for p in 0..np {
                    let v = (ginv[p] * phase).re;
                    coef[ia * m + ib][p] += 0.5 * v;
                    coef[ib * m + ia][p] += 0.5 * v;
                }
            }
        }
        Self { domain, coef, dense_d: OnceLock::new(), dense_lap: OnceLock::new() }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn num_active(&self) -> usize {
        self.domain.active().len()
    }

    pub fn coef(&self, a: usize, b: usize) -> &[f64] {
        &self.coef[a * self.num_active() + b]
    }

    /// `D_a f` for the `a`-th active coordinate.
    pub fn d(&self, f: &[f64], a: usize) -> Vec<f64> {
        self.domain.d_real_r(f, self.domain.active()[a])
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.num_active()).map(|a| self.d(f, a)).collect()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let m = self.num_active();
        let grad = self.gradient(f);
        let mut out = vec![0.0; f.len()];
        for a in 0..m {
            for b in a..m {
                let dd = if a == b {
                    self.domain.d2_real_r(f, self.domain.active()[a], self.domain.active()[a])
                } else {
                    self.d(&grad[a], b)
                };
                let w = if a == b { 1.0 } else { 2.0 };
                for ((o, c), v) in out.iter_mut().zip(self.coef(a, b)).zip(&dd) {
                    *o += w * c * v;
                }
            }
        }
        out
    }

    /// `Σ c_{ab} D_a f D_b h`, the metric pairing of real gradients.
    pub fn grad_pair(&self, f: &[f64], h: &[f64]) -> Vec<f64> {
        let (gf, gh) = (self.gradient(f), self.gradient(h));
        self.grad_pair_from(&gf, &gh)
    }

    pub fn grad_pair_from(&self, gf: &[Vec<f64>], gh: &[Vec<f64>]) -> Vec<f64> {
        let m = self.num_active();
        let mut out = vec![0.0; gf[0].len()];
        for a in 0..m {
            for b in 0..m {
                let c = self.coef(a, b);
                for p in 0..out.len() {
                    out[p] += c[p] * gf[a][p] * gh[b][p];
                }
            }
        }
        out
    }

    pub fn grad_norm_sq(&self, f: &[f64]) -> Vec<f64> {
        self.grad_pair(f, f)
    }

    /// Dense matrices of `D_a`.
    pub fn dense_d(&self) -> &[DMatrix<f64>] {
        self.dense_d.get_or_init(|| {
            (0..self.num_active())
                .map(|a| dense_from_operator(self.domain.num_points(), |v| self.d(v, a)))
                .collect()
        })
    }

    pub fn dense_laplacian(&self) -> &DMatrix<f64> {
        self.dense_lap.get_or_init(|| dense_from_operator(self.domain.num_points(), |v| self.laplacian(v)))
    }

    /// Dense matrix of `v ↦ Σ c_{ab} w_a D_b v` for given fields `w_a`.
    pub fn dense_gradient_pairing(&self, w: &[Vec<f64>]) -> DMatrix<f64> {
        let m = self.num_active();
        let np = self.domain.num_points();
        let d = self.dense_d();
        let mut out = DMatrix::zeros(np, np);
        for b in 0..m {
            let mut row_scale = vec![0.0; np];
            for a in 0..m {
                let c = self.coef(a, b);
                for p in 0..np {
                    row_scale[p] += c[p] * w[a][p];
                }
            }
            for i in 0..np {
                if row_scale[i] != 0.0 {
                    for j in 0..np {
                        out[(i, j)] += row_scale[i] * d[b][(i, j)];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DiffScheme;
    use std::f64::consts::PI;

    #[test]
    fn agrees_with_complex_formulas() {
        let d = GridDomain::uniform(3, 2.0 * PI, 16, vec![0, 1, 2], DiffScheme::Spectral).unwrap();
        let g = HermitianMetricField::balanced_root(&d, &d.sample(|x| 0.5 * (x[0] + x[1]).cos() + 0.3 * x[2].sin())).unwrap();
        let ops = MetricOperators::new(&g);
        let f = d.sample(|x| (x[0] - 2.0 * x[2]).sin() + x[1].cos());
        for (a, b) in ops.laplacian(&f).iter().zip(g.chern_laplacian(&f)) {
            assert!((a - b).abs() < 1e-11);
        }
        for (a, b) in ops.grad_norm_sq(&f).iter().zip(g.grad_norm_sq(&f)) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn dense_operators_match_matrix_free() {
        let d = GridDomain::uniform(2, 2.0 * PI, 8, vec![0, 3], DiffScheme::Spectral).unwrap();
        let g = HermitianMetricField::kahler_perturbed(&d, &d.sample(|x| 0.2 * (x[0] + x[3]).sin())).unwrap();
        let ops = MetricOperators::new(&g);
        let f = d.sample(|x| x[0].sin() * (2.0 * x[3]).cos());
        let v = nalgebra::DVector::from_vec(f.clone());
        let lap = ops.dense_laplacian() * &v;
        for (a, b) in lap.iter().zip(ops.laplacian(&f)) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = ops.gradient(&d.sample(|x| x[3].cos()));
        let pair = ops.dense_gradient_pairing(&w) * &v;
        let direct = ops.grad_pair_from(&w, &ops.gradient(&f));
        for (a, b) in pair.iter().zip(direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
