use rayon::prelude::*;

use crate::algebra::cholesky;
#[cfg(test)]
use crate::algebra::CMat;
use crate::grid::{GridDomain, C64};

use super::{GeometryError, HermitianMetricField};

/// Chern torsion `T^l_{jk} = g^{lm̄}(∂_j g_{km̄} - ∂_k g_{jm̄})`.
#[derive(Debug, Clone)]
pub struct TorsionField {
    domain: GridDomain,
    /// Component `(l,j,k)` at index `(l*n+j)*n+k`.
    t: Vec<Vec<C64>>,
}

/// `X` from the direct wedge formula and from the torsion norm.
#[derive(Debug, Clone)]
pub struct XReport {
    pub p: usize,
    pub direct: Vec<f64>,
    /// Present for `n ≥ 3`.
    pub torsion: Option<Vec<f64>>,
    pub discrepancy: Option<f64>,
    pub balanced_residual: f64,
}

impl XReport {
    pub fn min(&self) -> f64 {
        self.direct.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.direct.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TorsionField {
    pub fn component(&self, l: usize, j: usize, k: usize) -> &[C64] {
        let n = self.domain.n();
        &self.t[(l * n + j) * n + k]
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    /// `max |T^l_{jk} + T^l_{kj}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.domain.n();
        let mut r = 0.0_f64;
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b) = (self.component(l, j, k), self.component(l, k, j));
                    r = a.iter().zip(b).fold(r, |m, (x, y)| m.max((x + y).norm()));
                }
            }
        }
        r
    }

    pub fn sup_norm(&self) -> f64 {
        self.t.iter().map(|c| crate::grid::sup_norm_c(c)).fold(0.0, f64::max)
    }

    /// `Σ |T'^c_{ab}|²` over all indices in a pointwise unitary frame.
    pub fn frame_norm_sq(&self, g: &HermitianMetricField) -> Vec<f64> {
        let n = self.domain.n();
        (0..self.domain.num_points())
            .into_par_iter()
            .map(|p| {
                // frame e_a = C_{ja} ∂_j with C = L^{-T}, so C^T g C̄ = I
                let l = cholesky(&g.matrix_at(p)).expect("positive-definite metric");
                let c = l.transpose().try_inverse().expect("invertible factor");
                let ci = l.transpose();
                let mut total = 0.0;
                for cc in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let mut v = C64::new(0.0, 0.0);
                            for li in 0..n {
                                for j in 0..n {
                                    for k in 0..n {
                                        v += ci[(cc, li)] * self.component(li, j, k)[p] * c[(j, a)] * c[(k, b)];
                                    }
                                }
                            }
                            total += v.norm_sqr();
                        }
                    }
                }
                total
            })
            .collect()
    }
}

impl HermitianMetricField {
    pub fn chern_torsion(&self) -> TorsionField {
        let n = self.n();
        let d = self.domain();
        let inv = self.inverse_entries();
        // dg[j][k*n+m] = ∂_j g_{km̄}
        let dg: Vec<Vec<Vec<C64>>> = (0..n)
            .map(|j| (0..n * n).map(|km| d.d_holo(&self.entries()[km], j)).collect())
            .collect();
        let np = d.num_points();
        let mut t = vec![vec![C64::new(0.0, 0.0); np]; n * n * n];
        for l in 0..n {
            for j in 0..n {
                for k in j + 1..n {
                    let mut f = vec![C64::new(0.0, 0.0); np];
                    for m in 0..n {
                        // g^{lm̄} = (G^{-1})_{ml}
                        let ginv = &inv[m * n + l];
                        let (a, b) = (&dg[j][k * n + m], &dg[k][j * n + m]);
                        for p in 0..np {
                            f[p] += ginv[p] * (a[p] - b[p]);
                        }
                    }
                    t[(l * n + k) * n + j] = f.iter().map(|v| -v).collect();
                    t[(l * n + j) * n + k] = f;
                }
            }
        }
        TorsionField { domain: d.clone(), t }
    }

    /// `X` with `X ω^n = i∂∂̄ω^{p-1}∧ω^{n-p}`, plus the torsion-norm route
    /// `X = (n-p)(p-1)/(2n(n-1)(n-2)) Σ|T|²` valid on balanced metrics.
    pub fn compute_x(&self, p: usize) -> Result<XReport, GeometryError> {
        let n = self.n();
        if !(2..=n).contains(&p) {
            return Err(GeometryError::BadOrder { p, n });
        }
        let w = self.kahler_form();
        let top = w.wedge_power(p - 1)?.i_ddbar().wedge(&w.wedge_power(n - p)?)?;
        let direct = self.top_ratio(&top);
        let (torsion, discrepancy) = if n >= 3 {
            let c = ((n - p) * (p - 1)) as f64 / (2.0 * (n * (n - 1) * (n - 2)) as f64);
            let tx: Vec<f64> = self.chern_torsion().frame_norm_sq(self).iter().map(|v| c * v).collect();
            let disc = direct.iter().zip(&tx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (Some(tx), Some(disc))
        } else {
            (None, None)
        };
        Ok(XReport { p, direct, torsion, discrepancy, balanced_residual: self.balanced_residual() })
    }
}

/// `C^T g C̄` for the frame used in `frame_norm_sq`.
#[cfg(test)]
fn frame_gram(g: &CMat) -> CMat {
    let l = cholesky(g).unwrap();
    let c = l.transpose().try_inverse().unwrap();
    c.transpose() * g * c.map(|z| z.conj())
}
