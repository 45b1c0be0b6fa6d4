use crate::geometry::HermitianMetricField;

use super::operator::residual_unchecked;
use super::{ContinuityProblem, GeodesicError, SpaceTimeField};

/// How the forcing of a manufactured problem is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    /// Exact time derivatives; the discrete solution differs from `φ*` by the truncation error.
    Continuum,
    /// Discrete operator applied to sampled `φ*`; `φ*` is then an exact discrete solution.
    Discrete,
}

/// `φ*(x, t) = (t² - t) + 0.1 (sin πt + t) w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub w: Vec<f64>,
}

impl Manufactured {
    fn time_parts(t: f64) -> [(f64, f64); 3] {
        use std::f64::consts::PI;
        let (s, c) = (PI * t).sin_cos();
        [
            (t * t - t, 0.1 * (s + t)),
            (2.0 * t - 1.0, 0.1 * (PI * c + 1.0)),
            (2.0, -0.1 * PI * PI * s),
        ]
    }

    /// `(φ*, φ*_t, φ*_tt)` at time `t`.
    pub fn eval(&self, t: f64) -> [Vec<f64>; 3] {
        Self::time_parts(t).map(|(a, b)| self.w.iter().map(|w| a + b * w).collect())
    }

    pub fn sample(&self, domain: &crate::grid::GridDomain, nt: usize) -> SpaceTimeField {
        let levels = (0..=nt).map(|m| self.eval(m as f64 / nt as f64)[0].clone()).collect();
        SpaceTimeField::from_levels(domain, levels)
    }

    /// Builds the forced problem at continuity parameter `s` and returns it with sampled `φ*`.
    pub fn problem(
        &self,
        metric: HermitianMetricField,
        p: usize,
        eps: f64,
        s: f64,
        nt: usize,
        kind: ForcingKind,
    ) -> Result<(ContinuityProblem, SpaceTimeField), GeodesicError> {
        let exact = self.sample(metric.domain(), nt);
        let base =
            ContinuityProblem::new(metric, p, eps, exact.phi0().to_vec(), exact.phi1().to_vec())?.at_s(s);
        let forcing = match kind {
            ForcingKind::Discrete => residual_unchecked(&exact, &base),
            ForcingKind::Continuum => self.continuum_forcing(&base, nt),
        };
        Ok((base.with_forcing(forcing), exact))
    }

    fn continuum_forcing(&self, prob: &ContinuityProblem, nt: usize) -> Vec<Vec<f64>> {
        let (s, n) = (prob.s(), prob.n() as f64);
        let ops = prob.ops();
        let x = prob.x();
        let mut out = vec![vec![0.0; x.len()]; nt + 1];
        for (m, row) in out.iter_mut().enumerate().take(nt).skip(1) {
            let [f, ft, ftt] = self.eval(m as f64 / nt as f64);
            let lap = ops.laplacian(&f);
            let gsq = ops.grad_norm_sq(&ft);
            for i in 0..x.len() {
                let a = n + n * x[i] * f[i] + lap[i];
                let g = ftt[i] * a - gsq[i];
                row[i] = s * g + (1.0 - s) * (ftt[i] + a) - prob.eps() + 0.5 * n * s * x[i] * ft[i] * ft[i];
            }
        }
        out
    }

    /// Newton start `φ* + 0.05 t(1-t)(1 + 0.5 w)`.
    pub fn perturbed_start(&self, exact: &SpaceTimeField) -> SpaceTimeField {
        let mut out = exact.clone();
        for m in 1..exact.nt() {
            let t = exact.time(m);
            for (v, w) in out.level_mut(m).iter_mut().zip(&self.w) {
                *v += 0.05 * t * (1.0 - t) * (1.0 + 0.5 * w);
            }
        }
        out
    }
}
