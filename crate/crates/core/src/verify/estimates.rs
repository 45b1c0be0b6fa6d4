use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{relative_eigenvalues, CMat};
use crate::geodesic::{
    construct_subsolution, ellipticity_margin, BarrierPair, ContinuityProblem, GeodesicError, OperatorCoefficients,
    SpaceTimeField, SpaceTimePoint, SubsolutionSearch, SweepEntry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `min (φ - φ_lower)`.
    pub lower_margin: f64,
    pub lower_point: SpaceTimePoint,
    /// `min (φ_upper - φ)` when an upper barrier exists.
    pub upper_margin: Option<f64>,
    pub upper_point: Option<SpaceTimePoint>,
}

fn min_difference(a: &SpaceTimeField, b: &SpaceTimeField) -> (f64, SpaceTimePoint) {
    let mut best = (f64::INFINITY, 0, 0);
    for m in 0..=a.nt() {
        for (i, (x, y)) in a.level(m).iter().zip(b.level(m)).enumerate() {
            if !(x - y >= best.0) {
                best = (x - y, i, m);
            }
        }
    }
    (best.0, a.point(best.1, best.2))
}

fn same_grid(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<(), GeodesicError> {
    if a.domain() != b.domain() || a.nt() != b.nt() {
        return Err(GeodesicError::Config("barrier and solution live on different grids".into()));
    }
    Ok(())
}

/// Margins of `φ_lower ≤ φ ≤ φ_upper`; negative values are findings located at the returned points.
pub fn check_sandwich(phi: &SpaceTimeField, barriers: &BarrierPair) -> Result<SandwichReport, GeodesicError> {
    same_grid(phi, &barriers.underline.field)?;
    let (lower_margin, lower_point) = min_difference(phi, &barriers.underline.field);
    let (upper_margin, upper_point) = match &barriers.overline {
        Some(up) => {
            same_grid(phi, up)?;
            let (m, p) = min_difference(up, phi);
            (Some(m), Some(p))
        }
        None => (None, None),
    };
    Ok(SandwichReport { lower_margin, lower_point, upper_margin, upper_point })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// `min min(φ_t - φ_t(·,0), φ_t(·,1) - φ_t)`.
    pub margin: f64,
    pub point: SpaceTimePoint,
}

pub fn check_time_monotone(phi: &SpaceTimeField) -> MonotoneReport {
    let pt = phi.phi_t();
    let nt = phi.nt();
    let mut best = (f64::INFINITY, 0, 0);
    for (m, row) in pt.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let margin = (v - pt[0][i]).min(pt[nt][i] - v);
            if !(margin >= best.0) {
                best = (margin, i, m);
            }
        }
    }
    MonotoneReport { margin: best.0, point: phi.point(best.1, best.2) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub eps: f64,
    pub sup_phi_tt: f64,
    /// Largest absolute eigenvalue of `i∂∂̄φ` relative to `ω` over space-time.
    pub lambda1: f64,
    /// `sup (1 + |∇φ|²)`.
    pub k: f64,
    pub sup_grad_sq: f64,
    pub ratio_phi_tt: f64,
    pub ratio_ddbar: f64,
    pub sandwich: Option<SandwichReport>,
    pub monotone_margin: f64,
    pub ellipticity_margin: f64,
}

fn lambda1(phi: &SpaceTimeField, prob: &ContinuityProblem) -> f64 {
    let d = phi.domain();
    let n = d.n();
    let metric = prob.metric();
    (0..=phi.nt())
        .into_par_iter()
        .map(|m| {
            let h = d.complex_hessian(phi.level(m));
            (0..d.num_points())
                .map(|p| {
                    let hm = CMat::from_fn(n, n, |j, k| h[j][k][p]);
                    let ev = relative_eigenvalues(&hm, &metric.matrix_at(p)).expect("metric is positive");
                    ev.iter().fold(0.0_f64, |a, e| a.max(e.abs()))
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Estimate quantities of an accepted `s = 1` solution.
pub fn estimate_report(
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    barriers: Option<&BarrierPair>,
) -> Result<EstimateReport, GeodesicError> {
    let prob = prob.at_s(1.0);
    let coef = OperatorCoefficients::compute(phi, &prob);
    let sup_phi_tt = coef.levels.iter().flat_map(|l| l.phi_tt.iter()).fold(0.0_f64, |a, v| a.max(v.abs()));
    let sup_grad_sq = phi
        .levels()
        .iter()
        .map(|l| prob.ops().grad_norm_sq(l).into_iter().fold(0.0_f64, f64::max))
        .fold(0.0, f64::max);
    let k = 1.0 + sup_grad_sq;
    let l1 = lambda1(phi, &prob);
    let sandwich = barriers.map(|b| check_sandwich(phi, b)).transpose()?;
    Ok(EstimateReport {
        eps: prob.eps(),
        sup_phi_tt,
        lambda1: l1,
        k,
        sup_grad_sq,
        ratio_phi_tt: sup_phi_tt,
        ratio_ddbar: l1 / k,
        sandwich,
        monotone_margin: check_time_monotone(phi).margin,
        ellipticity_margin: ellipticity_margin(phi, &prob)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub reports: Vec<EstimateReport>,
    /// `(max - min)/max` of `sup|φ_tt|` across the sweep.
    pub drift_phi_tt: f64,
    /// Same for `sup|∂∂̄φ|/K`.
    pub drift_ddbar: f64,
    pub min_sandwich: f64,
    pub min_monotone: f64,
    pub min_ellipticity: f64,
}

fn drift(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = v.fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        (max - min) / max
    } else {
        0.0
    }
}

/// Estimate reports over an ε-sweep with barriers built at each ε.
pub fn estimate_ratios(
    prob: &ContinuityProblem,
    sweep: &[SweepEntry],
    search: &SubsolutionSearch,
) -> Result<SweepSummary, GeodesicError> {
    let mut reports = Vec::with_capacity(sweep.len());
    for e in sweep {
        let p = prob.with_eps(e.eps)?;
        let barriers = construct_subsolution(&p, e.field.nt(), search)?;
        reports.push(estimate_report(&e.field, &p, Some(&barriers))?);
    }
    let min_sandwich = reports
        .iter()
        .filter_map(|r| r.sandwich.as_ref())
        .flat_map(|s| std::iter::once(s.lower_margin).chain(s.upper_margin))
        .fold(f64::INFINITY, f64::min);
    Ok(SweepSummary {
        drift_phi_tt: drift(reports.iter().map(|r| r.sup_phi_tt)),
        drift_ddbar: drift(reports.iter().map(|r| r.ratio_ddbar)),
        min_sandwich,
        min_monotone: reports.iter().map(|r| r.monotone_margin).fold(f64::INFINITY, f64::min),
        min_ellipticity: reports.iter().map(|r| r.ellipticity_margin).fold(f64::INFINITY, f64::min),
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFieldReport {
    /// Smallest pointwise gap `ε` over points where `F(φ_lower) > F(φ)`.
    pub eps1: f64,
    /// Smallest `C₁ ≥ 0` making `ℒ(φ_lower - φ) ≥ ε₁ ΣF^{αᾱ} - C₁ sup(1 + φ_t²)` hold everywhere.
    pub c1: f64,
    /// Points with `F(φ_lower) > F(φ)`.
    pub gap_points: usize,
    pub total_points: usize,
}

/// Pointwise form of the gap inequality for the pair `(φ, φ_lower)`.
///
/// With `x = φ_tt`, `y = A`, `z = ∇φ_t`, `F = xy - |z|²` and `ℒ` is its derivative at `φ`.
pub fn gap_field_measurement(
    phi: &SpaceTimeField,
    lower: &SpaceTimeField,
    prob: &ContinuityProblem,
) -> Result<GapFieldReport, GeodesicError> {
    same_grid(phi, lower)?;
    let prob = prob.at_s(1.0);
    let n = prob.n() as f64;
    let x = prob.x();
    let ops = prob.ops();
    let cp = OperatorCoefficients::compute(phi, &prob);
    let cl = OperatorCoefficients::compute(lower, &prob);
    let mut eps1 = f64::INFINITY;
    let mut rows = Vec::new();
    let mut gap_points = 0;
    for (a, b) in cp.levels.iter().zip(&cl.levels) {
        let pair = ops.grad_pair_from(&a.grad_t, &b.grad_t);
        for i in 0..a.a.len() {
            let (xa, ya, za) = (a.phi_tt[i], a.a[i], a.grad_t_sq[i]);
            // the A-difference without the nX(φ_lower - φ) term, as in the principal part
            let (xb, yb, zb) = (b.phi_tt[i], b.a[i] - n * x[i] * (b.phi[i] - a.phi[i]), b.grad_t_sq[i]);
            let lu = ya * (xb - xa) + xa * (yb - ya) - 2.0 * (pair[i] - za);
            let trace = ya + n * xa;
            let fa = xa * ya - za;
            let f = |e: f64| (xb - e) * (yb - n * e) - zb;
            if xb > 0.0 && yb > 0.0 && f(0.0) > fa {
                gap_points += 1;
                let (mut lo, mut hi) = (0.0, xb.min(yb / n));
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > fa {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                eps1 = eps1.min(lo);
            }
            rows.push((lu, trace));
        }
    }
    let sup_t = phi.phi_t().iter().flatten().fold(0.0_f64, |m, v| m.max(v * v));
    let e1 = if eps1.is_finite() { eps1 } else { 0.0 };
    let c1 = rows.iter().map(|(lu, tr)| (e1 * tr - lu).max(0.0)).fold(0.0, f64::max) / (1.0 + sup_t);
    Ok(GapFieldReport { eps1: e1, c1, gap_points, total_points: rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{continuity_solve, ContinuityOptions};
    use crate::geometry::HermitianMetricField;
    use crate::grid::{DiffScheme, GridDomain};
    use crate::verify::flat_kahler_benchmark;
    use std::f64::consts::PI;

    fn flat_domain() -> GridDomain {
        GridDomain::uniform(3, 2.0 * PI, 8, vec![0, 2], DiffScheme::Spectral).unwrap()
    }

    #[test]
    fn lambda1_of_trig_field() {
        // i∂∂̄ cos(x0 + x2) = -¼ cos(x0 + x2) [[1, 1], [1, 1]] on z_0, z_1: eigenvalues -½cos, 0
        let d = flat_domain();
        let z = vec![0.0; d.num_points()];
        let prob = ContinuityProblem::new(HermitianMetricField::flat(&d), 2, 0.1, z.clone(), z).unwrap();
        let phi = SpaceTimeField::from_fn(&d, 4, |x, t| t * (1.0 - t) * 4.0 * (x[0] + x[2]).cos());
        assert!((lambda1(&phi, &prob) - 0.5).abs() < 1e-10);
        let conf = HermitianMetricField::conformal(&d, &vec![2f64.ln(); d.num_points()]);
        let prob = ContinuityProblem::new(conf, 2, 0.1, vec![0.0; 64], vec![0.0; 64]).unwrap();
        assert!((lambda1(&phi, &prob) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn sandwich_and_monotone_on_benchmark() {
        let prob = flat_kahler_benchmark(8, 1e-2).unwrap();
        let opts = ContinuityOptions { nt: 32, ..Default::default() };
        let (phi, _) = continuity_solve(&prob, &opts).unwrap();
        let barriers = construct_subsolution(&prob, 32, &SubsolutionSearch::default()).unwrap();
        let rep = estimate_report(&phi, &prob, Some(&barriers)).unwrap();
        let s = rep.sandwich.as_ref().unwrap();
        assert!(s.lower_margin >= -1e-7 && s.upper_margin.unwrap() >= -1e-7, "{s:?}");
        assert!(rep.monotone_margin >= -1e-7 && rep.ellipticity_margin > 0.0 && rep.k >= 1.0);

        // φ = φ_lower gives a zero first margin
        let same = check_sandwich(&barriers.underline.field, &barriers).unwrap();
        assert_eq!(same.lower_margin, 0.0);

        // an injected dip is located
        let mut bad = phi.clone();
        bad.level_mut(10)[5] -= 1.0;
        let s = check_sandwich(&bad, &barriers).unwrap();
        assert!(s.lower_margin < 0.0);
        assert_eq!((s.lower_point.level, s.lower_point.index), (10, 5));

        let g = gap_field_measurement(&phi, &barriers.underline.field, &prob).unwrap();
        assert!(g.eps1 > 0.0 && g.gap_points == g.total_points);
        assert!(g.c1 <= 1e-9, "{g:?}");
    }

    #[test]
    fn monotone_check_signs() {
        let d = flat_domain();
        let convex = SpaceTimeField::from_fn(&d, 16, |_, t| t * t);
        assert!(check_time_monotone(&convex).margin >= 0.0);
        let concave = SpaceTimeField::from_fn(&d, 16, |_, t| 0.5 * (0.1 - 3.0) * t * (t - 1.0));
        assert!(check_time_monotone(&concave).margin < 0.0);
    }
}
