use serde::{Deserialize, Serialize};

use super::newton::newton_direction;
use super::operator::{residual_unchecked, OperatorCoefficients};
use super::{ContinuityProblem, GeodesicError, SpaceTimeField, SpaceTimePoint};

/// Search box for `Φ = tφ₁ + (1-t)φ₀ + a t(t-1) + t^b (1-t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionSearch {
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    /// Required lower bound on `A` of the convex combination.
    pub min_a: f64,
}

impl Default for SubsolutionSearch {
    fn default() -> Self {
        Self {
            a_values: (0..=24).map(|k| 1e-3 * 2f64.powi(k)).collect(),
            b_values: vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0],
            min_a: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsolution {
    pub a: f64,
    pub b: f64,
    pub field: SpaceTimeField,
    /// Minimum over all nodes of `Φ_tt A(Φ) - |∇Φ_t|² - ε + nXΦ_t²/2`.
    pub margin: f64,
    pub worst: SpaceTimePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPair {
    pub underline: Subsolution,
    /// Present when the supersolution problem is well posed (`X ≤ 0`).
    pub overline: Option<SpaceTimeField>,
}

/// `(Φ, Φ_t, Φ_tt)` of the time profile `a t(t-1) + t^b (1-t)`.
fn profile(a: f64, b: f64, t: f64) -> (f64, f64, f64) {
    let tb = |k: f64| if k == 0.0 { 1.0 } else { t.powf(k) };
    let v = a * t * (t - 1.0) + tb(b) * (1.0 - t);
    let d = a * (2.0 * t - 1.0) + b * tb(b - 1.0) - (b + 1.0) * tb(b);
    let dd2 = if b == 1.0 { 0.0 } else { b * (b - 1.0) * tb(b - 2.0) };
    let dd = 2.0 * a + dd2 - (b + 1.0) * b * tb(b - 1.0);
    (v, d, dd)
}

struct Fixed {
    lap0: Vec<f64>,
    lap1: Vec<f64>,
    grad_sq: Vec<f64>,
}

fn fixed_parts(prob: &ContinuityProblem) -> Fixed {
    let ops = prob.ops();
    let diff: Vec<f64> = prob.phi1().iter().zip(prob.phi0()).map(|(a, b)| a - b).collect();
    Fixed { lap0: ops.laplacian(prob.phi0()), lap1: ops.laplacian(prob.phi1()), grad_sq: ops.grad_norm_sq(&diff) }
}

/// Pointwise subsolution margin of the family member `(a, b)` at time `t`.
fn margin_level(prob: &ContinuityProblem, fx: &Fixed, a: f64, b: f64, t: f64) -> (Vec<f64>, Vec<f64>) {
    let n = prob.n() as f64;
    let x = prob.x();
    let (v, d, dd) = profile(a, b, t);
    let mut phi = Vec::with_capacity(x.len());
    let mut margin = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (p0, p1) = (prob.phi0()[i], prob.phi1()[i]);
        let f = t * p1 + (1.0 - t) * p0 + v;
        let ft = p1 - p0 + d;
        let aa = n + n * x[i] * f + t * fx.lap1[i] + (1.0 - t) * fx.lap0[i];
        phi.push(f);
        margin.push(dd * aa - fx.grad_sq[i] - prob.eps() + 0.5 * n * x[i] * ft * ft);
    }
    (phi, margin)
}

fn evaluate(prob: &ContinuityProblem, fx: &Fixed, a: f64, b: f64, nt: usize) -> Subsolution {
    let domain = prob.metric().domain();
    let mut levels = Vec::with_capacity(nt + 1);
    let mut worst = (f64::INFINITY, 0, 0);
    for m in 0..=nt {
        let t = m as f64 / nt as f64;
        let (mut phi, margin) = margin_level(prob, fx, a, b, t);
        if m == 0 {
            phi = prob.phi0().to_vec();
        } else if m == nt {
            phi = prob.phi1().to_vec();
        }
        for (i, v) in margin.iter().enumerate() {
            if !(*v >= worst.0) {
                worst = (*v, i, m);
            }
        }
        levels.push(phi);
    }
    let field = SpaceTimeField::from_levels(domain, levels);
    let point = field.point(worst.1, worst.2);
    Subsolution { a, b, field, margin: worst.0, worst: point }
}

/// Grid search over the family; returns the feasible member with the smallest `a`.
pub fn construct_subsolution(
    prob: &ContinuityProblem,
    nt: usize,
    search: &SubsolutionSearch,
) -> Result<BarrierPair, GeodesicError> {
    let fx = fixed_parts(prob);
    let n = prob.n() as f64;
    let x = prob.x();
    let domain = prob.metric().domain();
    for m in 0..=nt {
        let t = m as f64 / nt as f64;
        for i in 0..x.len() {
            let conv = t * prob.phi1()[i] + (1.0 - t) * prob.phi0()[i];
            let a = n + n * x[i] * conv + t * fx.lap1[i] + (1.0 - t) * fx.lap0[i];
            if a < search.min_a {
                let point = SpaceTimePoint { index: i, level: m, coords: domain.coords(i), t };
                return Err(GeodesicError::SubsolutionPrecondition { point, value: a });
            }
        }
    }
    let mut best: Option<Subsolution> = None;
    for &a in &search.a_values {
        let mut feasible: Option<Subsolution> = None;
        for &b in &search.b_values {
            let cand = evaluate(prob, &fx, a, b, nt);
            if cand.margin > 0.0 && feasible.as_ref().is_none_or(|f| cand.margin > f.margin) {
                feasible = Some(cand.clone());
            }
            if best.as_ref().is_none_or(|bst| cand.margin > bst.margin) {
                best = Some(cand);
            }
        }
        if let Some(underline) = feasible {
            let overline = solve_supersolution(prob, nt, f64::INFINITY).ok();
            return Ok(BarrierPair { underline, overline });
        }
    }
    let best = best.expect("non-empty search box");
    Err(GeodesicError::SearchExhausted { best_margin: best.margin, a: best.a, b: best.b })
}

/// Solves `n + u_tt + Δu + nXu = 0` with the boundary data of `prob`.
pub fn solve_supersolution(prob: &ContinuityProblem, nt: usize, x_tol: f64) -> Result<SpaceTimeField, GeodesicError> {
    if x_tol.is_finite() {
        prob.check_x_nonpositive(x_tol)?;
    } else if prob.x().iter().any(|v| *v > 0.0) {
        return Err(GeodesicError::XPositive { max: prob.x().iter().copied().fold(f64::MIN, f64::max), coords: vec![] });
    }
    let lin = ContinuityProblem { forcing: None, ..prob.at_s(0.0).unchecked_eps(0.0) };
    let mut u = lin.linear_path(nt);
    for _ in 0..3 {
        let res = residual_unchecked(&u, &lin);
        if res.iter().flatten().all(|v| v.abs() <= 1e-10) {
            return Ok(u);
        }
        let coef = OperatorCoefficients::compute(&u, &lin);
        let delta = newton_direction(&u, &lin, &coef, &res).ok_or(GeodesicError::Singular { s: 0.0 })?;
        u.add_interior(&delta, 1.0);
    }
    let r = residual_unchecked(&u, &lin).iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if r <= 1e-10 {
        Ok(u)
    } else {
        Err(GeodesicError::LinearSolve { residual: r })
    }
}

/// Subsolution margin by an independent route: finite differences in time on the sampled field.
pub fn subsolution_margin_fd(prob: &ContinuityProblem, field: &SpaceTimeField, a: f64, b: f64) -> f64 {
    // Evaluate Φ on a fine auxiliary time grid around each node and difference it.
    let n = prob.n() as f64;
    let x = prob.x();
    let ops = prob.ops();
    let h = 1e-4;
    let phi_at = |t: f64| -> Vec<f64> {
        let (v, _, _) = profile(a, b, t);
        prob.phi0().iter().zip(prob.phi1()).map(|(p0, p1)| t * p1 + (1.0 - t) * p0 + v).collect()
    };
    let mut worst = f64::INFINITY;
    for m in 0..=field.nt() {
        let t = field.time(m);
        let (tm, tp) = if m == 0 {
            (t, t + 2.0 * h)
        } else if m == field.nt() {
            (t - 2.0 * h, t)
        } else {
            (t - h, t + h)
        };
        let mid = 0.5 * (tm + tp);
        let (fm, f0, fp) = (phi_at(tm), phi_at(mid), phi_at(tp));
        let here = phi_at(t);
        let ft: Vec<f64> = fp.iter().zip(&fm).map(|(p, q)| (p - q) / (tp - tm)).collect();
        let hh = 0.5 * (tp - tm);
        let ftt: Vec<f64> = (0..x.len()).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (hh * hh)).collect();
        let lap = ops.laplacian(&here);
        let gsq = ops.grad_norm_sq(&ft);
        for i in 0..x.len() {
            let aa = n + n * x[i] * here[i] + lap[i];
            let v = ftt[i] * aa - gsq[i] - prob.eps() + 0.5 * n * x[i] * ft[i] * ft[i];
            worst = worst.min(v);
        }
    }
    worst
}
