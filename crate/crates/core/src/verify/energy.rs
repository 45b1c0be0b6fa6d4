use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geodesic::{energy_with, ContinuityProblem, GeodesicError, SpaceTimeField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub perturbation: usize,
    pub delta: f64,
    /// Sup norm of the perturbation.
    pub psi_norm: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    /// `(ℰ(φ+δψ) - ℰ(φ-δψ)) / 2δ`.
    pub first_variation: f64,
    /// `(ℰ(φ+δψ) - 2ℰ(φ) + ℰ(φ-δψ)) / δ²`.
    pub second_variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProbe {
    pub energy: f64,
    pub rows: Vec<ProbeRow>,
    /// Perturbations whose path left the positivity set, with the failure message.
    pub skipped: Vec<(usize, f64, String)>,
    /// `max |first variation| / ‖ψ‖`.
    pub max_first_variation: f64,
    pub min_second_variation: f64,
}

/// `t(1-t)(c₀ + Σ c_k cos(k·x + θ_k))` with a few random low modes.
fn perturbation(rng: &mut ChaCha8Rng, phi: &SpaceTimeField) -> SpaceTimeField {
    let d = phi.domain();
    let active = d.active().to_vec();
    let c0 = rng.random_range(-1.0..1.0);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let k = active.iter().map(|_| f64::from(rng.random_range(-2_i32..=2))).collect();
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    SpaceTimeField::from_fn(d, phi.nt(), |x, t| {
        let s: f64 = modes
            .iter()
            .map(|(k, c, th)| c * (k.iter().zip(&active).map(|(k, &a)| k * x[a]).sum::<f64>() + th).cos())
            .sum();
        t * (1.0 - t) * (c0 + s)
    })
}

fn shifted(phi: &SpaceTimeField, psi: &SpaceTimeField, delta: f64) -> SpaceTimeField {
    let mut out = phi.clone();
    for m in 1..phi.nt() {
        for (v, p) in out.level_mut(m).iter_mut().zip(psi.level(m)) {
            *v += delta * p;
        }
    }
    out
}

/// Energy along `φ ± δψ` for `count` seeded perturbations vanishing at both ends.
pub fn energy_minimality_probe(
    phi: &SpaceTimeField,
    prob: &ContinuityProblem,
    count: usize,
    deltas: &[f64],
    seed: u64,
) -> Result<EnergyProbe, GeodesicError> {
    let weights = prob.metric().det();
    let e = |f: &SpaceTimeField| energy_with(f, prob.ops(), prob.x(), &weights);
    let e0 = e(phi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for k in 0..count {
        let psi = perturbation(&mut rng, phi);
        let psi_norm = psi.levels().iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        for &delta in deltas {
            match (e(&shifted(phi, &psi, delta)), e(&shifted(phi, &psi, -delta))) {
                (Ok(ep), Ok(em)) => rows.push(ProbeRow {
                    perturbation: k,
                    delta,
                    psi_norm,
                    e_plus: ep,
                    e_minus: em,
                    first_variation: (ep - em) / (2.0 * delta),
                    second_variation: (ep - 2.0 * e0 + em) / (delta * delta),
                }),
                (Err(err), _) | (_, Err(err)) => skipped.push((k, delta, err.to_string())),
            }
        }
    }
    let max_first_variation =
        rows.iter().map(|r| r.first_variation.abs() / r.psi_norm.max(1e-300)).fold(0.0, f64::max);
    let min_second_variation = rows.iter().map(|r| r.second_variation).fold(f64::INFINITY, f64::min);
    Ok(EnergyProbe { energy: e0, rows, skipped, max_first_variation, min_second_variation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{continuity_solve, ContinuityOptions};
    use crate::verify::flat_kahler_benchmark;

    #[test]
    fn zero_perturbation_is_equality() {
        let prob = flat_kahler_benchmark(8, 0.1).unwrap();
        let phi = prob.linear_path(8);
        let zero = SpaceTimeField::zeros(phi.domain(), 8);
        let w = prob.metric().det();
        let a = energy_with(&phi, prob.ops(), prob.x(), &w).unwrap();
        let b = energy_with(&shifted(&phi, &zero, 1e-2), prob.ops(), prob.x(), &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geodesic_is_nearly_critical_and_locally_minimal() {
        let prob = flat_kahler_benchmark(8, 1e-4).unwrap();
        let (phi, _) = continuity_solve(&prob, &ContinuityOptions::default()).unwrap();
        let probe = energy_minimality_probe(&phi, &prob, 20, &[1e-2, 1e-3], 11).unwrap();
        assert!(probe.skipped.is_empty());
        assert!(probe.max_first_variation < 1e-2, "{}", probe.max_first_variation);
        assert!(probe.min_second_variation >= 0.0);
    }
}
