use serde::{Deserialize, Serialize};

use crate::grid::GridDomain;

/// Scalar field on `M × [0,1]` sampled at `nt + 1` uniform time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    domain: GridDomain,
    levels: Vec<Vec<f64>>,
}

/// Location of a value in a space-time field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub index: usize,
    pub level: usize,
    pub coords: Vec<f64>,
    pub t: f64,
}

impl SpaceTimeField {
    /// `nt` is the number of time intervals.
    pub fn zeros(domain: &GridDomain, nt: usize) -> Self {
        assert!(nt >= 2, "need at least one interior time level");
        Self { domain: domain.clone(), levels: vec![vec![0.0; domain.num_points()]; nt + 1] }
    }

    pub fn from_levels(domain: &GridDomain, levels: Vec<Vec<f64>>) -> Self {
        assert!(levels.len() >= 3, "need at least one interior time level");
        assert!(levels.iter().all(|l| l.len() == domain.num_points()));
        Self { domain: domain.clone(), levels }
    }

    pub fn from_fn<F: Fn(&[f64], f64) -> f64>(domain: &GridDomain, nt: usize, f: F) -> Self {
        let levels = (0..=nt)
            .map(|m| {
                let t = m as f64 / nt as f64;
                domain.sample(|x| f(x, t))
            })
            .collect();
        Self::from_levels(domain, levels)
    }

    /// `t φ₁ + (1-t) φ₀`.
    pub fn linear(domain: &GridDomain, nt: usize, phi0: &[f64], phi1: &[f64]) -> Self {
        let levels = (0..=nt)
            .map(|m| {
                let t = m as f64 / nt as f64;
                phi0.iter().zip(phi1).map(|(a, b)| (1.0 - t) * a + t * b).collect()
            })
            .collect();
        Self::from_levels(domain, levels)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn nt(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.nt() as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 / self.nt() as f64
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.levels[m]
    }

    pub fn level_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.levels[m]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn phi0(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn phi1(&self) -> &[f64] {
        &self.levels[self.nt()]
    }

    /// Interior levels concatenated, level-major.
    pub fn interior(&self) -> Vec<f64> {
        self.levels[1..self.nt()].concat()
    }

    pub fn add_interior(&mut self, delta: &[f64], scale: f64) {
        let np = self.domain.num_points();
        let nt = self.nt();
        for (m, chunk) in (1..nt).zip(delta.chunks(np)) {
            for (v, d) in self.levels[m].iter_mut().zip(chunk) {
                *v += scale * d;
            }
        }
    }

    pub fn point(&self, index: usize, level: usize) -> SpaceTimePoint {
        SpaceTimePoint { index, level, coords: self.domain.coords(index), t: self.time(level) }
    }

    /// `φ_t` at every level: central inside, second-order one-sided at the ends.
    pub fn phi_t(&self) -> Vec<Vec<f64>> {
        let nt = self.nt();
        let h = self.dt();
        (0..=nt)
            .map(|m| {
                let l = &self.levels;
                (0..l[m].len())
                    .map(|i| match m {
                        0 => (-3.0 * l[0][i] + 4.0 * l[1][i] - l[2][i]) / (2.0 * h),
                        m if m == nt => (3.0 * l[nt][i] - 4.0 * l[nt - 1][i] + l[nt - 2][i]) / (2.0 * h),
                        m => (l[m + 1][i] - l[m - 1][i]) / (2.0 * h),
                    })
                    .collect()
            })
            .collect()
    }

    /// `φ_tt` at interior level `m` (central).
    pub fn phi_tt_at(&self, m: usize) -> Vec<f64> {
        let h2 = self.dt() * self.dt();
        let l = &self.levels;
        (0..l[m].len()).map(|i| (l[m + 1][i] - 2.0 * l[m][i] + l[m - 1][i]) / h2).collect()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Reflection `t ↦ 1 - t`.
    pub fn time_reversed(&self) -> Self {
        let mut levels = self.levels.clone();
        levels.reverse();
        Self { domain: self.domain.clone(), levels }
    }
}
