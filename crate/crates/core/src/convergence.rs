//! Observed convergence orders from refinement studies.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    /// Mesh sizes, coarsest first.
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` for consecutive pairs.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`.
    pub fitted: f64,
}

impl OrderStudy {
    pub fn new(h: &[f64], errors: &[f64]) -> Self {
        assert_eq!(h.len(), errors.len(), "one error per mesh size");
        assert!(h.len() >= 2, "need at least two levels");
        let pairwise = h
            .windows(2)
            .zip(errors.windows(2))
            .map(|(hh, ee)| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln())
            .collect();
        let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
        let k = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        Self { h: h.to_vec(), errors: errors.to_vec(), pairwise, fitted: sxy / sxx }
    }

    /// Smallest consecutive-pair order.
    pub fn min_order(&self) -> f64 {
        self.pairwise.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
