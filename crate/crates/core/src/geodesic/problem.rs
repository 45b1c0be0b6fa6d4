use std::sync::Arc;

use crate::geometry::{HermitianMetricField, MetricOperators};

use super::{GeodesicError, SpaceTimeField};

/// `P_s(φ) = s F(φ) + (1-s)(φ_tt + A) - ε + (nsX/2) φ_t² - r` with Dirichlet data.
#[derive(Debug, Clone)]
pub struct ContinuityProblem {
    pub(crate) s: f64,
    pub(crate) eps: f64,
    pub(crate) p: usize,
    pub(crate) metric: Arc<HermitianMetricField>,
    pub(crate) ops: Arc<MetricOperators>,
    pub(crate) x: Arc<Vec<f64>>,
    pub(crate) phi0: Vec<f64>,
    pub(crate) phi1: Vec<f64>,
    pub(crate) forcing: Option<Arc<Vec<Vec<f64>>>>,
}

impl ContinuityProblem {
    /// Problem at `s = 1`; `X` is taken from the direct wedge route.
    pub fn new(
        metric: HermitianMetricField,
        p: usize,
        eps: f64,
        phi0: Vec<f64>,
        phi1: Vec<f64>,
    ) -> Result<Self, GeodesicError> {
        let x = metric.compute_x(p)?.direct;
        Self::with_x(metric, p, eps, phi0, phi1, x)
    }

    /// Same with an explicitly supplied `X` field.
    pub fn with_x(
        metric: HermitianMetricField,
        p: usize,
        eps: f64,
        phi0: Vec<f64>,
        phi1: Vec<f64>,
        x: Vec<f64>,
    ) -> Result<Self, GeodesicError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(GeodesicError::Config(format!("epsilon must be positive, got {eps}")));
        }
        let n = metric.n();
        if !(2..=n).contains(&p) {
            return Err(GeodesicError::Config(format!("p = {p} out of range 2..={n}")));
        }
        let np = metric.domain().num_points();
        if phi0.len() != np || phi1.len() != np || x.len() != np {
            return Err(GeodesicError::Config("boundary data or X does not match the grid".into()));
        }
        let ops = Arc::new(MetricOperators::new(&metric));
        Ok(Self {
            s: 1.0,
            eps,
            p,
            metric: Arc::new(metric),
            ops,
            x: Arc::new(x),
            phi0,
            phi1,
            forcing: None,
        })
    }

    pub fn at_s(&self, s: f64) -> Self {
        assert!((0.0..=1.0).contains(&s), "s = {s} outside [0, 1]");
        Self { s, ..self.clone() }
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, GeodesicError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(GeodesicError::Config(format!("epsilon must be positive, got {eps}")));
        }
        Ok(Self { eps, ..self.clone() })
    }

    /// Forcing `r` per time level (`nt + 1` levels, boundary levels ignored).
    pub fn with_forcing(&self, r: Vec<Vec<f64>>) -> Self {
        Self { forcing: Some(Arc::new(r)), ..self.clone() }
    }

    pub(crate) fn unchecked_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.metric.n()
    }

    pub fn metric(&self) -> &HermitianMetricField {
        &self.metric
    }

    pub fn ops(&self) -> &MetricOperators {
        &self.ops
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    pub fn phi1(&self) -> &[f64] {
        &self.phi1
    }

    pub fn forcing(&self) -> Option<&[Vec<f64>]> {
        self.forcing.as_deref().map(|v| v.as_slice())
    }

    /// Rejects `X > tol` anywhere, the sign condition under which the path is known to be solvable.
    pub fn check_x_nonpositive(&self, tol: f64) -> Result<(), GeodesicError> {
        let (i, &max) = self
            .x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        if max > tol {
            return Err(GeodesicError::XPositive { max, coords: self.metric.domain().coords(i) });
        }
        Ok(())
    }

    /// Linear interpolation between the boundary slices.
    pub fn linear_path(&self, nt: usize) -> SpaceTimeField {
        SpaceTimeField::linear(self.metric.domain(), nt, &self.phi0, &self.phi1)
    }

    pub(crate) fn check_field(&self, phi: &SpaceTimeField) -> Result<(), GeodesicError> {
        if phi.domain() != self.metric.domain() {
            return Err(GeodesicError::Config("field lives on another grid".into()));
        }
        if phi.phi0() != self.phi0.as_slice() || phi.phi1() != self.phi1.as_slice() {
            return Err(GeodesicError::Config("field does not carry the boundary data".into()));
        }
        if let Some(r) = &self.forcing {
            if r.len() != phi.nt() + 1 {
                return Err(GeodesicError::Config(format!(
                    "forcing has {} levels, field has {}",
                    r.len(),
                    phi.nt() + 1
                )));
            }
        }
        Ok(())
    }
}
