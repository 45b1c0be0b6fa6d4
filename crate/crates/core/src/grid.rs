//! Periodic grid domains and differentiation along real coordinates.
//!
//! A domain models the flat complex torus `C^n / (lattice)` sampled on a
//! uniform grid. Only a declared subset of the `2n` real coordinates carries
//! grid points; fields are constant along every other coordinate. Complex
//! coordinates are `z_j = x_{2j} + i x_{2j+1}` (0-based).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("complex dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("expected {expected} periods (one per real coordinate), got {got}")]
    Periods { expected: usize, got: usize },
    #[error("period of coordinate {0} must be positive and finite")]
    BadPeriod(usize),
    #[error("resolution must be at least 4 points per active coordinate, got {0}")]
    Resolution(usize),
    #[error("active coordinate {0} out of range for {1} real coordinates")]
    ActiveCoord(usize, usize),
    #[error("active coordinates must be strictly increasing and non-empty")]
    ActiveOrder,
    #[error("spectral differentiation needs an even resolution, got {0}")]
    OddSpectral(usize),
    #[error("grid of resolution {coarse} is not nested in resolution {fine}")]
    NotNested { fine: usize, coarse: usize },
}

/// Differentiation scheme used by every derivative on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// Trigonometric interpolation (FFT); the Nyquist mode is dropped for odd derivatives.
    #[default]
    Spectral,
    /// Periodic fourth-order central differences.
    FiniteDifference4,
}

impl DiffScheme {
    /// Nominal algebraic convergence order used by refinement studies.
    pub fn nominal_order(self) -> f64 {
        match self {
            DiffScheme::Spectral => 2.0,
            DiffScheme::FiniteDifference4 => 4.0,
        }
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid over the active real coordinates of a complex torus.
#[derive(Clone)]
pub struct GridDomain {
    n: usize,
    periods: Vec<f64>,
    resolution: usize,
    active: Vec<usize>,
    scheme: DiffScheme,
    fft: Arc<FftPair>,
}

impl fmt::Debug for GridDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridDomain")
            .field("n", &self.n)
            .field("periods", &self.periods)
            .field("resolution", &self.resolution)
            .field("active", &self.active)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.periods == other.periods
            && self.resolution == other.resolution
            && self.active == other.active
            && self.scheme == other.scheme
    }
}

impl GridDomain {
    pub fn new(
        n: usize,
        periods: Vec<f64>,
        resolution: usize,
        active: Vec<usize>,
        scheme: DiffScheme,
    ) -> Result<Self, GridError> {
        if n < 2 {
            return Err(GridError::Dimension(n));
        }
        if periods.len() != 2 * n {
            return Err(GridError::Periods { expected: 2 * n, got: periods.len() });
        }
        if let Some(i) = periods.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(GridError::BadPeriod(i));
        }
        if resolution < 4 {
            return Err(GridError::Resolution(resolution));
        }
        if active.is_empty() || active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GridError::ActiveOrder);
        }
        if let Some(&a) = active.iter().find(|&&a| a >= 2 * n) {
            return Err(GridError::ActiveCoord(a, 2 * n));
        }
        if scheme == DiffScheme::Spectral && resolution % 2 == 1 {
            return Err(GridError::OddSpectral(resolution));
        }
        let mut planner = FftPlanner::new();
        let fft = Arc::new(FftPair {
            forward: planner.plan_fft_forward(resolution),
            inverse: planner.plan_fft_inverse(resolution),
        });
        Ok(Self { n, periods, resolution, active, scheme, fft })
    }

    /// Torus with all periods equal to `period`.
    pub fn uniform(
        n: usize,
        period: f64,
        resolution: usize,
        active: Vec<usize>,
        scheme: DiffScheme,
    ) -> Result<Self, GridError> {
        Self::new(n, vec![period; 2 * n], resolution, active, scheme)
    }

    /// Same domain with another resolution.
    pub fn with_resolution(&self, resolution: usize) -> Result<Self, GridError> {
        Self::new(self.n, self.periods.clone(), resolution, self.active.clone(), self.scheme)
    }

    pub fn with_scheme(&self, scheme: DiffScheme) -> Result<Self, GridError> {
        Self::new(self.n, self.periods.clone(), self.resolution, self.active.clone(), scheme)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn active(&self) -> &[usize] {
        &self.active
    }
    pub fn scheme(&self) -> DiffScheme {
        self.scheme
    }

    pub fn is_active(&self, coord: usize) -> bool {
        self.active.contains(&coord)
    }

    pub fn num_points(&self) -> usize {
        self.resolution.pow(self.active.len() as u32)
    }

    /// Grid spacing along real coordinate `coord`.
    pub fn spacing(&self, coord: usize) -> f64 {
        self.periods[coord] / self.resolution as f64
    }

    /// Volume of one grid cell in the active coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.active.iter().map(|&a| self.spacing(a)).product()
    }

    /// Real coordinates (all `2n`) of a flat point index; inactive coordinates are 0.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; 2 * self.n];
        let mut rem = idx;
        for &a in self.active.iter().rev() {
            let i = rem % self.resolution;
            rem /= self.resolution;
            x[a] = i as f64 * self.spacing(a);
        }
        x
    }

    /// Samples a function of the `2n` real coordinates.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.num_points()).map(|i| f(&self.coords(i))).collect()
    }

    /// Restriction of a field on this grid to the nested grid `coarse`.
    pub fn subsample(&self, field: &[f64], coarse: &GridDomain) -> Result<Vec<f64>, GridError> {
        let nested = coarse.n == self.n
            && coarse.periods == self.periods
            && coarse.active == self.active
            && self.resolution % coarse.resolution == 0;
        if !nested {
            return Err(GridError::NotNested { fine: self.resolution, coarse: coarse.resolution });
        }
        let ratio = self.resolution / coarse.resolution;
        let m = self.active.len();
        Ok((0..coarse.num_points())
            .map(|idx| {
                let mut rem = idx;
                let mut fine = 0;
                let mut stride = 1;
                for _ in 0..m {
                    fine += (rem % coarse.resolution) * ratio * stride;
                    rem /= coarse.resolution;
                    stride *= self.resolution;
                }
                field[fine]
            })
            .collect())
    }

    /// Stride of active axis position `pos` in row-major order.
    fn stride(&self, pos: usize) -> usize {
        self.resolution.pow((self.active.len() - 1 - pos) as u32)
    }

    /// Flat point index translated by `shift` grid steps along active real coordinate `coord`.
    pub fn translate_index(&self, idx: usize, coord: usize, shift: isize) -> usize {
        let pos = match self.active.iter().position(|&a| a == coord) {
            Some(p) => p,
            None => return idx,
        };
        let stride = self.stride(pos);
        let r = self.resolution as isize;
        let i = ((idx / stride) % self.resolution) as isize;
        let j = (i + shift).rem_euclid(r) as usize;
        idx - (i as usize) * stride + j * stride
    }

    /// Derivative along real coordinate `coord` of a complex field.
    pub fn d_real(&self, field: &[C64], coord: usize) -> Vec<C64> {
        assert_eq!(field.len(), self.num_points(), "field does not live on this grid");
        let pos = match self.active.iter().position(|&a| a == coord) {
            Some(p) => p,
            None => return vec![C64::new(0.0, 0.0); field.len()],
        };
        match self.scheme {
            DiffScheme::Spectral => self.d_spectral(field, pos, self.periods[coord]),
            DiffScheme::FiniteDifference4 => self.d_fd4(field, pos, self.spacing(coord)),
        }
    }

    pub fn d_real_r(&self, field: &[f64], coord: usize) -> Vec<f64> {
        let c: Vec<C64> = field.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.d_real(&c, coord).into_iter().map(|v| v.re).collect()
    }

    /// `∂/∂z_j = (∂_{x_{2j}} - i ∂_{x_{2j+1}}) / 2`.
    pub fn d_holo(&self, field: &[C64], j: usize) -> Vec<C64> {
        self.wirtinger(field, j, -1.0)
    }

    /// `∂/∂z̄_j = (∂_{x_{2j}} + i ∂_{x_{2j+1}}) / 2`.
    pub fn d_antiholo(&self, field: &[C64], j: usize) -> Vec<C64> {
        self.wirtinger(field, j, 1.0)
    }

    fn wirtinger(&self, field: &[C64], j: usize, sign: f64) -> Vec<C64> {
        let (re, im) = (2 * j, 2 * j + 1);
        let mut out = vec![C64::new(0.0, 0.0); field.len()];
        if self.is_active(re) {
            for (o, d) in out.iter_mut().zip(self.d_real(field, re)) {
                *o += 0.5 * d;
            }
        }
        if self.is_active(im) {
            let s = C64::new(0.0, 0.5 * sign);
            for (o, d) in out.iter_mut().zip(self.d_real(field, im)) {
                *o += s * d;
            }
        }
        out
    }

    /// Second derivative `D_a D_b` of a complex field.
    ///
    /// On the diagonal this uses the native second-derivative stencil, so the
    /// Nyquist (checkerboard) mode is not annihilated.
    pub fn d2_real(&self, field: &[C64], a: usize, b: usize) -> Vec<C64> {
        assert_eq!(field.len(), self.num_points(), "field does not live on this grid");
        if !self.is_active(a) || !self.is_active(b) {
            return vec![C64::new(0.0, 0.0); field.len()];
        }
        if a != b {
            return self.d_real(&self.d_real(field, b), a);
        }
        let pos = self.active.iter().position(|&c| c == a).unwrap();
        match self.scheme {
            DiffScheme::Spectral => self.d2_spectral(field, pos, self.periods[a]),
            DiffScheme::FiniteDifference4 => self.d2_fd4(field, pos, self.spacing(a)),
        }
    }

    pub fn d2_real_r(&self, field: &[f64], a: usize, b: usize) -> Vec<f64> {
        let c: Vec<C64> = field.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.d2_real(&c, a, b).into_iter().map(|v| v.re).collect()
    }

    /// Complex Hessian `H[j][k] = ∂_j ∂_k̄ f` of a real field, as complex fields.
    pub fn complex_hessian(&self, f: &[f64]) -> Vec<Vec<Vec<C64>>> {
        let n = self.n;
        let zero = vec![0.0; f.len()];
        let mut d2 = vec![vec![None::<Vec<f64>>; 2 * n]; 2 * n];
        for a in 0..2 * n {
            for b in a..2 * n {
                if self.is_active(a) && self.is_active(b) {
                    let v = self.d2_real_r(f, a, b);
                    d2[b][a] = Some(v.clone());
                    d2[a][b] = Some(v);
                }
            }
        }
        let get = |a: usize, b: usize| d2[a][b].as_deref().unwrap_or(&zero);
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                        let (xx, yy, xy, yx) = (get(xj, xk), get(yj, yk), get(xj, yk), get(yj, xk));
                        (0..f.len())
                            .map(|p| C64::new(0.25 * (xx[p] + yy[p]), 0.25 * (xy[p] - yx[p])))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Holomorphic gradient `∂_j f` of a real field.
    pub fn holo_gradient(&self, f: &[f64]) -> Vec<Vec<C64>> {
        let c: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        (0..self.n).map(|j| self.d_holo(&c, j)).collect()
    }

    fn for_each_line<F: FnMut(&mut [C64])>(&self, data: &mut [C64], pos: usize, mut f: F) {
        let n = self.resolution;
        let stride = self.stride(pos);
        let total = data.len();
        let block = stride * n;
        let mut line = vec![C64::new(0.0, 0.0); n];
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for i in 0..n {
                    line[i] = data[base + i * stride];
                }
                f(&mut line);
                for i in 0..n {
                    data[base + i * stride] = line[i];
                }
            }
        }
    }

    fn d_spectral(&self, field: &[C64], pos: usize, period: f64) -> Vec<C64> {
        let n = self.resolution;
        let mut data = field.to_vec();
        let scale = 2.0 * PI / period;
        let norm = 1.0 / n as f64;
        let fft = self.fft.clone();
        let mut scratch = vec![C64::new(0.0, 0.0); fft.forward.get_inplace_scratch_len()];
        self.for_each_line(&mut data, pos, |line| {
            fft.forward.process_with_scratch(line, &mut scratch);
            for (k, v) in line.iter_mut().enumerate() {
                let kk = if k < n / 2 {
                    k as f64
                } else if k == n / 2 {
                    0.0
                } else {
                    k as f64 - n as f64
                };
                *v *= C64::new(0.0, kk * scale * norm);
            }
            fft.inverse.process_with_scratch(line, &mut scratch);
        });
        data
    }

    fn d_fd4(&self, field: &[C64], pos: usize, h: f64) -> Vec<C64> {
        let n = self.resolution;
        let mut data = field.to_vec();
        let c = 1.0 / (12.0 * h);
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        self.for_each_line(&mut data, pos, |line| {
            for i in 0..n {
                let p1 = line[(i + 1) % n];
                let p2 = line[(i + 2) % n];
                let m1 = line[(i + n - 1) % n];
                let m2 = line[(i + n - 2) % n];
                tmp[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) * c;
            }
            line.copy_from_slice(&tmp);
        });
        data
    }

    fn d2_spectral(&self, field: &[C64], pos: usize, period: f64) -> Vec<C64> {
        let n = self.resolution;
        let mut data = field.to_vec();
        let scale = 2.0 * PI / period;
        let norm = 1.0 / n as f64;
        let fft = self.fft.clone();
        let mut scratch = vec![C64::new(0.0, 0.0); fft.forward.get_inplace_scratch_len()];
        self.for_each_line(&mut data, pos, |line| {
            fft.forward.process_with_scratch(line, &mut scratch);
            for (k, v) in line.iter_mut().enumerate() {
                let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * scale;
                *v *= -kk * kk * norm;
            }
            fft.inverse.process_with_scratch(line, &mut scratch);
        });
        data
    }

    fn d2_fd4(&self, field: &[C64], pos: usize, h: f64) -> Vec<C64> {
        let n = self.resolution;
        let mut data = field.to_vec();
        let c = 1.0 / (12.0 * h * h);
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        self.for_each_line(&mut data, pos, |line| {
            for i in 0..n {
                let p1 = line[(i + 1) % n];
                let p2 = line[(i + 2) % n];
                let m1 = line[(i + n - 1) % n];
                let m2 = line[(i + n - 2) % n];
                tmp[i] = (-p2 + 16.0 * p1 - 30.0 * line[i] + 16.0 * m1 - m2) * c;
            }
            line.copy_from_slice(&tmp);
        });
        data
    }

    /// Average of a field over the grid (uniform Lebesgue weight).
    pub fn mean(&self, f: &[f64]) -> f64 {
        kahan_sum(f.iter().copied()) / f.len() as f64
    }
}

/// Compensated summation in fixed order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sup_norm_c(values: &[C64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
}
