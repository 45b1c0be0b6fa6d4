use std::ops::{Add, Div, Mul, Neg, Sub};

/// `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`; `d` carries the mixed second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HyperDual {
    pub fn constant(a: f64) -> Self {
        Self { a, b: 0.0, c: 0.0, d: 0.0 }
    }

    /// Seeds a variable with directional components `u` (for ε₁) and `v` (for ε₂).
    pub fn seeded(a: f64, u: f64, v: f64) -> Self {
        Self { a, b: u, c: v, d: 0.0 }
    }

    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self { a: f, b: f1 * self.b, c: f1 * self.c, d: f1 * self.d + f2 * self.b * self.c }
    }

    pub fn ln(self) -> Self {
        self.chain(self.a.ln(), 1.0 / self.a, -1.0 / (self.a * self.a))
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { a: self.a - o.a, b: self.b - o.b, c: self.c - o.c, d: self.d - o.d }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            a: self.a * o.a,
            b: self.a * o.b + self.b * o.a,
            c: self.a * o.c + self.c * o.a,
            d: self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        }
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.chain(1.0 / o.a, -1.0 / (o.a * o.a), 2.0 / (o.a * o.a * o.a))
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }
}

/// Exact real Hessian of `f` at `x` by one hyper-dual evaluation per entry.
pub fn hessian<F: Fn(&[HyperDual]) -> HyperDual>(f: F, x: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let mut h = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let args: Vec<HyperDual> = (0..m)
                .map(|k| HyperDual::seeded(x[k], f64::from(u8::from(k == i)), f64::from(u8::from(k == j))))
                .collect();
            let v = f(&args).d;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}
