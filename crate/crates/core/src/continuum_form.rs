//! The continuum form `E[u] = int_0^inf (u')^2 x^2 dx` on `L^2(2 x^2 dx)`:
//! energies of test functions, heat-kernel mass and the Sobolev/Strauss
//! inequality ratios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};
use crate::special_fn::{heat_kernel, KernelPoint};

fn one() -> f64 {
    1.0
}

/// A test function `amplitude * shape(x)` on `(0, inf)`.
///
/// Integrals are computed for the shape and scaled by powers of the
/// amplitude, so every ratio below is exactly scale invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `e^{-beta x}`
    Exponential { beta: f64 },
    /// `e^{-beta x^2}`
    Gaussian { beta: f64 },
    /// Piecewise linear: 0 up to `a`, 1 at `b`, 0 from `c` on.
    Hat { a: f64, b: f64, c: f64 },
    /// Piecewise linear: 0 up to `a`, 1 on `[b, c]`, 0 from `d` on.
    Plateau { a: f64, b: f64, c: f64, d: f64 },
    /// `sum_i coeffs[i] x^i`; only meaningful on bounded intervals.
    Polynomial { coeffs: Vec<f64> },
    /// Natural cubic spline through a table, zero beyond the last node.
    Sampled(Spline),
    Sum { terms: Vec<TestFunction> },
}

impl TestFunction {
    pub fn new(shape: Shape) -> Result<Self> {
        let f = Self { amplitude: 1.0, shape };
        f.validate()?;
        Ok(f)
    }

    pub fn exponential(beta: f64) -> Self {
        Self::new(Shape::Exponential { beta }).expect("beta must be positive")
    }

    pub fn gaussian(beta: f64) -> Self {
        Self::new(Shape::Gaussian { beta }).expect("beta must be positive")
    }

    pub fn hat(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(Shape::Hat { a, b, c })
    }

    pub fn plateau(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(Shape::Plateau { a, b, c, d })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(Shape::Polynomial { coeffs }).expect("coefficients must be finite")
    }

    pub fn sampled(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::new(Shape::Sampled(Spline::new(xs, ys)?))
    }

    pub fn sum(terms: Vec<TestFunction>) -> Result<Self> {
        Self::new(Shape::Sum { terms })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            amplitude: self.amplitude * c,
            shape: self.shape.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::domain("amplitude must be finite"));
        }
        match &self.shape {
            Shape::Exponential { beta } | Shape::Gaussian { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                Err(Error::domain(format!("decay rate must be positive, got {beta}")))
            }
            Shape::Hat { a, b, c } if !(0.0 <= *a && a < b && b < c && c.is_finite()) => {
                Err(Error::domain("hat needs 0 <= a < b < c"))
            }
            Shape::Plateau { a, b, c, d } if !(0.0 <= *a && a < b && b <= c && c < d && d.is_finite()) => {
                Err(Error::domain("plateau needs 0 <= a < b <= c < d"))
            }
            Shape::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::domain("polynomial coefficients must be finite"))
            }
            Shape::Sum { terms } => terms.iter().try_for_each(|t| t.validate()),
            _ => Ok(()),
        }
    }

    /// `u(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * self.shape.value(x)
    }

    /// `u'(x)` (one-sided choice at kinks is unspecified).
    pub fn derivative(&self, x: f64) -> f64 {
        self.amplitude * self.shape.derivative(x)
    }

    /// Right end of the essential support: beyond it the shape is zero or
    /// below `exp(-50)` with all its derivatives. `None` if unbounded.
    fn extent(&self) -> Option<f64> {
        self.shape.extent()
    }

    fn breaks(&self, upper: f64) -> Vec<f64> {
        let mut b = vec![0.0, upper];
        self.shape.collect_breaks(&mut b);
        b.retain(|x| (0.0..=upper).contains(x));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Integrates `g(shape(x), shape'(x), x)` over `[0, upper]`.
    fn integrate_shape<G: Fn(f64, f64, f64) -> f64>(&self, g: G, upper: f64, q: &QuadratureConfig) -> Result<f64> {
        let breaks = self.breaks(upper);
        let est = integrate_with_breaks(|x| g(self.shape.value(x), self.shape.derivative(x), x), &breaks, q)?;
        Ok(est.value)
    }

    fn upper(&self) -> Result<f64> {
        self.extent()
            .ok_or_else(|| Error::domain("test function does not decay; energy on (0, inf) is undefined"))
    }
}

impl Shape {
    fn value(&self, x: f64) -> f64 {
        match self {
            Shape::Exponential { beta } => (-beta * x).exp(),
            Shape::Gaussian { beta } => (-beta * x * x).exp(),
            Shape::Hat { a, b, c } => {
                if x <= *a || x >= *c {
                    0.0
                } else if x <= *b {
                    (x - a) / (b - a)
                } else {
                    (c - x) / (c - b)
                }
            }
            Shape::Plateau { a, b, c, d } => {
                if x <= *a || x >= *d {
                    0.0
                } else if x < *b {
                    (x - a) / (b - a)
                } else if x <= *c {
                    1.0
                } else {
                    (d - x) / (d - c)
                }
            }
            Shape::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Shape::Sampled(s) => s.value(x),
            Shape::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Shape::Exponential { beta } => -beta * (-beta * x).exp(),
            Shape::Gaussian { beta } => -2.0 * beta * x * (-beta * x * x).exp(),
            Shape::Hat { a, b, c } => {
                if x <= *a || x >= *c {
                    0.0
                } else if x <= *b {
                    1.0 / (b - a)
                } else {
                    -1.0 / (c - b)
                }
            }
            Shape::Plateau { a, b, c, d } => {
                if x <= *a || x >= *d || (x >= *b && x <= *c) {
                    0.0
                } else if x < *b {
                    1.0 / (b - a)
                } else {
                    -1.0 / (d - c)
                }
            }
            Shape::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c),
            Shape::Sampled(s) => s.derivative(x),
            Shape::Sum { terms } => terms.iter().map(|t| t.derivative(x)).sum(),
        }
    }

    fn extent(&self) -> Option<f64> {
        match self {
            Shape::Exponential { beta } => Some(50.0 / beta),
            Shape::Gaussian { beta } => Some((50.0 / beta).sqrt()),
            Shape::Hat { c, .. } => Some(*c),
            Shape::Plateau { d, .. } => Some(*d),
            Shape::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0).then_some(1.0),
            Shape::Sampled(s) => Some(s.xs[s.xs.len() - 1]),
            Shape::Sum { terms } => terms
                .iter()
                .map(|t| t.extent())
                .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e))),
        }
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Shape::Exponential { beta } => out.extend([1.0, 2.0, 4.0, 8.0, 16.0, 32.0].map(|s| s / beta)),
            Shape::Gaussian { beta } => out.extend([0.5, 1.0, 2.0, 3.0, 5.0].map(|s| s / beta.sqrt())),
            Shape::Hat { a, b, c } => out.extend([*a, *b, *c]),
            Shape::Plateau { a, b, c, d } => out.extend([*a, *b, *c, *d]),
            Shape::Polynomial { .. } => {}
            Shape::Sampled(s) => out.extend(s.xs.iter().copied()),
            Shape::Sum { terms } => terms.iter().for_each(|t| t.shape.collect_breaks(out)),
        }
    }
}

/// Natural cubic spline on `[xs[0], xs[n-1]]`; constant `ys[0]` to the left,
/// zero to the right (so the last value must be 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineTable", into = "SplineTable")]
pub struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplineTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TryFrom<SplineTable> for Spline {
    type Error = Error;
    fn try_from(t: SplineTable) -> Result<Self> {
        Spline::new(t.xs, t.ys)
    }
}

impl From<Spline> for SplineTable {
    fn from(s: Spline) -> Self {
        SplineTable { xs: s.xs, ys: s.ys }
    }
}

impl Spline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::domain("sampled table needs at least two points"));
        }
        if xs[0] < 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::domain("sample abscissae must be finite, nonnegative and strictly increasing"));
        }
        if ys[ys.len() - 1] != 0.0 {
            return Err(Error::domain("sampled function must vanish at its last node"));
        }
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    fn piece(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&xi| xi <= x);
        i.clamp(1, self.xs.len() - 1) - 1
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.piece(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Centered difference with one Richardson step, using a step that keeps
    /// both stencil points inside the piece containing `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.piece(x);
        let room = (x - self.xs[i]).min(self.xs[i + 1] - x);
        let h = (0.5 * room).min(1e-3 * (self.xs[i + 1] - self.xs[i]));
        if !(h > 0.0) {
            return 0.0;
        }
        let d = |h: f64| (self.value(x + h) - self.value(x - h)) / (2.0 * h);
        (4.0 * d(0.5 * h) - d(h)) / 3.0
    }
}

/// Energy and squared `L^2(2 x^2 dx)` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormValue {
    pub energy: f64,
    pub norm_sq: f64,
}

/// `E[u] = int (u')^2 x^2 dx` and `||u||^2 = int u^2 2x^2 dx`.
pub fn energy(u: &TestFunction, q: &QuadratureConfig) -> Result<FormValue> {
    u.validate()?;
    let upper = u.upper()?;
    let a2 = u.amplitude * u.amplitude;
    let e = u.integrate_shape(|_, d, x| d * d * x * x, upper, q)?;
    let n = u.integrate_shape(|v, _, x| 2.0 * v * v * x * x, upper, q)?;
    Ok(FormValue {
        energy: a2 * e,
        norm_sq: a2 * n,
    })
}

/// `int_0^1 (u')^2 x^2 dx` and `int_0^1 u^2 x^2 dx`.
pub(crate) fn unit_interval_integrals(u: &TestFunction, q: &QuadratureConfig) -> Result<(f64, f64)> {
    let a2 = u.amplitude * u.amplitude;
    let e = u.integrate_shape(|_, d, x| d * d * x * x, 1.0, q)?;
    let n = u.integrate_shape(|v, _, x| v * v * x * x, 1.0, q)?;
    Ok((a2 * e, a2 * n))
}

/// `int_0^inf p_t(x, y) 2 y^2 dy`, which equals 1 (the form is conservative).
pub fn heat_mass(t: f64, x: f64, q: &QuadratureConfig) -> Result<f64> {
    KernelPoint::new(t, x, x)?;
    let r = q.gaussian_cutoff(t);
    let lo = (x - r).max(0.0);
    let hi = x + r;
    let s = t.sqrt();
    let mut breaks = vec![lo, hi, x];
    breaks.extend([-4.0, -2.0, -1.0, 1.0, 2.0, 4.0].map(|k| x + k * s));
    breaks.retain(|b| *b >= lo && *b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let est = integrate_with_breaks(
        |y| {
            if y <= 0.0 {
                0.0
            } else {
                heat_kernel(KernelPoint { t, x, y }) * 2.0 * y * y
            }
        },
        &breaks,
        q,
    )?;
    Ok(est.value)
}

/// `int p_s(x, z) p_t(z, y) 2 z^2 dz`; equals `p_{s+t}(x, y)`.
pub fn kernel_convolution(s: f64, t: f64, x: f64, y: f64, q: &QuadratureConfig) -> Result<f64> {
    KernelPoint::new(s, x, y)?;
    KernelPoint::new(t, x, y)?;
    let r = q.gaussian_cutoff(s.max(t));
    let hi = x.max(y) + r;
    let mut breaks = vec![0.0, hi, x, y];
    breaks.extend([0.5, 1.0, 2.0, 4.0].map(|k| k * s.min(t).sqrt()));
    breaks.retain(|b| *b >= 0.0 && *b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let est = integrate_with_breaks(
        |z| {
            if z <= 0.0 {
                0.0
            } else {
                heat_kernel(KernelPoint { t: s, x, y: z }) * heat_kernel(KernelPoint { t, x: z, y }) * 2.0 * z * z
            }
        },
        &breaks,
        q,
    )?;
    Ok(est.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InequalityMode {
    /// `(int |u|^p x^2 dx)^{2/p} <= c E[u]`, `2 < p <= 6`.
    Sobolev { p: f64 },
    /// `sup x^{(3 - 2 sigma)/2} |u(x)| <= c ||u||^{1-sigma} E[u]^{sigma/2}`, `1/2 <= sigma <= 1`.
    Strauss { sigma: f64 },
}

impl InequalityMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InequalityMode::Sobolev { p } if !(p > 2.0 && p <= 6.0) => {
                Err(Error::domain(format!("Sobolev exponent must lie in (2, 6], got {p}")))
            }
            InequalityMode::Strauss { sigma } if !(0.5..=1.0).contains(&sigma) => {
                Err(Error::domain(format!("Strauss exponent must lie in [1/2, 1], got {sigma}")))
            }
            _ => Ok(()),
        }
    }
}

/// Left side over right side of the chosen inequality, with constant 1.
pub fn inequality_ratio(u: &TestFunction, mode: InequalityMode, q: &QuadratureConfig) -> Result<f64> {
    mode.validate()?;
    u.validate()?;
    let upper = u.upper()?;
    // Everything is computed for the shape; the amplitude cancels exactly.
    let e = u.integrate_shape(|_, d, x| d * d * x * x, upper, q)?;
    if !(e > 0.0) {
        return Err(Error::domain("test function has zero energy"));
    }
    match mode {
        InequalityMode::Sobolev { p } => {
            let lp = u.integrate_shape(|v, _, x| v.abs().powf(p) * x * x, upper, q)?;
            Ok(lp.powf(2.0 / p) / e)
        }
        InequalityMode::Strauss { sigma } => {
            let n = u.integrate_shape(|v, _, x| 2.0 * v * v * x * x, upper, q)?;
            let k = (3.0 - 2.0 * sigma) / 2.0;
            let sup = log_scale_max(|x| x.powf(k) * u.shape.value(x).abs(), upper);
            Ok(sup / (n.sqrt().powf(1.0 - sigma) * e.powf(sigma / 2.0)))
        }
    }
}

/// Maximum of `g` on `(0, upper]`: a log-spaced scan brackets the peak, then
/// golden-section search in `ln x` refines it.
fn log_scale_max<G: Fn(f64) -> f64>(g: G, upper: f64) -> f64 {
    const SCAN: usize = 400;
    let lo = (upper * 1e-9).ln();
    let hi = upper.ln();
    let step = (hi - lo) / SCAN as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let v = g((lo + i as f64 * step).exp());
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = lo + best.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best + 1) as f64 * step).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f = |s: f64| g(s.exp());
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    best_val.max(fc).max(fd)
}

/// `max_{(x,y) in grid} p_t(x, y) t^{3/2}`.
pub fn ultracontractivity_scan(t: f64, grid: &[(f64, f64)]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::domain("ultracontractivity grid is empty"));
    }
    let points = grid
        .iter()
        .map(|&(x, y)| KernelPoint::new(t, x, y))
        .collect::<Result<Vec<_>>>()?;
    let scale = t.powf(1.5);
    Ok(points
        .par_iter()
        .map(|p| heat_kernel(*p) * scale)
        .reduce(|| f64::NEG_INFINITY, f64::max))
}
