//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each panel is integrated with a 15-point rule on the whole panel and on
//! its two halves; the difference is the panel's error estimate and the
//! panel with the largest estimate is bisected next.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RULE_POINTS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        Ok(())
    }

    /// Length of the Gaussian tail `sqrt(2 s ln(1/tol))` beyond which a
    /// factor `exp(-r^2 / (2 s))` is below the absolute tolerance.
    pub fn gaussian_cutoff(&self, variance: f64) -> f64 {
        let ln = (1.0 / self.abs_tol.min(1e-3)).ln();
        // Extra factor covers polynomial prefactors up to degree ~4.
        (2.0 * variance * (ln + 20.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Rule {
    nodes: [f64; RULE_POINTS],
    weights: [f64; RULE_POINTS],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = RULE_POINTS;
        let mut nodes = [0.0; RULE_POINTS];
        let mut weights = [0.0; RULE_POINTS];
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        s += w * f(c + h * x);
    }
    s * h
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let m = 0.5 * (a + b);
    let whole = gauss(f, a, b);
    let halves = gauss(f, a, m) + gauss(f, m, b);
    Panel {
        a,
        b,
        value: halves,
        error: (whole - halves).abs(),
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    integrate_with_breaks(f, &[a, b], cfg)
}

/// Integrates `f` over `[breaks[0], breaks.last()]`, starting the adaptive
/// refinement from the given panels. Kinks and peaks of the integrand should
/// be listed as break points.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if breaks.len() < 2 {
        return Err(Error::domain("quadrature needs at least two break points"));
    }
    if breaks.windows(2).any(|w| !(w[1] >= w[0])) || breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::domain("quadrature break points must be finite and nondecreasing"));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(panel(&f, w[0], w[1]));
        }
    }
    let mut subdivisions = 0;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                value,
                error,
                subdivisions,
            });
        }
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                value,
                error,
                subdivisions,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(Estimate { value, error }),
        };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Panel cannot be split further in floating point.
            return Err(Error::Quadrature {
                value,
                error,
                subdivisions,
            });
        }
        heap.push(panel(&f, worst.a, m));
        heap.push(panel(&f, m, worst.b));
        subdivisions += 1;
    }
}
