//! The lambda-harmonic extension `P_lambda u` of lattice data: on every
//! segment between charged points it solves `-u''/2 - u'/x + lambda u = 0`,
//! whose solutions are `x^{-1/2} (A I_{1/2}(x s) + B K_{1/2}(x s))` with
//! `s = sqrt(2 lambda)`.
//!
//! Coefficients are stored relative to an anchor `c` per segment,
//! `a = A e^{c s}` and `b = B e^{-c s}`, so that all evaluations combine
//! exponents before exponentiating and never overflow.

use serde::Serialize;

use crate::continuum_form::TestFunction;
use crate::error::{Error, Result};
use crate::lattice::{LatticeFunction, SupportSpec};
use crate::special_fn::{bessel_half_scaled, BesselKind, BesselOrder};
use crate::trace_forms::MixedFunction;

/// Largest `sqrt(2 lambda)` for which the anchored basis stays finite.
const MAX_RATE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    anchor: f64,
}

impl Segment {
    const ZERO: Segment = Segment {
        a: 0.0,
        b: 0.0,
        anchor: 0.0,
    };

    fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

/// Scaled basis values at `x`: `(x^{-1/2} I_nu(xs) e^{-cs}, x^{-1/2} K_nu(xs) e^{cs})`.
fn basis(order: BesselOrder, x: f64, s: f64, anchor: f64) -> (f64, f64) {
    let z = x * s;
    let shift = (x - anchor) * s;
    let r = x.sqrt().recip();
    let i = bessel_half_scaled(BesselKind::I, order, z).expect("positive argument");
    let k = bessel_half_scaled(BesselKind::K, order, z).expect("positive argument");
    (r * i * shift.exp(), r * k * (-shift).exp())
}

/// `P_lambda u` as a piecewise Bessel solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBesselSolution {
    lambda: f64,
    s: f64,
    support: SupportSpec,
    boundary: LatticeFunction,
    /// `segments[k]` lives on `[k, k+1]` (`(0, 1]` for `k = 0`).
    segments: Vec<Segment>,
    /// Decaying segment `[N, inf)` of the finite case.
    tail: Option<Segment>,
    /// The given function on `(0, 1)` in the mixed case.
    continuum: Option<TestFunction>,
}

/// Determinant of `M_k`, closed form: `-sinh(s) / (s k (k+1))`.
pub fn det_mk(k: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if k == 0 {
        return Err(Error::domain("M_k is defined for k >= 1"));
    }
    let s = (2.0 * lambda).sqrt();
    let kf = k as f64;
    Ok(-s.sinh() / (s * kf * (kf + 1.0)))
}

/// Determinant of `M_k` from its Bessel entries (scaled evaluation).
pub fn det_mk_direct(k: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if k == 0 {
        return Err(Error::domain("M_k is defined for k >= 1"));
    }
    let s = (2.0 * lambda).sqrt();
    let m = segment_matrix(k, s);
    Ok(m[0][0] * m[1][1] - m[0][1] * m[1][0])
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if (2.0 * lambda).sqrt() > MAX_RATE {
        return Err(Error::domain(format!("lambda = {lambda} is too large for double precision")));
    }
    Ok(())
}

/// Scaled `M_k` with anchor `k`.
fn segment_matrix(k: usize, s: f64) -> [[f64; 2]; 2] {
    let kf = k as f64;
    let (i0, k0) = basis(BesselOrder::Half, kf, s, kf);
    let (i1, k1) = basis(BesselOrder::Half, kf + 1.0, s, kf);
    [[i0, k0], [i1, k1]]
}

fn solve_segment(k: usize, s: f64, left: f64, right: f64) -> Result<Segment> {
    let anchor = k as f64;
    if left == 0.0 && right == 0.0 {
        return Ok(Segment { anchor, ..Segment::ZERO });
    }
    let m = segment_matrix(k, s);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0] * m[1][1]).abs().max((m[0][1] * m[1][0]).abs());
    if !(det.abs() > 64.0 * f64::EPSILON * scale) {
        return Err(Error::numeric(format!(
            "M_{k} is numerically singular (det {det:e} against entry scale {scale:e})"
        )));
    }
    Ok(Segment {
        a: (left * m[1][1] - right * m[0][1]) / det,
        b: (m[0][0] * right - m[1][0] * left) / det,
        anchor,
    })
}

/// Builds `P_lambda u` for the given support.
///
/// In the mixed case the extension coincides with `u` on `(0, 1)`, which is
/// not known from lattice data alone; use [`extend_mixed`] to attach it.
pub fn extend(u: &LatticeFunction, lambda: f64, support: SupportSpec) -> Result<PiecewiseBesselSolution> {
    check_lambda(lambda)?;
    support.validate()?;
    let s = (2.0 * lambda).sqrt();
    let top = u.support_max();
    let mut segments = Vec::new();
    let mut tail = None;

    match support {
        SupportSpec::InfiniteDiscrete | SupportSpec::Mixed => {
            segments.push(if support == SupportSpec::Mixed {
                Segment::ZERO
            } else {
                segment_zero(u, s)
            });
            for k in 1..=top {
                segments.push(solve_segment(k, s, u.get(k), u.get(k + 1))?);
            }
        }
        SupportSpec::FiniteDiscrete { n } => {
            if top > n {
                return Err(Error::domain(format!("data at site {top} lies outside the support 1..{n}")));
            }
            segments.push(segment_zero(u, s));
            for k in 1..n {
                segments.push(solve_segment(k, s, u.get(k), u.get(k + 1))?);
            }
            // B_N = N^{1/2} u_N / K_{1/2}(N s), anchored at N.
            let nf = n as f64;
            let kn = bessel_half_scaled(BesselKind::K, BesselOrder::Half, nf * s)?;
            tail = Some(Segment {
                a: 0.0,
                b: nf.sqrt() * u.get(n) / kn,
                anchor: nf,
            });
        }
    }

    Ok(PiecewiseBesselSolution {
        lambda,
        s,
        support,
        boundary: u.clone(),
        segments,
        tail,
        continuum: None,
    })
}

/// `B_0 = 0`, `A_0 = u_1 / I_{1/2}(s)`, anchored at 1.
fn segment_zero(u: &LatticeFunction, s: f64) -> Segment {
    let u1 = u.get(1);
    if u1 == 0.0 {
        return Segment {
            anchor: 1.0,
            ..Segment::ZERO
        };
    }
    let (i1, _) = basis(BesselOrder::Half, 1.0, s, 1.0);
    Segment {
        a: u1 / i1,
        b: 0.0,
        anchor: 1.0,
    }
}

/// Mixed support: `u` on `(0, 1)` and the harmonic extension between the
/// lattice points.
pub fn extend_mixed(f: &MixedFunction, lambda: f64) -> Result<PiecewiseBesselSolution> {
    f.validate()?;
    let mut sol = extend(f.lattice(), lambda, SupportSpec::Mixed)?;
    sol.continuum = Some(f.continuum().clone());
    Ok(sol)
}

impl PiecewiseBesselSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn support(&self) -> SupportSpec {
        self.support
    }

    pub fn boundary_data(&self) -> &LatticeFunction {
        &self.boundary
    }

    /// Unscaled `(A_k, B_k)` of segment `k`; zero past the data.
    /// For the finite support, `k = N` is the tail segment.
    pub fn coefficients(&self, k: usize) -> (f64, f64) {
        match self.segment(k) {
            Some(seg) => (
                seg.a * (-seg.anchor * self.s).exp(),
                seg.b * (seg.anchor * self.s).exp(),
            ),
            None => (0.0, 0.0),
        }
    }

    /// All `(k, A_k, B_k)` with nonzero coefficients.
    pub fn nonzero_segments(&self) -> Vec<(usize, f64, f64)> {
        let last = match self.support {
            SupportSpec::FiniteDiscrete { n } => n,
            _ => self.segments.len().saturating_sub(1),
        };
        (0..=last)
            .filter(|&k| self.segment(k).is_some_and(|s| !s.is_zero()))
            .map(|k| {
                let (a, b) = self.coefficients(k);
                (k, a, b)
            })
            .collect()
    }

    fn segment(&self, k: usize) -> Option<&Segment> {
        if let (SupportSpec::FiniteDiscrete { n }, Some(t)) = (self.support, &self.tail) {
            if k >= n {
                return (k == n).then_some(t);
            }
        }
        self.segments.get(k)
    }

    /// Segment containing `x` (nodes belong to the segment on their right).
    fn locate(&self, x: f64) -> Result<Located<'_>> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("evaluation point must be positive, got {x}")));
        }
        if x < 1.0 && self.support == SupportSpec::Mixed {
            return match &self.continuum {
                Some(psi) => Ok(Located::Continuum(psi)),
                None => Err(Error::domain(
                    "mixed extension on (0, 1) equals the continuum data, which was not supplied",
                )),
            };
        }
        let k = x.floor() as usize;
        if let SupportSpec::FiniteDiscrete { n } = self.support {
            if k >= n {
                return Ok(Located::Segment(self.tail.as_ref().expect("finite support has a tail")));
            }
        }
        Ok(match self.segments.get(k) {
            Some(seg) => Located::Segment(seg),
            None => Located::Zero,
        })
    }

    fn eval_with(&self, seg: &Segment, x: f64) -> (f64, f64, f64) {
        let s = self.s;
        let (i_half, k_half) = basis(BesselOrder::Half, x, s, seg.anchor);
        let (i_three, k_three) = basis(BesselOrder::ThreeHalves, x, s, seg.anchor);
        let p = seg.a * i_half + seg.b * k_half;
        let dp = s * (seg.a * i_three - seg.b * k_three);
        // d/dx[x^{-1/2} I_{3/2}(xs)] = s x^{-1/2} I_{1/2} - 2 x^{-3/2} I_{3/2}
        // d/dx[x^{-1/2} K_{3/2}(xs)] = -s x^{-1/2} K_{1/2} - 2 x^{-3/2} K_{3/2}
        let d2p = s
            * (seg.a * (s * i_half - 2.0 * i_three / x) - seg.b * (-s * k_half - 2.0 * k_three / x));
        (p, dp, d2p)
    }

    /// `(P, P', P'')` at `x`.
    fn jet(&self, x: f64) -> Result<(f64, f64, f64)> {
        Ok(match self.locate(x)? {
            Located::Segment(seg) if !seg.is_zero() => self.eval_with(seg, x),
            Located::Segment(_) | Located::Zero => (0.0, 0.0, 0.0),
            Located::Continuum(psi) => {
                let h = 1e-4 * x.min(1.0 - x);
                let d2 = (psi.value(x + h) - 2.0 * psi.value(x) + psi.value(x - h)) / (h * h);
                (psi.value(x), psi.derivative(x), d2)
            }
        })
    }

    /// `P_lambda u (x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.jet(x)?.0)
    }

    /// `(P_lambda u)'(x)` off the nodes.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(self.jet(x)?.1)
    }

    /// One-sided derivative at the node `k`.
    pub fn side_derivative(&self, k: usize, side: Side) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("node 0 is not a charged point"));
        }
        if let SupportSpec::FiniteDiscrete { n } = self.support {
            if k > n {
                return Err(Error::domain(format!("node {k} is outside the support 1..{n}")));
            }
        }
        let x = k as f64;
        let seg_index = match side {
            Side::Left => k - 1,
            Side::Right => k,
        };
        if self.support == SupportSpec::Mixed && seg_index == 0 {
            let psi = self
                .continuum
                .as_ref()
                .ok_or_else(|| Error::domain("mixed extension on (0, 1) needs the continuum data"))?;
            return Ok(psi.derivative(1.0 - 1e-12));
        }
        Ok(match self.segment(seg_index) {
            Some(seg) if !seg.is_zero() => self.eval_with(seg, x).1,
            _ => 0.0,
        })
    }

    /// `-P''/2 - P'/x + lambda P` off the nodes.
    pub fn ode_residual(&self, x: f64) -> Result<f64> {
        if x.fract() == 0.0 {
            return Err(Error::domain(format!("x = {x} is a node; the equation holds off the nodes")));
        }
        if self.support == SupportSpec::Mixed && x < 1.0 {
            return Err(Error::domain("the extension is not harmonic on (0, 1) in the mixed case"));
        }
        let (p, dp, d2p) = self.jet(x)?;
        Ok(-0.5 * d2p - dp / x + self.lambda * p)
    }

    /// `sum_k u_k k^2 (P'(k-) - P'(k+))`: the energy of the extension outside
    /// `(0, 1)` by integration by parts; in the mixed case the left term at
    /// node 1 is excluded (the continuum part is integrated directly).
    pub fn node_energy(&self) -> Result<f64> {
        let last = match self.support {
            SupportSpec::FiniteDiscrete { n } => n,
            _ => self.boundary.support_max(),
        };
        let mut total = 0.0;
        for k in 1..=last {
            let uk = self.boundary.get(k);
            if uk == 0.0 {
                continue;
            }
            let left = if self.support == SupportSpec::Mixed && k == 1 {
                0.0
            } else {
                self.side_derivative(k, Side::Left)?
            };
            let right = self.side_derivative(k, Side::Right)?;
            let kf = k as f64;
            total += uk * kf * kf * (left - right);
        }
        Ok(total)
    }

    /// Break points for integrating over the extension: the nodes and a
    /// cutoff past which the solution is zero or below `e^{-70}`.
    pub(crate) fn integration_range(&self) -> (f64, f64) {
        let lo = if self.support == SupportSpec::Mixed { 1.0 } else { 0.0 };
        let hi = match self.support {
            SupportSpec::FiniteDiscrete { n } => n as f64 + 35.0 / self.s,
            _ => (self.boundary.support_max() + 1) as f64,
        };
        (lo, hi.max(1.0))
    }
}

enum Located<'a> {
    Segment(&'a Segment),
    Continuum(&'a TestFunction),
    Zero,
}
