//! Half-integer modified Bessel functions and the Bessel-3 heat kernel.
//!
//! Closed forms are available for orders 1/2 and 3/2:
//!
//! ```text
//! I_{1/2}(x) = sqrt(2/(pi x)) sinh x        K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}
//! I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
//! K_{3/2}(x) = sqrt(pi/(2x)) (1 + 1/x) e^{-x}
//! ```
//!
//! The exponentially scaled variants (`e^{-x} I`, `e^{x} K`) stay finite for
//! arguments far beyond the ~710 overflow point of `sinh`, and every caller
//! that combines Bessel factors with exponentials goes through them.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const SERIES_TERM_CAP: usize = 500;

/// Below this argument `cosh x - sinh x / x` is summed as a series to avoid
/// cancellation.
const SMALL_ARG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    I,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Half,
    ThreeHalves,
}

impl BesselOrder {
    pub fn value(self) -> f64 {
        match self {
            BesselOrder::Half => 0.5,
            BesselOrder::ThreeHalves => 1.5,
        }
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = Error;

    fn try_from(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(BesselOrder::Half)
        } else if nu == 1.5 {
            Ok(BesselOrder::ThreeHalves)
        } else {
            Err(Error::UnsupportedOrder(nu))
        }
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Bessel argument must be positive and finite, got {x}")))
    }
}

/// `cosh x - sinh x / x`, accurate for small `x`.
fn cosh_minus_sinhc(x: f64) -> f64 {
    if x < SMALL_ARG {
        // sum_{k>=1} 2k x^{2k} / (2k+1)!
        let x2 = x * x;
        let mut term = x2 / 3.0;
        let mut sum = term;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= (k + 1.0) / k * x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        x.cosh() - x.sinh() / x
    }
}

/// Exponentially scaled Bessel function: `e^{-x} I_nu(x)` for kind I and
/// `e^{x} K_nu(x)` for kind K.
pub fn bessel_half_scaled(kind: BesselKind, order: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    let v = match (kind, order) {
        (BesselKind::I, BesselOrder::Half) => (2.0 / (PI * x)).sqrt() * (-(-2.0 * x).exp_m1()) / 2.0,
        (BesselKind::I, BesselOrder::ThreeHalves) => {
            let g = if x < SMALL_ARG {
                cosh_minus_sinhc(x) * (-x).exp()
            } else {
                let e2 = (-2.0 * x).exp();
                (1.0 + e2) / 2.0 + (-2.0 * x).exp_m1() / (2.0 * x)
            };
            (2.0 / (PI * x)).sqrt() * g
        }
        (BesselKind::K, BesselOrder::Half) => (PI / (2.0 * x)).sqrt(),
        (BesselKind::K, BesselOrder::ThreeHalves) => (PI / (2.0 * x)).sqrt() * (1.0 + 1.0 / x),
    };
    Ok(v)
}

/// Closed-form `I_nu(x)` or `K_nu(x)` for `nu` in {1/2, 3/2}.
pub fn bessel_half(kind: BesselKind, order: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    let v = match (kind, order) {
        (BesselKind::I, BesselOrder::Half) => (2.0 / (PI * x)).sqrt() * x.sinh(),
        (BesselKind::I, BesselOrder::ThreeHalves) => (2.0 / (PI * x)).sqrt() * cosh_minus_sinhc(x),
        (BesselKind::K, _) => bessel_half_scaled(kind, order, x)? * (-x).exp(),
    };
    Ok(v)
}

/// Power series `sum_k (x/2)^{2k+nu} / (Gamma(k+nu+1) k!)`, truncated once
/// the next term drops below `tol` times the partial sum.
pub fn bessel_series(order: f64, x: f64, tol: f64) -> Result<f64> {
    if !(order >= 0.0 && order.is_finite()) {
        return Err(Error::domain(format!("series order must be >= 0, got {order}")));
    }
    check_arg(x)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!("series tolerance must be positive, got {tol}")));
    }
    let half = x / 2.0;
    let q = half * half;
    let mut term = half.powf(order) / gamma(order + 1.0);
    let mut sum = term;
    for k in 0..SERIES_TERM_CAP {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (kf + 1.0 + order));
        if term < tol * sum {
            return Ok(sum);
        }
        sum += term;
    }
    Err(Error::numeric(format!(
        "Bessel series for order {order} at x = {x} did not converge in {SERIES_TERM_CAP} terms"
    )))
}

/// Argument of the heat kernel `p_t(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub(crate) t: f64,
    pub(crate) x: f64,
    pub(crate) y: f64,
}

impl KernelPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Result<Self> {
        for (name, v) in [("t", t), ("x", x), ("y", y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("heat kernel argument {name} must be positive, got {v}")));
            }
        }
        Ok(Self { t, x, y })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

/// `(1 - e^{-z}) / z`, with the series limit near zero.
fn one_minus_exp_over(z: f64) -> f64 {
    if z < 1e-8 {
        1.0 - z / 2.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// Heat kernel of the Bessel process in dimension 3 (order 1/2) with respect
/// to `dm = 2 y^2 dy`:
///
/// `p_t(x,y) = (1/(2t)) (xy)^{-1/2} exp(-(x^2+y^2)/(2t)) I_{1/2}(xy/t)`.
///
/// The exponentials are merged before evaluation, which leaves
/// `exp(-(x-y)^2/(2t)) (1 - e^{-2xy/t}) / (2xy sqrt(2 pi t))`; this never
/// overflows and has the correct `x, y -> 0` limit.
pub fn heat_kernel(p: KernelPoint) -> f64 {
    let KernelPoint { t, x, y } = p;
    let d = x - y;
    let z = 2.0 * (x * y) / t;
    (-(d * d) / (2.0 * t)).exp() * one_minus_exp_over(z) / (t * (2.0 * PI * t).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TOL: f64 = 1e-12;

    fn series_i(nu: f64, x: f64) -> f64 {
        bessel_series(nu, x, TOL).unwrap()
    }

    #[test]
    fn closed_form_values_match_series_oracle() {
        // Oracle values from the power series.
        let i_half = series_i(0.5, 1.0);
        let i_three = series_i(1.5, 1.0);
        assert!((i_half - 0.937674).abs() < 1e-6);
        assert!((i_three - 0.293525).abs() < 1e-6);
        let got = bessel_half(BesselKind::I, BesselOrder::Half, 1.0).unwrap();
        assert!((got - i_half).abs() < 1e-10 * i_half);
        let got = bessel_half(BesselKind::I, BesselOrder::ThreeHalves, 1.0).unwrap();
        assert!((got - i_three).abs() < 1e-10 * i_three);
    }

    #[test]
    fn k_half_from_wronskian_with_series_values() {
        // I_{1/2} K_{3/2} + I_{3/2} K_{1/2} = 1/x and K_{3/2} = (1 + 1/x) K_{1/2}
        // give K_{1/2} = (1/x) / ((1 + 1/x) I_{1/2} + I_{3/2}).
        let x = 1.0;
        let k_half = (1.0 / x) / ((1.0 + 1.0 / x) * series_i(0.5, x) + series_i(1.5, x));
        assert!((k_half - 0.461068).abs() < 1e-6);
        let got = bessel_half(BesselKind::K, BesselOrder::Half, x).unwrap();
        assert_relative_eq!(got, k_half, max_relative = 1e-10);
    }

    #[test]
    fn series_three_halves_at_two() {
        let s = series_i(1.5, 2.0);
        let c = bessel_half(BesselKind::I, BesselOrder::ThreeHalves, 2.0).unwrap();
        assert_relative_eq!(s, c, max_relative = 1e-10);
    }

    #[test]
    fn series_leading_term_near_zero() {
        let x = 1e-6;
        let lead = (x / 2.0f64).sqrt() / gamma(1.5);
        assert_relative_eq!(series_i(0.5, x), lead, max_relative = 1e-11);
    }

    #[test]
    fn closed_form_matches_series_on_range() {
        let mut x = 1e-3;
        while x <= 30.0 {
            for (order, nu) in [(BesselOrder::Half, 0.5), (BesselOrder::ThreeHalves, 1.5)] {
                let s = series_i(nu, x);
                let c = bessel_half(BesselKind::I, order, x).unwrap();
                assert!((c - s).abs() <= 1e-10 * s, "nu={nu} x={x}: {c} vs {s}");
            }
            x *= 1.07;
        }
    }

    #[test]
    fn wronskian_identity() {
        let mut x = 0.1;
        while x <= 50.0 {
            let i1 = bessel_half(BesselKind::I, BesselOrder::Half, x).unwrap();
            let i3 = bessel_half(BesselKind::I, BesselOrder::ThreeHalves, x).unwrap();
            let k1 = bessel_half(BesselKind::K, BesselOrder::Half, x).unwrap();
            let k3 = bessel_half(BesselKind::K, BesselOrder::ThreeHalves, x).unwrap();
            let w = i1 * k3 + i3 * k1;
            assert!((w * x - 1.0).abs() <= 1e-12, "x={x}: {w}");
            x *= 1.05;
        }
    }

    #[test]
    fn scaled_and_unscaled_agree() {
        let mut x = 1e-3;
        while x < 700.0 {
            for order in [BesselOrder::Half, BesselOrder::ThreeHalves] {
                let i = bessel_half(BesselKind::I, order, x).unwrap();
                let is = bessel_half_scaled(BesselKind::I, order, x).unwrap() * x.exp();
                assert_relative_eq!(i, is, max_relative = 1e-12);
                let k = bessel_half(BesselKind::K, order, x).unwrap();
                let ks = bessel_half_scaled(BesselKind::K, order, x).unwrap() * (-x).exp();
                assert_relative_eq!(k, ks, max_relative = 1e-12);
            }
            x *= 1.3;
        }
        // Scaled path stays finite where the plain one overflows.
        let s = bessel_half_scaled(BesselKind::I, BesselOrder::Half, 1e4).unwrap();
        assert!(s.is_finite() && s > 0.0);
        assert!(bessel_half(BesselKind::I, BesselOrder::Half, 1e4).unwrap().is_infinite());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            bessel_half(BesselKind::I, BesselOrder::Half, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(BesselOrder::try_from(2.5), Err(Error::UnsupportedOrder(_))));
        assert!(bessel_series(0.5, -1.0, 1e-12).is_err());
        // 500 terms are not enough this far out.
        assert!(matches!(bessel_series(0.5, 5000.0, 1e-12), Err(Error::Numeric(_))));
    }

    #[test]
    fn heat_kernel_matches_series_formula() {
        let p = KernelPoint::new(1.0, 1.0, 1.0).unwrap();
        let oracle = 0.5 * (-1.0f64).exp() * series_i(0.5, 1.0);
        assert_relative_eq!(heat_kernel(p), oracle, max_relative = 1e-12);
        assert!((heat_kernel(p) - 0.1724757).abs() < 1e-6);

        for &(t, x, y) in &[(0.3, 0.5, 2.0), (2.0, 3.0, 0.1), (10.0, 1.0, 7.0)] {
            let q = KernelPoint::new(t, x, y).unwrap();
            let z = x * y / t;
            let oracle = (1.0 / (2.0 * t)) * (x * y).powf(-0.5) * (-(x * x + y * y) / (2.0 * t)).exp()
                * series_i(0.5, z);
            assert_relative_eq!(heat_kernel(q), oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn heat_kernel_symmetric_and_finite() {
        for &(t, x, y) in &[(1.0, 0.3, 9.0), (1e-3, 40.0, 40.5), (1e-4, 300.0, 300.0), (5.0, 1e-9, 2.0)] {
            let a = heat_kernel(KernelPoint::new(t, x, y).unwrap());
            let b = heat_kernel(KernelPoint::new(t, y, x).unwrap());
            assert_eq!(a, b);
            assert!(a.is_finite() && a >= 0.0);
        }
    }

    #[test]
    fn heat_kernel_origin_limit() {
        let lim = 1.0 / (2.0 * PI).sqrt();
        let p = heat_kernel(KernelPoint::new(1.0, 1e-9, 1e-9).unwrap());
        assert!((p - lim).abs() < 1e-12);
        assert!((lim - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn heat_kernel_domain() {
        assert!(KernelPoint::new(0.0, 1.0, 1.0).is_err());
        assert!(KernelPoint::new(1.0, -1.0, 1.0).is_err());
    }
}
