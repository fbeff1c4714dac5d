//! Discrete measures `mu = sum_k a_k delta_k` on the positive integers,
//! optionally combined with the absolutely continuous part `x^2 dx` on (0,1).

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight family of the discrete part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `a_k = c`
    Constant { c: f64 },
    /// `a_k = k^p`
    Power { p: f64 },
    /// `a_k = exp(-beta k)`
    Exponential { beta: f64 },
    /// `a_k = 2^j / j^2` at `k = 2^j` (`j >= 1`), `2^{-k}` elsewhere.
    SparseDyadic,
    /// `a_1, ..., a_n` given explicitly; the measure is only known up to `n`.
    Explicit { weights: Vec<f64> },
}

/// Value of a series tail `sum_{k >= n} a_k / k^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite(f64),
    Divergent,
    /// Explicit weights say nothing about the tail.
    Unknown,
}

impl Tail {
    pub fn finite(self) -> Option<f64> {
        match self {
            Tail::Finite(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Adds `x^2 1_{(0,1)} dx` (mixed-type measure).
    #[serde(default)]
    pub ac_part: bool,
    /// Mass at the origin. Must be zero: the origin has zero capacity.
    #[serde(default)]
    pub atom_at_zero: f64,
}

impl MeasureSpec {
    pub fn new(family: Family) -> Result<Self> {
        let m = Self {
            family,
            ac_part: false,
            atom_at_zero: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Family::Constant { c }).expect("constant weight must be positive")
    }

    pub fn power(p: f64) -> Self {
        Self::new(Family::Power { p }).expect("power exponent must be finite")
    }

    pub fn exponential(beta: f64) -> Self {
        Self::new(Family::Exponential { beta }).expect("exponential rate must be finite")
    }

    pub fn sparse_dyadic() -> Self {
        Self::new(Family::SparseDyadic).unwrap()
    }

    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        Self::new(Family::Explicit { weights })
    }

    pub fn with_ac_part(mut self) -> Self {
        self.ac_part = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atom_at_zero != 0.0 {
            return Err(Error::domain(format!(
                "measure charges the origin (a_0 = {}); measures must not charge 0",
                self.atom_at_zero
            )));
        }
        match &self.family {
            Family::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                Err(Error::domain(format!("constant weight must be positive, got {c}")))
            }
            Family::Power { p } if !p.is_finite() => Err(Error::domain("power exponent must be finite")),
            Family::Exponential { beta } if !beta.is_finite() => {
                Err(Error::domain("exponential rate must be finite"))
            }
            Family::Explicit { weights } => {
                if weights.is_empty() {
                    return Err(Error::domain("explicit weight list is empty"));
                }
                if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
                    return Err(Error::domain(format!("weight a_{} = {w} is not positive", i + 1)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Constant { c } => format!("constant({c})"),
            Family::Power { p } => format!("power({p})"),
            Family::Exponential { beta } => format!("exponential({beta})"),
            Family::SparseDyadic => "sparse_dyadic".to_string(),
            Family::Explicit { weights } => format!("explicit[{}]", weights.len()),
        }
    }

    /// Largest `k` for which `a_k` is known.
    pub fn defined_up_to(&self) -> Option<usize> {
        match &self.family {
            Family::Explicit { weights } => Some(weights.len()),
            _ => None,
        }
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.defined_up_to() {
            Some(len) if n > len => Err(Error::domain(format!(
                "explicit measure defines {len} weights, but index {n} was requested"
            ))),
            _ => Ok(()),
        }
    }

    /// `ln a_k`; finite for every family even where `a_k` underflows.
    ///
    /// # Panics
    /// If `k == 0` or `k` lies beyond an explicit list.
    pub fn ln_weight(&self, k: usize) -> f64 {
        assert!(k >= 1, "weights are indexed from 1");
        let kf = k as f64;
        match &self.family {
            Family::Constant { c } => c.ln(),
            Family::Power { p } => p * kf.ln(),
            Family::Exponential { beta } => -beta * kf,
            Family::SparseDyadic => match dyadic_exponent(k) {
                Some(j) => j as f64 * LN_2 - 2.0 * (j as f64).ln(),
                None => -kf * LN_2,
            },
            Family::Explicit { weights } => weights[k - 1].ln(),
        }
    }

    /// `a_k` (may underflow to zero for the sparse dyadic family).
    pub fn weight(&self, k: usize) -> f64 {
        match &self.family {
            Family::Constant { c } => *c,
            Family::Explicit { weights } => weights[k - 1],
            Family::SparseDyadic => match dyadic_exponent(k) {
                Some(j) => 2f64.powi(j as i32) / (j * j) as f64,
                None if k <= 1074 => 2f64.powi(-(k as i32)),
                None => 0.0,
            },
            _ => self.ln_weight(k).exp(),
        }
    }

    /// `a_1, ..., a_n`.
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        self.check_range(n)?;
        Ok((1..=n).map(|k| self.weight(k)).collect())
    }

    /// Whether `mu(N)` is finite, when the family decides it.
    pub fn mass_finite(&self) -> Option<bool> {
        match &self.family {
            Family::Constant { .. } | Family::SparseDyadic => Some(false),
            Family::Power { p } => Some(*p < -1.0),
            Family::Exponential { beta } => Some(*beta > 0.0),
            Family::Explicit { .. } => None,
        }
    }

    /// `sum_{k=1}^{n} a_k / k^s`.
    pub fn partial_sum(&self, n: usize, s: f64) -> Result<f64> {
        self.check_range(n)?;
        Ok((1..=n).map(|k| (self.ln_weight(k) - s * (k as f64).ln()).exp()).sum())
    }

    /// `sum_{k >= n} a_k / k^s`.
    pub fn series_tail(&self, n: usize, s: f64) -> Tail {
        let n = n.max(1);
        match &self.family {
            Family::Constant { c } => hurwitz(s, n).map_or(Tail::Divergent, |h| Tail::Finite(c * h)),
            Family::Power { p } => hurwitz(s - p, n).map_or(Tail::Divergent, Tail::Finite),
            Family::Exponential { beta } => {
                if *beta > 0.0 {
                    Tail::Finite(exponential_tail(*beta, s, n))
                } else if *beta == 0.0 {
                    hurwitz(s, n).map_or(Tail::Divergent, Tail::Finite)
                } else {
                    Tail::Divergent
                }
            }
            Family::SparseDyadic => dyadic_tail(s, n),
            Family::Explicit { .. } => Tail::Unknown,
        }
    }
}

/// `j` with `k = 2^j`, `j >= 1`.
pub(crate) fn dyadic_exponent(k: usize) -> Option<u32> {
    if k >= 2 && k.is_power_of_two() {
        Some(k.trailing_zeros())
    } else {
        None
    }
}

/// Hurwitz zeta `sum_{k >= n} k^{-s}` by Euler-Maclaurin; `None` if `s <= 1`.
pub(crate) fn hurwitz(s: f64, n: usize) -> Option<f64> {
    if !(s > 1.0) {
        return None;
    }
    const HEAD: usize = 24;
    let mut sum = 0.0;
    for k in n..n + HEAD {
        sum += (k as f64).powf(-s);
    }
    let m = (n + HEAD) as f64;
    let ms = m.powf(-s);
    sum += m * ms / (s - 1.0) + ms / 2.0 + s * ms / m / 12.0 - s * (s + 1.0) * (s + 2.0) * ms / m.powi(3) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * ms / m.powi(5) / 30240.0
        - s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * (s + 5.0) * (s + 6.0) * ms / m.powi(7) / 1_209_600.0;
    Some(sum)
}

fn exponential_tail(beta: f64, s: f64, n: usize) -> f64 {
    let q = (-beta).exp();
    let mut sum = 0.0;
    let mut k = n;
    loop {
        let term = (-beta * k as f64 - s * (k as f64).ln()).exp();
        sum += term;
        if term < 1e-18 * sum || k - n > 1_000_000 {
            // Remaining terms are dominated by a geometric series.
            if s >= 0.0 {
                sum += term * q / (1.0 - q);
            }
            return sum;
        }
        k += 1;
    }
}

fn dyadic_tail(s: f64, n: usize) -> Tail {
    // Heavy atoms at k = 2^j contribute 2^{j(1-s)} / j^2.
    let j0 = (usize::BITS - (n - 1).leading_zeros()).max(1);
    let heavy = if s > 1.0 {
        let mut sum = 0.0;
        for j in j0..2000 {
            let jf = j as f64;
            let term = (jf * (1.0 - s) * LN_2 - 2.0 * jf.ln()).exp();
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    } else if s == 1.0 {
        match hurwitz(2.0, j0 as usize) {
            Some(h) => h,
            None => return Tail::Divergent,
        }
    } else {
        return Tail::Divergent;
    };
    // Light atoms 2^{-k} at the remaining sites.
    let mut light = 0.0;
    let mut k = n;
    loop {
        if dyadic_exponent(k).is_none() {
            let term = (-(k as f64) * LN_2 - s * (k as f64).ln()).exp();
            light += term;
            if term < 1e-18 * (light + heavy) || term == 0.0 {
                break;
            }
        }
        k += 1;
    }
    Tail::Finite(heavy + light)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurwitz_matches_direct_sum() {
        // zeta(2) = pi^2/6
        let z2 = hurwitz(2.0, 1).unwrap();
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        // zeta(3, 10) from a 50-digit evaluation
        assert!((hurwitz(3.0, 10).unwrap() - 0.005524917485401030).abs() < 1e-17);
        assert!((hurwitz(1.5, 1).unwrap() - 2.612375348685488).abs() < 1e-14);
        assert!(hurwitz(1.0, 1).is_none());
    }

    #[test]
    fn dyadic_weights() {
        let m = MeasureSpec::sparse_dyadic();
        assert_eq!(m.weight(1), 0.5);
        assert_eq!(m.weight(2), 2.0);
        assert_eq!(m.weight(3), 0.125);
        assert_eq!(m.weight(4), 1.0);
        assert!((m.weight(8) - 8.0 / 9.0).abs() < 1e-15);
        assert!(m.ln_weight(5000).is_finite());
    }

    #[test]
    fn dyadic_series_tail_against_partial_sums() {
        let m = MeasureSpec::sparse_dyadic();
        let total = m.series_tail(1, 1.0).finite().unwrap();
        let head = m.partial_sum(1 << 20, 1.0).unwrap();
        let rest = m.series_tail((1 << 20) + 1, 1.0).finite().unwrap();
        assert!((total - head - rest).abs() < 1e-12);
        assert!(matches!(m.series_tail(1, 0.5), Tail::Divergent));
    }

    #[test]
    fn exponential_tail_closed_form() {
        let m = MeasureSpec::exponential(1.0);
        // sum_{k>=1} e^{-k} = 1/(e-1)
        let t = m.series_tail(1, 0.0).finite().unwrap();
        assert!((t - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_measures() {
        let mut m = MeasureSpec::constant(1.0);
        m.atom_at_zero = 0.5;
        assert!(m.validate().is_err());
        assert!(MeasureSpec::new(Family::Constant { c: 0.0 }).is_err());
        assert!(MeasureSpec::explicit(vec![1.0, -2.0]).is_err());
        assert!(MeasureSpec::explicit(vec![]).is_err());
        let e = MeasureSpec::explicit(vec![1.0, 2.0]).unwrap();
        assert!(e.weights(3).is_err());
        assert!(matches!(e.series_tail(1, 1.0), Tail::Unknown));
    }

    #[test]
    fn serde_shape() {
        let m: MeasureSpec = serde_json::from_str(r#"{"family":"power","p":2.0}"#).unwrap();
        assert_eq!(m.family, Family::Power { p: 2.0 });
        assert!(!m.ac_part);
        let d: MeasureSpec = serde_json::from_str(r#"{"family":"sparse_dyadic","ac_part":true}"#).unwrap();
        assert_eq!(d.family, Family::SparseDyadic);
        assert!(d.ac_part);
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"family":"lognormal"}"#).is_err());
    }
}
