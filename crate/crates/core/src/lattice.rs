use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasureSpec;

/// Real sequence `(u_k)_{k >= 1}`, zero beyond its horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeFunction {
    /// `values[k - 1] = u_k`
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("u_{} is not finite", k + 1)));
        }
        Ok(Self { values })
    }

    pub fn zeros(horizon: usize) -> Self {
        Self {
            values: vec![0.0; horizon],
        }
    }

    /// Indicator of site `k`.
    pub fn unit(k: usize) -> Self {
        assert!(k >= 1, "lattice sites start at 1");
        let mut values = vec![0.0; k];
        values[k - 1] = 1.0;
        Self { values }
    }

    /// Indicator of the sites in `sites`.
    pub fn indicator(sites: &[usize]) -> Self {
        let n = sites.iter().copied().max().unwrap_or(0);
        let mut values = vec![0.0; n];
        for &k in sites {
            assert!(k >= 1, "lattice sites start at 1");
            values[k - 1] = 1.0;
        }
        Self { values }
    }

    pub fn constant(c: f64, horizon: usize) -> Self {
        Self {
            values: vec![c; horizon],
        }
    }

    /// `u_k`; zero for `k = 0` and beyond the horizon.
    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Largest site with a nonzero value (0 for the zero function).
    pub fn support_max(&self) -> usize {
        self.values.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1)
    }

    pub fn is_zero(&self) -> bool {
        self.support_max() == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.horizon().max(other.horizon());
        Self {
            values: (1..=n).map(|k| self.get(k) + other.get(k)).collect(),
        }
    }

    /// `sum_k u_k^2 a_k`.
    pub fn norm_sq(&self, m: &MeasureSpec) -> Result<f64> {
        let n = self.support_max();
        m.check_range(n)?;
        Ok((1..=n).map(|k| self.get(k).powi(2) * m.weight(k)).sum())
    }
}

/// Where the trace measure lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportSpec {
    /// All of `N = {1, 2, ...}`.
    InfiniteDiscrete,
    /// `{1, ..., n}`.
    FiniteDiscrete { n: usize },
    /// `(0, 1] ∪ N`.
    Mixed,
}

impl SupportSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SupportSpec::FiniteDiscrete { n: 0 } => Err(Error::domain("finite support needs N >= 1")),
            _ => Ok(()),
        }
    }

    pub fn finite(n: usize) -> Result<Self> {
        let s = SupportSpec::FiniteDiscrete { n };
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_and_support() {
        let u = LatticeFunction::new(vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(u.get(0), 0.0);
        assert_eq!(u.get(3), 2.0);
        assert_eq!(u.get(100), 0.0);
        assert_eq!(u.support_max(), 3);
        assert_eq!(LatticeFunction::unit(4).support_max(), 4);
        assert!(LatticeFunction::zeros(5).is_zero());
        assert!(LatticeFunction::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn norm_uses_measure() {
        let u = LatticeFunction::new(vec![1.0, 2.0]).unwrap();
        let m = MeasureSpec::power(1.0);
        assert_eq!(u.norm_sq(&m).unwrap(), 1.0 + 4.0 * 2.0);
    }

    #[test]
    fn finite_support_needs_sites() {
        assert!(SupportSpec::finite(0).is_err());
        assert!(SupportSpec::finite(3).is_ok());
    }
}
