//! Conservativeness of the trace forms.
//!
//! Discrete support: the form is conservative iff `mu(N) = inf` and
//! `sum a_k / k = inf`; equivalently `L u + alpha u = 0` has no bounded
//! nontrivial solution. Mixed support: two sufficient volume-growth tests,
//! in the Euclidean and in the adapted metric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Family, MeasureSpec, Tail};
use crate::trace_forms::edge_weight;

pub const MIN_HORIZON: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Conservative,
    NotConservative,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `mu(N) < inf`.
    FiniteMass,
    /// `sum a_k / k = inf` with `mu(N) = inf`.
    SeriesDivergent,
    /// `sum a_k / k < inf` with `mu(N) = inf`.
    SeriesConvergent,
    /// Decade increments of the partial sums (explicit weights).
    PartialSumTrend,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    /// `sum_{k <= horizon} a_k`
    pub partial_mass: f64,
    /// `sum_{k <= horizon} a_k / k`
    pub partial_series: f64,
    /// `sum_k a_k / k` when finite and known.
    pub series_total: Option<f64>,
    pub mass_finite: Option<bool>,
    /// Ratio of the last two decade increments of `sum a_k / k` (explicit weights).
    pub decade_ratio: Option<f64>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativenessVerdict {
    pub status: Status,
    pub rule: Rule,
    pub evidence: Evidence,
}

/// Settings of the explicit-list trend heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendConfig {
    /// A decade increment smaller than the previous one by this factor is
    /// read as convergence.
    pub factor: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self { factor: 10.0 }
    }
}

fn check_horizon(horizon: usize, min: usize) -> Result<()> {
    if horizon < min {
        return Err(Error::domain(format!("horizon must be at least {min}, got {horizon}")));
    }
    Ok(())
}

pub fn classify_discrete(m: &MeasureSpec, horizon: usize) -> Result<ConservativenessVerdict> {
    classify_discrete_with(m, horizon, TrendConfig::default())
}

pub fn classify_discrete_with(m: &MeasureSpec, horizon: usize, trend: TrendConfig) -> Result<ConservativenessVerdict> {
    m.validate()?;
    check_horizon(horizon, MIN_HORIZON)?;
    let n = m.defined_up_to().map_or(horizon, |len| len.min(horizon));
    let partial_mass = m.partial_sum(n, 0.0)?;
    let partial_series = m.partial_sum(n, 1.0)?;
    let mut evidence = Evidence {
        partial_mass,
        partial_series,
        series_total: None,
        mass_finite: m.mass_finite(),
        decade_ratio: None,
        horizon: n,
    };
    let (status, rule) = match (m.mass_finite(), m.series_tail(1, 1.0)) {
        (Some(true), tail) => {
            evidence.series_total = tail.finite();
            (Status::NotConservative, Rule::FiniteMass)
        }
        (Some(false), Tail::Divergent) => (Status::Conservative, Rule::SeriesDivergent),
        (Some(false), Tail::Finite(total)) => {
            evidence.series_total = Some(total);
            (Status::NotConservative, Rule::SeriesConvergent)
        }
        _ => {
            // Explicit weights: compare the last two decade increments.
            let mass_ratio = decade_ratio(m, n, 0.0)?;
            let series_ratio = decade_ratio(m, n, 1.0)?;
            evidence.decade_ratio = series_ratio;
            match (mass_ratio, series_ratio) {
                (Some(mr), _) if mr * trend.factor <= 1.0 => {
                    evidence.mass_finite = Some(true);
                    (Status::NotConservative, Rule::PartialSumTrend)
                }
                (Some(mr), Some(sr)) if mr >= 1.0 && sr >= 1.0 => (Status::Conservative, Rule::PartialSumTrend),
                (Some(mr), Some(sr)) if mr >= 1.0 && sr * trend.factor <= 1.0 => {
                    (Status::NotConservative, Rule::PartialSumTrend)
                }
                _ => (Status::Inconclusive, Rule::None),
            }
        }
    };
    Ok(ConservativenessVerdict { status, rule, evidence })
}

/// `[S(n) - S(n/10)] / [S(n/10) - S(n/100)]` for `S(k) = sum_{j<=k} a_j / j^s`.
fn decade_ratio(m: &MeasureSpec, n: usize, s: f64) -> Result<Option<f64>> {
    if n < 100 {
        return Ok(None);
    }
    m.check_range(n)?;
    let (n1, n0) = (n / 10, n / 100);
    let range = |lo: usize, hi: usize| -> f64 { (lo + 1..=hi).map(|k| (m.ln_weight(k) - s * (k as f64).ln()).exp()).sum() };
    let (last, prev) = (range(n1, n), range(n0, n1));
    Ok((prev > 0.0).then(|| last / prev))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Unbounded,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicGrowth {
    /// `u_1, ..., u_K` (index 0 is `u_1`).
    pub values: Vec<f64>,
    pub verdict: Growth,
    /// Upper bound on `sup_k u_k` (bounded case).
    pub majorant: Option<f64>,
    /// `1 + 2 alpha sum_{j<=K} a_j (1/j - 1/(K+1))`, a lower bound on `u_{K+1}`.
    pub lower_bound: f64,
    /// `u_K - u_{K-1}`
    pub last_increment: f64,
    /// The run stopped because `u` exceeded the cap.
    pub cap_hit: bool,
}

/// Iterates `u_{k+1} = u_k + 2 alpha / (k(k+1)) sum_{j<=k} a_j u_j` from
/// `u_1 = 1`, the bounded-solution test for `L u + alpha u = 0`.
///
/// Bounded: `sup u <= u_K exp(2 alpha (M_K / K + sum_{j>K} a_j / j))`,
/// `M_K = sum_{j<=K} a_j`. Unbounded: the cap is crossed or
/// `sum a_j / j` diverges (then the lower bound diverges as well).
pub fn harmonic_growth(m: &MeasureSpec, alpha: f64, horizon: usize, bound_cap: f64) -> Result<HarmonicGrowth> {
    m.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(bound_cap > 1.0) {
        return Err(Error::domain("bound_cap must exceed u_1 = 1"));
    }
    check_horizon(horizon, 2)?;
    let horizon = m.defined_up_to().map_or(horizon, |len| len.min(horizon));
    let mut values = Vec::with_capacity(horizon);
    let mut u = 1.0;
    let mut weighted = 0.0; // sum_{j<=k} a_j u_j
    let mut mass = 0.0; // sum_{j<=k} a_j
    let mut lower = 0.0; // sum_{j<=k} a_j / j
    let mut cap_hit = false;
    values.push(u);
    for k in 1..horizon {
        let a = m.weight(k);
        weighted += a * u;
        mass += a;
        lower += a / k as f64;
        let kf = k as f64;
        u += 2.0 * alpha * weighted / (kf * (kf + 1.0));
        values.push(u);
        if !(u <= bound_cap) {
            cap_hit = true;
            break;
        }
    }
    let k = values.len();
    let kf = k as f64;
    let u_k = values[k - 1];
    let last_increment = if k >= 2 { u_k - values[k - 2] } else { 0.0 };
    let lower_bound = 1.0 + 2.0 * alpha * (lower - mass / kf);
    let (verdict, majorant) = if cap_hit {
        (Growth::Unbounded, None)
    } else {
        // The last u pushed is u_K; mass covers a_1..a_{K-1}.
        let mass_k = mass + m.weight(k);
        match m.series_tail(k + 1, 1.0) {
            Tail::Finite(t) => (Growth::Bounded, Some(u_k * (2.0 * alpha * (mass_k / kf + t)).exp())),
            Tail::Divergent => (Growth::Unbounded, None),
            Tail::Unknown => (Growth::Undetermined, None),
        }
    };
    Ok(HarmonicGrowth {
        values,
        verdict,
        majorant,
        lower_bound,
        last_increment,
        cap_hit,
    })
}

/// Status implied by a harmonic-growth verdict.
pub fn status_from_growth(g: Growth) -> Status {
    match g {
        Growth::Bounded => Status::NotConservative,
        Growth::Unbounded => Status::Conservative,
        Growth::Undetermined => Status::Inconclusive,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EuclideanCheck {
    /// `sup_k k^2 / a_k` (infinite when unbounded).
    pub jump_bound: f64,
    pub jump_bound_analytic: bool,
    /// `min` over the last decade of `ln V(k) / (k ln k)`, `V(k) = 1/3 + sum_{j<=k} a_j`.
    pub volume_liminf: f64,
    /// Surrogate at the horizon over surrogate a decade earlier.
    pub volume_trend: f64,
    pub status: Status,
}

/// Sufficient test in the Euclidean metric: `sup k^2/a_k < inf` and
/// `liminf ln V(k) / (k ln k) < inf`.
pub fn mixed_euclidean_check(m: &MeasureSpec, horizon: usize) -> Result<EuclideanCheck> {
    m.validate()?;
    check_horizon(horizon, MIN_HORIZON)?;
    let n = m.defined_up_to().map_or(horizon, |len| len.min(horizon));
    let (jump_bound, analytic) = jump_sup(m, n);
    let radius: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let (volume_liminf, volume_trend) = volume_surrogate(m, &radius)?;
    let status = if m.mass_finite() == Some(true) {
        Status::NotConservative
    } else if jump_bound.is_finite() && volume_liminf.is_finite() && volume_trend <= 1.0 {
        Status::Conservative
    } else {
        Status::Inconclusive
    };
    Ok(EuclideanCheck {
        jump_bound,
        jump_bound_analytic: analytic,
        volume_liminf,
        volume_trend,
        status,
    })
}

fn jump_sup(m: &MeasureSpec, n: usize) -> (f64, bool) {
    let numeric = |upto: usize| {
        (1..=upto)
            .map(|k| (2.0 * (k as f64).ln() - m.ln_weight(k)).exp())
            .fold(0.0, f64::max)
    };
    match &m.family {
        Family::Constant { .. } | Family::SparseDyadic => (f64::INFINITY, true),
        Family::Power { p } => {
            if *p >= 2.0 {
                (1.0, true)
            } else {
                (f64::INFINITY, true)
            }
        }
        Family::Exponential { beta } => {
            if *beta < 0.0 {
                // k^2 e^{beta k} peaks at k = 2/|beta|.
                (numeric(((4.0 / -beta).ceil() as usize).max(2)), true)
            } else {
                (f64::INFINITY, true)
            }
        }
        Family::Explicit { .. } => (numeric(n), false),
    }
}

/// `(min, trend)` of `ln V(k) / (r_k ln r_k)` over the last decade of sites,
/// where `r_k` is the distance of site `k` from the origin.
fn volume_surrogate(m: &MeasureSpec, radius: &[f64]) -> Result<(f64, f64)> {
    let n = radius.len();
    let mut v = 1.0 / 3.0;
    let mut ratios = Vec::with_capacity(n);
    for k in 1..=n {
        v += m.weight(k);
        let r = radius[k - 1];
        ratios.push(if r > std::f64::consts::E {
            v.ln() / (r * r.ln())
        } else {
            f64::NAN
        });
    }
    let start = n / 10;
    let liminf = ratios[start..].iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let trend = ratios[n - 1] / ratios[start.max(1) - 1];
    Ok((liminf, if trend.is_nan() { f64::INFINITY } else { trend }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedMetric {
    /// `sigma[k-1] = sigma(k, k+1)`
    pub sigma: Vec<f64>,
    /// `distance[k-1] = d(1, k)`
    pub distance: Vec<f64>,
}

impl AdaptedMetric {
    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma[k - 1]
    }

    pub fn d(&self, j: usize, k: usize) -> f64 {
        (self.distance[k - 1] - self.distance[j - 1]).abs()
    }
}

fn ln_sigma_sq(m: &MeasureSpec, k: usize) -> f64 {
    // ln min(a_k/k^2, a_{k+1}/(k+1)^2, 1)
    let side = |j: usize| m.ln_weight(j) - 2.0 * (j as f64).ln();
    side(k).min(side(k + 1)).min(0.0)
}

/// `sigma(k, k+1) = sqrt(a_k)/k ∧ sqrt(a_{k+1})/(k+1) ∧ 1` and the path
/// distances `d(1, k)`.
pub fn adapted_metric(m: &MeasureSpec, horizon: usize) -> Result<AdaptedMetric> {
    m.validate()?;
    check_horizon(horizon, 2)?;
    m.check_range(horizon)?;
    let sigma: Vec<f64> = (1..horizon).map(|k| (0.5 * ln_sigma_sq(m, k)).exp()).collect();
    let mut distance = Vec::with_capacity(horizon);
    let mut d = 0.0;
    distance.push(d);
    for s in &sigma {
        d += s;
        distance.push(d);
    }
    Ok(AdaptedMetric { sigma, distance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedCheck {
    /// `max_k (1/a_k) sum_j sigma(k,j)^2 b(k,j)`
    pub max_jump: f64,
    pub jump_bound_ok: bool,
    /// `min` over the last decade of `ln V(k) / (d ln d)`, `d = d(1,k)`.
    pub volume_liminf: f64,
    pub volume_trend: f64,
    pub status: Status,
}

/// Sufficient test in the adapted metric: the per-site jump bound holds by
/// construction, so the volume growth in `d` decides.
pub fn mixed_adapted_check(m: &MeasureSpec, horizon: usize) -> Result<AdaptedCheck> {
    m.validate()?;
    check_horizon(horizon, MIN_HORIZON)?;
    let n = m.defined_up_to().map_or(horizon, |len| len.min(horizon));
    if m.mass_finite() == Some(true) {
        return Ok(AdaptedCheck {
            max_jump: f64::NAN,
            jump_bound_ok: false,
            volume_liminf: f64::NAN,
            volume_trend: f64::NAN,
            status: Status::NotConservative,
        });
    }
    let metric = adapted_metric(m, n)?;
    let max_jump = (1..n)
        .map(|k| {
            let ln_a = m.ln_weight(k);
            let right = (ln_sigma_sq(m, k) - ln_a).exp() * edge_weight(k, k + 1);
            let left = if k > 1 {
                (ln_sigma_sq(m, k - 1) - ln_a).exp() * edge_weight(k, k - 1)
            } else {
                0.0
            };
            left + right
        })
        .fold(0.0, f64::max);
    let jump_bound_ok = max_jump <= 1.0 + 1e-12;
    let radius: Vec<f64> = metric.distance.iter().map(|d| 1.0 + d).collect();
    let (volume_liminf, volume_trend) = volume_surrogate(m, &radius)?;
    let status = if jump_bound_ok && volume_liminf.is_finite() && volume_trend <= 1.0 {
        Status::Conservative
    } else {
        Status::Inconclusive
    };
    Ok(AdaptedCheck {
        max_jump,
        jump_bound_ok,
        volume_liminf,
        volume_trend,
        status,
    })
}
