//! Exact event-driven simulation of the trace birth–death chain.
//!
//! At site `k` the chain waits an exponential time of rate `k^2 / a_k` and
//! then jumps to `k + 1` with probability `(k + 1) / (2k)`, else to `k - 1`.
//! These are the rates `b(k, k±1) / a_k` with `b(k, j) = kj/2`.
//!
//! A path that reaches `site_cap` is stopped there. It counts as exploded
//! when the remaining-time majorant `sum_{k >= cap} a_k / k^2` is below the
//! tolerance, and as indeterminate otherwise. Either way it has not survived,
//! so the survival fraction estimates `P(tau > T)` for the chain absorbed at
//! `site_cap`, i.e. the heat content of the operator truncated at
//! `site_cap - 1` with absorbing boundary, taken at form time `T / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{MeasureSpec, Tail};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub start: usize,
    pub horizon: f64,
    pub trajectories: usize,
    /// Paths are stopped on reaching this site.
    pub site_cap: usize,
    /// Paths are stopped after this many jumps.
    pub event_cap: u64,
    /// Remaining-time majorant below which a capped path counts as exploded.
    pub explosion_tol: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            start: 1,
            horizon: 1.0,
            trajectories: 10_000,
            site_cap: 1000,
            event_cap: 100_000_000,
            explosion_tol: 1e-3,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.trajectories == 0 || self.event_cap == 0 {
            return Err(Error::domain("trajectory and event counts must be >= 1"));
        }
        if self.start == 0 || self.start >= self.site_cap {
            return Err(Error::domain(format!(
                "start site must lie in 1..{}, got {}",
                self.site_cap, self.start
            )));
        }
        if !(self.explosion_tol > 0.0) {
            return Err(Error::domain("explosion tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Survived,
    /// Reached the site cap at the given time.
    Capped(f64),
    /// Ran out of events at the given time.
    EventCap(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeStats {
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub survival_fraction: f64,
    pub standard_error: f64,
    pub trajectories: usize,
    pub survived: usize,
    pub exploded: usize,
    pub indeterminate: usize,
    pub site_cap_hits: usize,
    pub event_cap_hits: usize,
    /// `sum_{k >= site_cap} a_k / k^2`, when known.
    pub remaining_time_bound: Option<f64>,
    /// Lifetimes of the exploded paths.
    pub exploded_lifetime: Option<LifetimeStats>,
    pub seed: u64,
}

struct Chain {
    /// Mean holding time `a_k / k^2`, indexed by site.
    hold: Vec<f64>,
    right: Vec<f64>,
}

impl Chain {
    fn new(m: &MeasureSpec, cap: usize) -> Result<Self> {
        m.validate()?;
        m.check_range(cap)?;
        let mut hold = vec![0.0; cap];
        let mut right = vec![0.0; cap];
        for k in 1..cap {
            let kf = k as f64;
            let a = m.weight(k);
            hold[k] = if a > 0.0 { a / (kf * kf) } else { (m.ln_weight(k) - 2.0 * kf.ln()).exp() };
            right[k] = (kf + 1.0) / (2.0 * kf);
        }
        Ok(Self { hold, right })
    }

    fn rng(seed: u64, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        rng
    }

    /// Runs one path until the horizon (when `timed`) or a cap, reporting
    /// each completed holding period.
    fn run(&self, cfg: &SimConfig, path: usize, timed: bool, mut visit: impl FnMut(usize, f64, bool)) -> Outcome {
        let mut rng = Self::rng(cfg.seed, path);
        let cap = cfg.site_cap;
        let mut k = cfg.start;
        let mut time = 0.0;
        for _ in 0..cfg.event_cap {
            let e: f64 = rng.sample(Exp1);
            let h = e * self.hold[k];
            if timed && time + h > cfg.horizon {
                return Outcome::Survived;
            }
            time += h;
            let up = rng.random::<f64>() < self.right[k];
            visit(k, h, up);
            k = if up { k + 1 } else { k - 1 };
            if k == cap {
                return Outcome::Capped(time);
            }
        }
        Outcome::EventCap(time)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn outcomes(m: &MeasureSpec, cfg: &SimConfig) -> Result<Vec<Outcome>> {
    cfg.validate()?;
    let chain = Chain::new(m, cfg.site_cap)?;
    Ok((0..cfg.trajectories)
        .into_par_iter()
        .map(|i| chain.run(cfg, i, true, |_, _, _| {}))
        .collect())
}

fn remaining_bound(m: &MeasureSpec, cap: usize) -> Option<f64> {
    match m.series_tail(cap, 2.0) {
        Tail::Finite(v) => Some(v),
        _ => None,
    }
}

/// Survival fraction at the horizon plus explosion diagnostics.
pub fn simulate(m: &MeasureSpec, cfg: &SimConfig) -> Result<SimulationReport> {
    let outs = outcomes(m, cfg)?;
    let bound = remaining_bound(m, cfg.site_cap);
    let exploding = bound.is_some_and(|b| b < cfg.explosion_tol);
    let n = outs.len();
    let survived = outs.iter().filter(|o| matches!(o, Outcome::Survived)).count();
    let mut capped: Vec<f64> = outs
        .iter()
        .filter_map(|o| match o {
            Outcome::Capped(t) => Some(*t),
            _ => None,
        })
        .collect();
    let site_cap_hits = capped.len();
    let event_cap_hits = outs.iter().filter(|o| matches!(o, Outcome::EventCap(_))).count();
    let (exploded, indeterminate) = if exploding {
        (site_cap_hits, event_cap_hits)
    } else {
        (0, site_cap_hits + event_cap_hits)
    };
    let exploded_lifetime = if exploding && !capped.is_empty() {
        capped.sort_by(f64::total_cmp);
        Some(LifetimeStats {
            mean: capped.iter().sum::<f64>() / capped.len() as f64,
            q10: quantile(&capped, 0.1),
            median: quantile(&capped, 0.5),
            q90: quantile(&capped, 0.9),
        })
    } else {
        None
    };
    let p = survived as f64 / n as f64;
    Ok(SimulationReport {
        survival_fraction: p,
        standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        trajectories: n,
        survived,
        exploded,
        indeterminate,
        site_cap_hits,
        event_cap_hits,
        remaining_time_bound: bound,
        exploded_lifetime,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub fraction: f64,
    pub stderr: f64,
}

/// Survival fractions at each of `times` (ascending, within the horizon),
/// from one pass per trajectory. Paths stopped by a cap count as dead from
/// the moment they were stopped.
pub fn survival_curve(m: &MeasureSpec, cfg: &SimConfig, times: &[f64]) -> Result<Vec<SurvivalPoint>> {
    if times.is_empty() {
        return Err(Error::domain("survival curve needs at least one time"));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || !(times[0] >= 0.0) {
        return Err(Error::domain("times must be nonnegative and ascending"));
    }
    if times[times.len() - 1] > cfg.horizon {
        return Err(Error::domain("times must not exceed the horizon"));
    }
    let outs = outcomes(m, cfg)?;
    let n = outs.len() as f64;
    Ok(times
        .iter()
        .map(|&t| {
            let alive = outs
                .iter()
                .filter(|o| match o {
                    Outcome::Survived => true,
                    Outcome::Capped(s) | Outcome::EventCap(s) => *s > t,
                })
                .count();
            let p = alive as f64 / n;
            SurvivalPoint {
                t,
                fraction: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteStatistics {
    pub site: usize,
    pub visits: u64,
    pub mean_holding: f64,
    pub holding_stderr: f64,
    /// `a_k / k^2`.
    pub expected_holding: f64,
    pub right_fraction: f64,
    pub right_stderr: f64,
    /// `(k + 1) / (2k)`.
    pub expected_right: f64,
}

/// Empirical holding times and jump directions at the given sites.
///
/// Paths run for `event_cap` jumps (or until the site cap) irrespective of
/// the horizon: cutting them at a fixed time would censor the last holding
/// period and bias the means downwards.
pub fn site_statistics(m: &MeasureSpec, cfg: &SimConfig, sites: &[usize]) -> Result<Vec<SiteStatistics>> {
    cfg.validate()?;
    if sites.iter().any(|&k| k == 0 || k >= cfg.site_cap) {
        return Err(Error::domain("statistics sites must lie below the site cap"));
    }
    let chain = Chain::new(m, cfg.site_cap)?;
    // Per site: visits, sum h, sum h^2, right jumps.
    let per_path: Vec<Vec<(u64, f64, f64, u64)>> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![(0u64, 0.0, 0.0, 0u64); sites.len()];
            chain.run(cfg, i, false, |k, h, up| {
                if let Some(j) = sites.iter().position(|&s| s == k) {
                    let a = &mut acc[j];
                    a.0 += 1;
                    a.1 += h;
                    a.2 += h * h;
                    a.3 += up as u64;
                }
            });
            acc
        })
        .collect();
    Ok(sites
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (mut v, mut s, mut s2, mut r) = (0u64, 0.0, 0.0, 0u64);
            for p in &per_path {
                v += p[j].0;
                s += p[j].1;
                s2 += p[j].2;
                r += p[j].3;
            }
            let vf = v as f64;
            let mean = s / vf;
            let var = (s2 / vf - mean * mean).max(0.0);
            let pr = r as f64 / vf;
            SiteStatistics {
                site: k,
                visits: v,
                mean_holding: mean,
                holding_stderr: (var / vf).sqrt(),
                expected_holding: chain.hold[k],
                right_fraction: pr,
                right_stderr: (pr * (1.0 - pr) / vf).sqrt(),
                expected_right: chain.right[k],
            }
        })
        .collect())
}
