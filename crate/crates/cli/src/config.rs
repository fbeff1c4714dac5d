//! Run configuration: parsed from JSON, validated per command, and echoed
//! back (with every default filled in) in the report.

use std::path::{Path, PathBuf};

use bessel_trace::continuum_form::TestFunction;
use bessel_trace::lattice::SupportSpec;
use bessel_trace::spectral_semigroup::{Boundary, MixedMesh};
use bessel_trace::{LatticeFunction, MeasureSpec, QuadratureConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Kernel,
    Trace,
    Conserve,
    Spectrum,
    Simulate,
    Mixed,
    ReportAll,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Kernel => "kernel",
            CommandName::Trace => "trace",
            CommandName::Conserve => "conserve",
            CommandName::Spectrum => "spectrum",
            CommandName::Simulate => "simulate",
            CommandName::Mixed => "mixed",
            CommandName::ReportAll => "report-all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: CommandName,
    #[serde(default)]
    measure: Option<MeasureSpec>,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputSpec,
    #[serde(default)]
    quadrature: QuadratureConfig,
    #[serde(default)]
    timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            t_grid: vec![0.1, 1.0, 10.0],
            x_grid: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceParams {
    pub vectors: Vec<LatticeFunction>,
    pub lambdas: Vec<f64>,
    pub support: SupportSpec,
    pub crosscheck: bool,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            vectors: vec![LatticeFunction::unit(1), LatticeFunction::indicator(&[1, 2])],
            lambdas: (2..=8).map(|e| 10f64.powi(-e)).collect(),
            support: SupportSpec::InfiniteDiscrete,
            crosscheck: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConserveParams {
    pub horizon: usize,
    pub alpha: f64,
    pub bound_cap: f64,
}

impl Default for ConserveParams {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            alpha: 1.0,
            bound_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshParams {
    pub elements: usize,
    pub x_min: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            elements: 200,
            x_min: 1e-6,
        }
    }
}

impl MeshParams {
    pub fn build(&self) -> Result<MixedMesh, CliError> {
        Ok(MixedMesh::geometric(self.elements, self.x_min)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingParams {
    pub p: f64,
    pub tail_starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub n: usize,
    pub boundary: Boundary,
    /// Defaults to mixed when the measure has an absolutely continuous part.
    pub support: Option<SupportSpec>,
    pub mesh: MeshParams,
    pub times: Vec<f64>,
    pub site: usize,
    pub eigen_count: usize,
    pub embedding: Option<EmbeddingParams>,
    pub witness_trials: usize,
    /// Repeat the heat-content study at `2n`.
    pub refine: bool,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            n: 500,
            boundary: Boundary::Absorbing,
            support: None,
            mesh: MeshParams::default(),
            times: vec![0.05, 0.5, 1.0],
            site: 1,
            eigen_count: 10,
            embedding: None,
            witness_trials: 1000,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub start: usize,
    pub horizon: f64,
    pub trajectories: usize,
    pub site_cap: usize,
    pub event_cap: u64,
    pub explosion_tol: f64,
    /// Extra times for a survival curve; the horizon is always reported.
    pub times: Vec<f64>,
    /// Compare with the heat content of the matching truncation.
    pub compare: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        let d = bessel_trace::markov_sim::SimConfig::default();
        Self {
            start: d.start,
            horizon: d.horizon,
            trajectories: d.trajectories,
            site_cap: d.site_cap,
            event_cap: d.event_cap,
            explosion_tol: d.explosion_tol,
            times: Vec::new(),
            compare: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedParams {
    pub psi: TestFunction,
    pub lattice: LatticeFunction,
    pub lambdas: Vec<f64>,
    pub horizon: usize,
    pub crosscheck: bool,
}

impl Default for MixedParams {
    fn default() -> Self {
        Self {
            psi: TestFunction::polynomial(vec![0.0, 1.0]),
            lattice: LatticeFunction::unit(1),
            lambdas: (1..=4).map(|e| 10f64.powi(-e)).collect(),
            horizon: 100_000,
            crosscheck: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportAllParams {
    #[serde(default)]
    pub kernel: KernelParams,
    #[serde(default)]
    pub trace: TraceParams,
    #[serde(default)]
    pub conserve: ConserveParams,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default = "report_all_simulation")]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub mixed: MixedParams,
}

fn report_all_simulation() -> SimulateParams {
    SimulateParams {
        trajectories: 2000,
        ..SimulateParams::default()
    }
}

impl Default for ReportAllParams {
    fn default() -> Self {
        Self {
            kernel: KernelParams::default(),
            trace: TraceParams::default(),
            conserve: ConserveParams::default(),
            spectrum: SpectrumParams::default(),
            simulate: report_all_simulation(),
            mixed: MixedParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Kernel(KernelParams),
    Trace(TraceParams),
    Conserve(ConserveParams),
    Spectrum(SpectrumParams),
    Simulate(SimulateParams),
    Mixed(MixedParams),
    ReportAll(ReportAllParams),
}

/// A validated configuration with all defaults resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub measure: Option<MeasureSpec>,
    pub params: Params,
    pub seed: u64,
    pub output: OutputSpec,
    pub quadrature: QuadratureConfig,
    pub timings: bool,
}

fn parse_params<T: DeserializeOwned>(v: Option<serde_json::Value>) -> Result<T, CliError> {
    let v = v.unwrap_or_else(|| serde_json::Value::Object(Default::default()));
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("invalid params: {e}")))
}

fn positive_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Validation(format!("{name} must not be empty")));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(CliError::Validation(format!("{name} entries must be positive and finite, got {v}")));
    }
    Ok(())
}

fn need_measure(m: &Option<MeasureSpec>, cmd: CommandName) -> Result<&MeasureSpec, CliError> {
    m.as_ref()
        .ok_or_else(|| CliError::Validation(format!("command {} needs a measure", cmd.as_str())))
}

impl KernelParams {
    fn validate(&self) -> Result<(), CliError> {
        positive_grid("t_grid", &self.t_grid)?;
        positive_grid("x_grid", &self.x_grid)
    }
}

impl TraceParams {
    fn validate(&self) -> Result<(), CliError> {
        positive_grid("lambdas", &self.lambdas)?;
        self.support.validate()?;
        if self.support == SupportSpec::Mixed {
            return Err(CliError::Validation("mixed support is handled by the mixed command".into()));
        }
        if self.vectors.is_empty() || self.vectors.iter().any(|v| v.is_zero()) {
            return Err(CliError::Validation("vectors must be nonempty and nonzero".into()));
        }
        Ok(())
    }
}

impl ConserveParams {
    fn validate(&self) -> Result<(), CliError> {
        if self.horizon < bessel_trace::conservativeness::MIN_HORIZON {
            return Err(CliError::Validation(format!(
                "horizon must be at least {}",
                bessel_trace::conservativeness::MIN_HORIZON
            )));
        }
        if !(self.alpha > 0.0) || !(self.bound_cap > 1.0) {
            return Err(CliError::Validation("alpha must be positive and bound_cap > 1".into()));
        }
        Ok(())
    }
}

impl SpectrumParams {
    pub fn support_for(&self, m: &MeasureSpec) -> SupportSpec {
        self.support.unwrap_or(if m.ac_part {
            SupportSpec::Mixed
        } else {
            SupportSpec::InfiniteDiscrete
        })
    }

    fn validate(&self, m: &MeasureSpec) -> Result<(), CliError> {
        if self.n < 3 {
            return Err(CliError::Validation("n must be at least 3".into()));
        }
        positive_grid("times", &self.times)?;
        let support = self.support_for(m);
        support.validate()?;
        if support == SupportSpec::Mixed {
            self.mesh.build()?;
        }
        let sites = match support {
            SupportSpec::FiniteDiscrete { n } => n,
            _ => self.n,
        };
        if self.site == 0 || self.site > sites {
            return Err(CliError::Validation(format!("site must lie in 1..={sites}")));
        }
        if self.eigen_count == 0 || self.eigen_count > sites {
            return Err(CliError::Validation(format!("eigen_count must lie in 1..={sites}")));
        }
        if self.witness_trials == 0 {
            return Err(CliError::Validation("witness_trials must be >= 1".into()));
        }
        if let Some(e) = &self.embedding {
            if !(e.p >= 1.0) || e.tail_starts.is_empty() || e.tail_starts.iter().any(|&k| k == 0 || k >= sites) {
                return Err(CliError::Validation(format!(
                    "embedding needs p >= 1 and tail starts in 1..{sites}"
                )));
            }
        }
        Ok(())
    }
}

impl SimulateParams {
    pub fn sim_config(&self, seed: u64) -> bessel_trace::markov_sim::SimConfig {
        bessel_trace::markov_sim::SimConfig {
            start: self.start,
            horizon: self.horizon,
            trajectories: self.trajectories,
            site_cap: self.site_cap,
            event_cap: self.event_cap,
            explosion_tol: self.explosion_tol,
            seed,
        }
    }

    fn validate(&self, m: &MeasureSpec) -> Result<(), CliError> {
        self.sim_config(0).validate()?;
        m.check_range(self.site_cap)?;
        if self.times.windows(2).any(|w| !(w[1] >= w[0])) || self.times.iter().any(|&t| !(t >= 0.0) || t > self.horizon) {
            return Err(CliError::Validation("times must be ascending and within [0, horizon]".into()));
        }
        if self.compare && self.site_cap < 7 {
            return Err(CliError::Validation("comparison needs site_cap >= 7".into()));
        }
        Ok(())
    }
}

impl MixedParams {
    fn validate(&self) -> Result<(), CliError> {
        positive_grid("lambdas", &self.lambdas)?;
        bessel_trace::trace_forms::MixedFunction::new(self.psi.clone(), self.lattice.clone())?;
        if self.horizon < bessel_trace::conservativeness::MIN_HORIZON {
            return Err(CliError::Validation(format!(
                "horizon must be at least {}",
                bessel_trace::conservativeness::MIN_HORIZON
            )));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        raw.quadrature.validate()?;
        if let Some(m) = &raw.measure {
            m.validate()?;
        }
        let cmd = raw.command;
        let params = match cmd {
            CommandName::Kernel => {
                let p: KernelParams = parse_params(raw.params)?;
                p.validate()?;
                Params::Kernel(p)
            }
            CommandName::Trace => {
                let p: TraceParams = parse_params(raw.params)?;
                p.validate()?;
                Params::Trace(p)
            }
            CommandName::Conserve => {
                need_measure(&raw.measure, cmd)?;
                let p: ConserveParams = parse_params(raw.params)?;
                p.validate()?;
                Params::Conserve(p)
            }
            CommandName::Spectrum => {
                let m = need_measure(&raw.measure, cmd)?;
                let p: SpectrumParams = parse_params(raw.params)?;
                p.validate(m)?;
                Params::Spectrum(p)
            }
            CommandName::Simulate => {
                let m = need_measure(&raw.measure, cmd)?;
                let p: SimulateParams = parse_params(raw.params)?;
                p.validate(m)?;
                Params::Simulate(p)
            }
            CommandName::Mixed => {
                need_measure(&raw.measure, cmd)?;
                let p: MixedParams = parse_params(raw.params)?;
                p.validate()?;
                Params::Mixed(p)
            }
            CommandName::ReportAll => {
                let m = need_measure(&raw.measure, cmd)?;
                let p: ReportAllParams = parse_params(raw.params)?;
                p.kernel.validate()?;
                p.trace.validate()?;
                p.conserve.validate()?;
                p.spectrum.validate(m)?;
                p.simulate.validate(m)?;
                p.mixed.validate()?;
                if raw.output.format == Format::Csv {
                    return Err(CliError::Validation("report-all writes JSON only".into()));
                }
                Params::ReportAll(p)
            }
        };
        Ok(Self {
            command: cmd,
            measure: raw.measure,
            params,
            seed: raw.seed,
            output: raw.output,
            quadrature: raw.quadrature,
            timings: raw.timings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_expanded() {
        let c = RunConfig::parse(r#"{"command": "kernel"}"#).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["params"]["t_grid"].as_array().unwrap().len(), 3);
        assert_eq!(v["quadrature"]["max_subdivisions"], 4000);
        assert_eq!(v["output"]["format"], "json");
    }

    #[test]
    fn validation_errors() {
        for bad in [
            r#"{"command": "nope"}"#,
            r#"{"command": "kernel", "extra": 1}"#,
            r#"{"command": "kernel", "params": {"t_grid": [-1.0]}}"#,
            r#"{"command": "conserve"}"#,
            r#"{"command": "conserve", "measure": {"family": "unknown"}}"#,
            r#"{"command": "conserve", "measure": {"family": "constant", "c": -1.0}}"#,
            r#"{"command": "conserve", "measure": {"family": "constant", "c": 1.0, "atom_at_zero": 0.5}}"#,
            r#"{"command": "spectrum", "measure": {"family": "constant", "c": 1.0}, "params": {"n": 2}}"#,
            r#"{"command": "report-all", "measure": {"family": "constant", "c": 1.0}, "output": {"format": "csv"}}"#,
            "not json",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(CliError::Validation(_))), "{bad}");
        }
    }
}
