//! Command dispatch. Every command yields JSON results, an optional CSV
//! table, diagnostics, warnings and a one-line summary.

use bessel_trace::conservativeness::{
    classify_discrete, harmonic_growth, mixed_adapted_check, mixed_euclidean_check, status_from_growth, Status,
};
use bessel_trace::continuum_form::heat_mass;
use bessel_trace::lattice::SupportSpec;
use bessel_trace::markov_sim::{simulate, survival_curve};
use bessel_trace::spectral_semigroup::{
    assemble, decay_ratio, eig_low, embedding_tail, heat_content, transience_witness, Boundary, DiscreteOperator,
};
use bessel_trace::trace_forms::{
    approx_mixed_trace_energy, approx_trace_energy, finite_trace_energy, mixed_quadrature_crosscheck,
    mixed_trace_energy, quadrature_crosscheck, trace_energy, MixedFunction,
};
use bessel_trace::{MeasureSpec, QuadratureConfig};
use serde_json::{json, Map, Value};

use crate::config::{
    CommandName, ConserveParams, KernelParams, MixedParams, Params, RunConfig, SimulateParams, SpectrumParams,
    TraceParams,
};
use crate::error::CliError;
use crate::report::Table;

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub table: Option<Table>,
    pub diagnostics: Map<String, Value>,
    pub warnings: Vec<String>,
    pub summary: String,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialise")
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.measure.as_ref();
    let q = &cfg.quadrature;
    match &cfg.params {
        Params::Kernel(p) => kernel(p, q),
        Params::Trace(p) => trace(p, q),
        Params::Conserve(p) => conserve(m.expect("validated"), p),
        Params::Spectrum(p) => spectrum(m.expect("validated"), p, cfg.seed),
        Params::Simulate(p) => simulation(m.expect("validated"), p, cfg.seed),
        Params::Mixed(p) => mixed(m.expect("validated"), p, q),
        Params::ReportAll(p) => {
            let m = m.expect("validated");
            let parts = [
                (CommandName::Kernel, kernel(&p.kernel, q)?),
                (CommandName::Trace, trace(&p.trace, q)?),
                (CommandName::Conserve, conserve(m, &p.conserve)?),
                (CommandName::Spectrum, spectrum(m, &p.spectrum, cfg.seed)?),
                (CommandName::Simulate, simulation(m, &p.simulate, cfg.seed)?),
                (CommandName::Mixed, mixed(m, &p.mixed, q)?),
            ];
            let mut out = Outcome::default();
            let mut results = Map::new();
            let mut summaries = Vec::new();
            for (name, o) in parts {
                results.insert(name.as_str().into(), o.results);
                out.diagnostics.insert(name.as_str().into(), Value::Object(o.diagnostics));
                out.warnings.extend(o.warnings.into_iter().map(|w| format!("{}: {w}", name.as_str())));
                summaries.push(o.summary);
            }
            out.results = Value::Object(results);
            out.summary = summaries.join("; ");
            Ok(out)
        }
    }
}

fn kernel(p: &KernelParams, q: &QuadratureConfig) -> Result<Outcome, CliError> {
    let mut table = Table::new(vec!["t", "x", "mass", "deviation"]);
    let mut points = Vec::new();
    let mut worst = 0.0_f64;
    for &t in &p.t_grid {
        for &x in &p.x_grid {
            let mass = heat_mass(t, x, q)?;
            let dev = (mass - 1.0).abs();
            worst = worst.max(dev);
            points.push(json!({"t": t, "x": x, "mass": mass, "deviation": dev}));
            table.push(vec![t.into(), x.into(), mass.into(), dev.into()]);
        }
    }
    Ok(Outcome {
        summary: format!("kernel: {} points, max |mass - 1| = {worst:.3e}", points.len()),
        results: json!({"points": points, "max_deviation": worst}),
        table: Some(table),
        ..Outcome::default()
    })
}

fn trace(p: &TraceParams, q: &QuadratureConfig) -> Result<Outcome, CliError> {
    let mut table = Table::new(vec!["vector", "lambda", "approx_energy", "limit_energy", "gap", "quadrature"]);
    let mut warnings = Vec::new();
    let mut vectors = Vec::new();
    let mut lambdas = p.lambdas.clone();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    for (i, u) in p.vectors.iter().enumerate() {
        let limit = match p.support {
            SupportSpec::FiniteDiscrete { n } => finite_trace_energy(u, n)?,
            _ => trace_energy(u),
        };
        let mut pts = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        let (mut gap_monotone, mut energy_monotone) = (true, true);
        for &lambda in &lambdas {
            let approx = approx_trace_energy(u, lambda, p.support)?;
            let quad = if p.crosscheck {
                Some(quadrature_crosscheck(u, lambda, p.support, q)?.1)
            } else {
                None
            };
            let gap = (approx - limit).abs();
            if let Some((pa, pg)) = prev {
                gap_monotone &= gap <= pg;
                energy_monotone &= approx <= pa;
            }
            prev = Some((approx, gap));
            pts.push(json!({"lambda": lambda, "approx_energy": approx, "gap": gap, "quadrature": quad}));
            table.push(vec![
                i.into(),
                lambda.into(),
                approx.into(),
                limit.into(),
                gap.into(),
                quad.unwrap_or(f64::NAN).into(),
            ]);
        }
        if !gap_monotone || !energy_monotone {
            warnings.push(format!("vector {i}: approximating energies not monotone along the lambda grid"));
        }
        vectors.push(json!({
            "index": i,
            "limit_energy": limit,
            "points": pts,
            "gap_decreasing": gap_monotone,
            "energy_increasing_in_lambda": energy_monotone,
        }));
    }
    Ok(Outcome {
        summary: format!("trace: {} vectors x {} lambdas", p.vectors.len(), lambdas.len()),
        results: json!({"support": p.support, "vectors": vectors}),
        table: Some(table),
        warnings,
        ..Outcome::default()
    })
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Conservative => "conservative",
        Status::NotConservative => "not_conservative",
        Status::Inconclusive => "inconclusive",
    }
}

fn mixed_checks(m: &MeasureSpec, horizon: usize) -> Result<(Value, Status), CliError> {
    let e = mixed_euclidean_check(m, horizon)?;
    let a = mixed_adapted_check(m, horizon)?;
    let status = if e.status == Status::NotConservative || a.status == Status::NotConservative {
        Status::NotConservative
    } else if e.status == Status::Conservative || a.status == Status::Conservative {
        Status::Conservative
    } else {
        Status::Inconclusive
    };
    Ok((json!({"euclidean": e, "adapted": a, "status": status}), status))
}

fn conserve(m: &MeasureSpec, p: &ConserveParams) -> Result<Outcome, CliError> {
    let verdict = classify_discrete(m, p.horizon)?;
    let growth_horizon = m.defined_up_to().map_or(p.horizon, |l| l.min(p.horizon));
    let g = harmonic_growth(m, p.alpha, growth_horizon, p.bound_cap)?;
    let growth_status = status_from_growth(g.verdict);
    let mut warnings = Vec::new();
    let agree = growth_status == verdict.status
        || growth_status == Status::Inconclusive
        || verdict.status == Status::Inconclusive;
    if !agree {
        warnings.push("series criterion and harmonic-growth test disagree".into());
    }
    if verdict.status == Status::Inconclusive {
        warnings.push("discrete verdict is inconclusive at this horizon".into());
    }
    let growth = json!({
        "verdict": g.verdict,
        "status": growth_status,
        "majorant": g.majorant,
        "lower_bound": g.lower_bound,
        "last_increment": g.last_increment,
        "last_value": g.values.last().copied(),
        "steps": g.values.len(),
        "cap_hit": g.cap_hit,
    });
    let mut results = json!({
        "measure": m.name(),
        "status": verdict.status,
        "rule": verdict.rule,
        "evidence": verdict.evidence,
        "harmonic_growth": growth,
        "agreement": agree,
    });
    let mut overall = verdict.status;
    if m.ac_part {
        let (checks, status) = mixed_checks(m, p.horizon)?;
        results["mixed"] = checks;
        overall = status;
        results["overall_status"] = to_value(&status);
    }
    let mut table = Table::new(vec![
        "measure",
        "status",
        "rule",
        "growth_verdict",
        "partial_mass",
        "partial_series",
        "overall_status",
    ]);
    table.push(vec![
        m.name().into(),
        status_str(verdict.status).into(),
        to_value(&verdict.rule).as_str().unwrap_or_default().to_string().into(),
        to_value(&g.verdict).as_str().unwrap_or_default().to_string().into(),
        verdict.evidence.partial_mass.into(),
        verdict.evidence.partial_series.into(),
        status_str(overall).into(),
    ]);
    Ok(Outcome {
        summary: format!("conserve: {} -> {}", m.name(), status_str(overall)),
        results,
        table: Some(table),
        warnings,
        ..Outcome::default()
    })
}

fn build_operator(m: &MeasureSpec, p: &SpectrumParams, n: usize) -> Result<DiscreteOperator, CliError> {
    let support = p.support_for(m);
    let mesh = match support {
        SupportSpec::Mixed => Some(p.mesh.build()?),
        _ => None,
    };
    Ok(assemble(m, support, n, p.boundary, mesh.as_ref())?)
}

fn spectrum(m: &MeasureSpec, p: &SpectrumParams, seed: u64) -> Result<Outcome, CliError> {
    let op = build_operator(m, p, p.n)?;
    let mut warnings = Vec::new();
    let mut diagnostics = Map::new();
    let refined = if p.refine && !matches!(op.support(), SupportSpec::FiniteDiscrete { .. }) {
        match build_operator(m, p, 2 * p.n) {
            Ok(o) => Some(o),
            Err(e) => {
                warnings.push(format!("no refinement at N = {}: {e}", 2 * p.n));
                None
            }
        }
    } else {
        None
    };
    if p.boundary == Boundary::Reflecting {
        warnings.push("reflecting truncation preserves mass by construction".into());
    }

    let mut table = Table::new(vec!["t", "site", "heat_content", "heat_content_refined", "drift"]);
    let mut heat = Vec::new();
    let mut study = Vec::new();
    for &t in &p.times {
        let h = heat_content(&op, t, p.site)?;
        let hr = refined.as_ref().map(|r| heat_content(r, t, p.site)).transpose()?;
        let drift = hr.map(|x| (x - h).abs());
        heat.push(json!({"t": t, "value": h, "refined": hr, "drift": drift}));
        study.push(json!({"t": t, "n": p.n, "refined_n": refined.as_ref().map(|_| 2 * p.n), "drift": drift}));
        table.push(vec![
            t.into(),
            p.site.into(),
            h.into(),
            hr.unwrap_or(f64::NAN).into(),
            drift.unwrap_or(f64::NAN).into(),
        ]);
    }
    diagnostics.insert("truncation_study".into(), Value::Array(study));

    let (eigen, max_decay) = match eig_low(&op, p.eigen_count) {
        Ok(pairs) => {
            let mut rows = Vec::new();
            let mut max = 0.0_f64;
            for pr in &pairs {
                let d = decay_ratio(&pr.vector, &op)?;
                max = max.max(d);
                rows.push(json!({"value": pr.value, "residual": pr.residual, "decay_ratio": d}));
            }
            (rows, Some(max))
        }
        Err(e) => {
            warnings.push(format!("eigenpairs unavailable: {e}"));
            (Vec::new(), None)
        }
    };
    let witness = transience_witness(&op, p.witness_trials, seed)?;
    let embedding = match &p.embedding {
        Some(e) => {
            let mut rows = Vec::new();
            for &k in &e.tail_starts {
                rows.push(to_value(&embedding_tail(m, e.p, k, &op)?));
            }
            Value::Array(rows)
        }
        None => Value::Null,
    };
    Ok(Outcome {
        summary: format!(
            "spectrum: {} at N = {}, heat content at t = {} is {:.6}",
            m.name(),
            p.n,
            p.times[0],
            heat[0]["value"].as_f64().unwrap_or(f64::NAN)
        ),
        results: json!({
            "dimension": op.dim(),
            "support": op.support(),
            "heat_content": heat,
            "eigenpairs": eigen,
            "max_decay_ratio": max_decay,
            "transience_witness": witness,
            "embedding": embedding,
        }),
        table: Some(table),
        diagnostics,
        warnings,
    })
}

fn simulation(m: &MeasureSpec, p: &SimulateParams, seed: u64) -> Result<Outcome, CliError> {
    let cfg = p.sim_config(seed);
    let report = simulate(m, &cfg)?;
    let mut warnings = Vec::new();
    if m.ac_part {
        warnings.push("the simulation runs the lattice chain only; the continuum part is ignored".into());
    }
    if report.indeterminate > 0 {
        warnings.push(format!(
            "{} paths stopped by a cap without an explosion signature",
            report.indeterminate
        ));
    }
    let mut times = p.times.clone();
    if times.last() != Some(&p.horizon) {
        times.push(p.horizon);
    }
    let curve = survival_curve(m, &cfg, &times)?;
    let mut table = Table::new(vec!["t", "fraction", "stderr"]);
    for pt in &curve {
        table.push(vec![pt.t.into(), pt.fraction.into(), pt.stderr.into()]);
    }

    let mut diagnostics = Map::new();
    let comparison = if p.compare {
        // Absorption at the site cap is the absorbing truncation at cap - 1;
        // chain time T is form time T/2.
        let n = p.site_cap - 1;
        let t = 0.5 * p.horizon;
        let op = assemble(m, SupportSpec::InfiniteDiscrete, n, Boundary::Absorbing, None)?;
        let hc = heat_content(&op, t, p.start)?;
        let half = (n / 2 >= 3 && p.start <= n / 2)
            .then(|| assemble(m, SupportSpec::InfiniteDiscrete, n / 2, Boundary::Absorbing, None))
            .transpose()?
            .map(|o| heat_content(&o, t, p.start))
            .transpose()?;
        let drift = half.map_or(0.0, |h| (hc - h).abs());
        let combined = (report.standard_error.powi(2) + drift * drift).sqrt();
        let diff = report.survival_fraction - hc;
        let z = if combined > 0.0 { diff.abs() / combined } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        if z > 3.0 {
            warnings.push(format!("simulation and heat content differ by {z:.2} combined standard errors"));
        }
        diagnostics.insert(
            "truncation_study".into(),
            json!({"n": n, "heat_content": hc, "half_n": n / 2, "heat_content_half": half, "drift": drift}),
        );
        json!({
            "heat_content": hc,
            "form_time": t,
            "truncation": n,
            "truncation_drift": drift,
            "combined_standard_error": combined,
            "z_score": z,
        })
    } else {
        Value::Null
    };
    Ok(Outcome {
        summary: format!(
            "simulate: {} survival at T = {} is {:.4} +/- {:.4}",
            m.name(),
            p.horizon,
            report.survival_fraction,
            report.standard_error
        ),
        results: json!({"report": report, "curve": curve, "comparison": comparison}),
        table: Some(table),
        diagnostics,
        warnings,
    })
}

fn mixed(m: &MeasureSpec, p: &MixedParams, q: &QuadratureConfig) -> Result<Outcome, CliError> {
    let f = MixedFunction::new(p.psi.clone(), p.lattice.clone())?;
    let energy = mixed_trace_energy(&f, q)?;
    let mut table = Table::new(vec!["lambda", "approx_energy", "limit_energy", "gap", "quadrature"]);
    let mut pts = Vec::new();
    for &lambda in &p.lambdas {
        let approx = approx_mixed_trace_energy(&f, lambda, q)?;
        let quad = if p.crosscheck {
            Some(mixed_quadrature_crosscheck(&f, lambda, q)?.1)
        } else {
            None
        };
        let gap = (approx - energy).abs();
        pts.push(json!({"lambda": lambda, "approx_energy": approx, "gap": gap, "quadrature": quad}));
        table.push(vec![
            lambda.into(),
            approx.into(),
            energy.into(),
            gap.into(),
            quad.unwrap_or(f64::NAN).into(),
        ]);
    }
    let (checks, status) = mixed_checks(m, p.horizon)?;
    let mut warnings = Vec::new();
    if !m.ac_part {
        warnings.push("measure has no absolutely continuous part; the checks assume one".into());
    }
    Ok(Outcome {
        summary: format!("mixed: energy {energy:.6}, {} -> {}", m.name(), status_str(status)),
        results: json!({"energy": energy, "points": pts, "checks": checks, "status": status}),
        table: Some(table),
        warnings,
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conserve_constant_is_conservative() {
        let cfg = RunConfig::parse(
            r#"{"command": "conserve", "measure": {"family": "constant", "c": 1.0}, "params": {"horizon": 10000}}"#,
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.results["status"], "conservative");
        assert_eq!(out.results["agreement"], true);
    }

    #[test]
    fn kernel_table_has_one_row_per_point() {
        let cfg = RunConfig::parse(r#"{"command": "kernel", "params": {"t_grid": [1.0], "x_grid": [1.0, 2.0]}}"#).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.table.unwrap().rows.len(), 2);
        assert!(out.results["max_deviation"].as_f64().unwrap() < 1e-8);
    }
}
