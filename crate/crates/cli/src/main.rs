use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::Value;

mod commands;
mod config;
mod error;
mod report;

use config::{Format, RunConfig};
use error::CliError;
use report::{report_schema_version, Report};

/// Batch runner for Bessel trace computations.
#[derive(Debug, Parser)]
#[command(name = "bessel-trace", version)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Parse and validate the configuration, then exit.
    #[arg(long)]
    validate_only: bool,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_output(config: &Path, format: Format) -> PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = match format {
        Format::Json => "report.json",
        Format::Csv => "report.csv",
    };
    config.with_file_name(format!("{stem}.{ext}"))
}

fn execute(args: &Args) -> Result<String, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    if args.validate_only {
        return Ok(format!("{}: configuration is valid", cfg.command.as_str()));
    }
    let path = cfg
        .output
        .path
        .clone()
        .unwrap_or_else(|| default_output(&args.config, cfg.output.format));

    let started = Instant::now();
    let mut outcome = commands::run(&cfg)?;
    if cfg.timings {
        outcome
            .diagnostics
            .insert("elapsed_seconds".into(), started.elapsed().as_secs_f64().into());
    }
    let bytes = match cfg.output.format {
        Format::Json => report::to_json(&Report {
            schema_version: report_schema_version(),
            command: cfg.command.as_str(),
            resolved_config: serde_json::to_value(&cfg).expect("config serialises"),
            results: outcome.results,
            diagnostics: Value::Object(outcome.diagnostics),
            warnings: outcome.warnings.clone(),
        })?,
        Format::Csv => outcome
            .table
            .ok_or_else(|| CliError::Validation("this command has no tabular output".into()))?
            .to_csv()?,
    };
    report::write_atomic(&path, &bytes)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    Ok(format!("{} [{}]", outcome.summary, path.display()))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
