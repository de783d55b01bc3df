//! Command-line experiment runner.
//!
//! ```text
//! exdys [--config PATH] [--set key=value]... [--sweep key=v1,v2,...]
//!       [--out DIR] [--seed N] [--uncertified]
//! ```
//!
//! Exit codes: 0 success, 2 configuration or setup error, 3 solver or output error.

pub mod config;
pub mod experiment;
pub mod trace;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{ConfigError, ExperimentConfig, Model, Task};
pub use experiment::{prepare, report_json, run, run_experiment, run_sweep, CliError, Prepared, RunResult, SweepEntry};
pub use trace::{format_trace, parse_trace, write_trace_csv, TRACE_HEADER};

#[derive(Debug, Parser)]
#[command(name = "exdys", version, about = "Extrapolated Davis-Yin splitting experiments")]
pub struct Args {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Run one experiment per value, e.g. `alpha_fraction=0,0.25,0.5,0.75,0.99`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    pub sweep: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run even if the step-size conditions are not met.
    #[arg(long)]
    pub uncertified: bool,
}

fn load_config(args: &Args) -> Result<ExperimentConfig, CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError {
            origin: p.display().to_string(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(&text, &args.set)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.uncertified |= args.uncertified;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &Args) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    match &args.sweep {
        Some(spec) => {
            let (key, values) = spec.split_once('=').ok_or_else(|| ConfigError {
                origin: "--sweep".into(),
                message: format!("expected key=v1,v2,..., found {spec:?}"),
            })?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            let entries = run_sweep(&cfg, key.trim(), &values, &args.out)?;
            for e in entries {
                println!(
                    "{key}={}: {} iterations ({:?}), PSNR {:.2} dB, theta monotone: {}",
                    e.value, e.iterations, e.stop_reason, e.psnr_final, e.monotone_theta
                );
            }
        }
        None => {
            let r = run_experiment(&cfg, &args.out)?;
            println!(
                "{}: {} iterations ({:?}), PSNR {:.2} dB (observation {:.2} dB), theta monotone: {}",
                cfg.model.name(),
                r.output.state.k,
                r.output.stop_reason,
                r.psnr_final,
                r.psnr_degraded,
                r.energy.monotone_theta
            );
        }
    }
    Ok(())
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
