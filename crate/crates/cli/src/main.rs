//! `lagquant <experiment> --config <file.json> --out <file.csv> [--jobs N] [--seed S]`
//!
//! Writes the CSV table to `--out` and a JSON summary to stdout. Any error,
//! including a failed Hermiticity, norm-bound or phase check, exits nonzero
//! with a JSON failure record on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lagquant::experiment::{run, ExperimentConfig, ExperimentKind, FunctionSource, OmegaSpec, RunOptions};
use lagquant::{Error, Result};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "lagquant", version, about = "Convergence scans for lattice quantization operators")]
struct Args {
    /// norm-convergence, commutator-rate, star-residual, bt-compare, abelian-compare or phase-bound
    experiment: ExperimentKind,
    /// JSON experiment config (schema 1)
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; defaults to the config's `output`
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// sampling seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// comma-separated levels replacing the config's k_list
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<u32>>,
    /// function file replacing the config's `f`
    #[arg(long)]
    f: Option<PathBuf>,
    /// function file replacing the config's `g`
    #[arg(long)]
    g: Option<PathBuf>,
    /// Siegel form as JSON, e.g. '{"p":[[0.5]],"q":[[1.0]]}'
    #[arg(long)]
    omega: Option<String>,
}

fn execute(args: &Args) -> Result<serde_json::Value> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    match cfg.experiment {
        Some(k) if k != args.experiment => {
            return Err(Error::Config(format!(
                "config describes {k} but {} was requested",
                args.experiment
            )))
        }
        _ => cfg.experiment = Some(args.experiment),
    }
    if let Some(ks) = &args.k_list {
        cfg.k_list = ks.clone();
    }
    if let Some(f) = &args.f {
        cfg.f = Some(FunctionSource::Path(f.clone()));
    }
    if let Some(g) = &args.g {
        cfg.g = Some(FunctionSource::Path(g.clone()));
    }
    if let Some(o) = &args.omega {
        cfg.omega = Some(serde_json::from_str::<OmegaSpec>(o)?);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))?;
    let opts = RunOptions {
        jobs: args.jobs as usize,
        seed: args.seed,
    };
    let record = run(&cfg, &opts)?;
    record.write_csv(&out)?;
    Ok(json!({
        "status": "ok",
        "experiment": args.experiment,
        "out": out,
        "rows": record.rows.len(),
        "slope": record.slope(),
        "r_squared": record.r_squared(),
        "phase": record.phase,
    }))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut record = json!({
                "status": "failed",
                "experiment": args.experiment,
                "kind": e.kind(),
                "message": e.to_string(),
            });
            if let Error::CheckFailed { check, .. } = &e {
                record["check"] = json!(check);
            }
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
