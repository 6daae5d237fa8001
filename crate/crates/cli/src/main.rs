use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairweight_cli::runner::{read_manifest, run_experiment};
use fairweight_cli::summarize::summarize;
use fairweight_cli::table1::{reproduce_table1, Table1Config};
use fairweight_cli::toy::{toy_gmm_demo, write_svg, write_toy_csv, ToyConfig};
use fairweight_cli::{CliError, ErrorReport, ExperimentConfig, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "fairweight",
    version,
    about = "Importance-weighted fair generative modelling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a config or a previous manifest.
    Run(RunArgs),
    /// Bayes versus learned classifier cross-entropy on the three settings.
    ReproduceTable1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for table1.json and table1.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learned versus Bayes density ratios on the 1-D mixture.
    ToyGmm {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for toy_gmm.json and toy_gmm.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a biased split identical to the reference.
        #[arg(long)]
        no_bias: bool,
        /// Also write toy_gmm.svg.
        #[arg(long, requires = "out")]
        svg: bool,
    },
    /// Median and IQR tables over seeds for an experiment directory.
    Summarize { dir: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest of an earlier run to regenerate.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Unwritable {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match (&args.source.config, &args.source.manifest) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(path)) => read_manifest(path)?.config,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config {
            path: "output_dir".into(),
            message: "no output directory; pass --out or set output_dir".into(),
        })?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let manifest = run_experiment(&cfg, &out, jobs)?;
    print_json(&serde_json::json!({
        "out": out,
        "config_hash": manifest.config_hash,
        "cells": manifest.cells.len(),
        "metrics_digest": manifest.metrics_digest,
    }))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::ReproduceTable1 { seed, out } => {
            let report = reproduce_table1(&Table1Config {
                seed,
                ..Table1Config::default()
            })?;
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                fairweight::io::write_json(&dir.join("table1.json"), &report)?;
                let mut w = csv::Writer::from_path(dir.join("table1.csv"))?;
                for row in &report.rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            print_json(&report)
        }
        Command::ToyGmm {
            seed,
            out,
            no_bias,
            svg,
        } => {
            let report = toy_gmm_demo(&ToyConfig {
                seed,
                no_bias,
                ..ToyConfig::default()
            })?;
            if let Some(dir) = &out {
                ensure_dir(dir)?;
                fairweight::io::write_json(&dir.join("toy_gmm.json"), &report)?;
                write_toy_csv(&dir.join("toy_gmm.csv"), &report)?;
                if svg {
                    write_svg(&dir.join("toy_gmm.svg"), &report)?;
                }
            }
            print_json(&serde_json::json!({
                "seed": seed,
                "no_bias": no_bias,
                "grid_points": report.grid.len(),
                "median_relative_error": report.median_relative_error,
                "central_range": report.central_range,
            }))
        }
        Command::Summarize { dir } => print_json(&summarize(&dir)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}
