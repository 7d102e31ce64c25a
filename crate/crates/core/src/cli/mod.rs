//! Command-line front end: experiment configs, runs, tables and profiles.

mod config;
mod experiment;
mod report;

pub use config::{
    load_config, parse_config, BenchmarkChoice, BenchmarkKind, ConfigError, ExperimentConfig, Method, RunSettings,
};
pub use experiment::{
    aggregate, flag_failures, mean_std, run_experiment, write_results, Aggregate, ExperimentError, ReplicateResult,
    ReplicateStatus, RunResult, RESULTS_HEADER,
};
pub use report::{
    axis_names, emit_profile, emit_table, parse_slice, ReportError, Slice, TableLayout, TableReport, TABLE_HEADER,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::network::read_checkpoint;
use crate::problems::{ac_reference_oracle, write_reference_grid, AcOracleSettings};

/// Output directories in configs resolve against this variable when set.
pub const OUTPUT_ROOT_ENV: &str = "PTPINN_OUTPUT_ROOT";

/// Exit code when more replicates failed than the config allows.
pub const EXIT_TOO_MANY_FAILURES: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ptpinn", version, about = "Pre-trained PINN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the replicates described by a config file.
    Run {
        config: PathBuf,
        /// Base for relative `output.dir` values (default: $PTPINN_OUTPUT_ROOT, else the working directory).
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Collect results.csv files into a summary table.
    Table {
        /// reaction, heat2d_hf, heat1d_nl, allen_cahn or convection.
        layout: String,
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint along a slice such as `x=1,y=1`.
    Profile {
        checkpoint: PathBuf,
        config: PathBuf,
        slice: String,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve Allen-Cahn with the spectral oracle and write the reference grid.
    AcReference {
        out: PathBuf,
        /// Grid points in x (a power of two, at least 256).
        #[arg(long, default_value_t = AcOracleSettings::DEFAULT_NX)]
        nx: usize,
        /// Grid points in t, including t = 0.
        #[arg(long, default_value_t = AcOracleSettings::DEFAULT_NT)]
        nt: usize,
        /// Upper bound on the integrator step.
        #[arg(long, default_value_t = 1e-5)]
        max_dt: f64,
    },
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, BoxError> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(
                File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
            ))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32, BoxError> {
    match cli.command {
        Command::Run { config, output_root } => {
            let cfg = load_config(&config)?;
            let root = output_root.or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from));
            let result = run_experiment(&cfg, root.as_deref())?;
            let failures = result.failures();
            match &result.aggregate {
                Some(a) => println!(
                    "{} {}: {}/{} replicates ok, l2_rel {:.2e} ± {:.2e}, results in {}",
                    result.benchmark,
                    result.label,
                    a.count,
                    result.replicates.len(),
                    a.mean.l2_rel,
                    a.std.l2_rel,
                    result.output_dir.display()
                ),
                None => println!(
                    "{} {}: no replicate succeeded, results in {}",
                    result.benchmark,
                    result.label,
                    result.output_dir.display()
                ),
            }
            if failures > cfg.run.max_failures {
                eprintln!(
                    "{failures} replicate(s) failed, more than the allowed {}",
                    cfg.run.max_failures
                );
                return Ok(EXIT_TOO_MANY_FAILURES);
            }
            Ok(0)
        }
        Command::Table { layout, results, out } => {
            let layout = TableLayout::named(&layout)?;
            let paths: Vec<&Path> = results.iter().map(PathBuf::as_path).collect();
            let report = emit_table(&paths, &layout, writer(out.as_deref())?)?;
            if !report.missing.is_empty() {
                eprintln!("missing rows: {}", report.missing.join(", "));
            }
            Ok(0)
        }
        Command::Profile {
            checkpoint,
            config,
            slice,
            points,
            out,
        } => {
            let cfg = load_config(&config)?;
            let problem = cfg.benchmark.build()?;
            let file = File::open(&checkpoint).map_err(|e| format!("{}: {e}", checkpoint.display()))?;
            let params = read_checkpoint(std::io::BufReader::new(file))?;
            if params.spec().input_dim() != problem.spatial_dim() + 1 {
                return Err(format!(
                    "checkpoint takes {} inputs but {} has {}",
                    params.spec().input_dim(),
                    problem.name(),
                    problem.spatial_dim() + 1
                )
                .into());
            }
            let slice = parse_slice(&problem, &slice)?;
            emit_profile(&params, &problem, &slice, points, writer(out.as_deref())?)?;
            Ok(0)
        }
        Command::AcReference { nx, nt, max_dt, out } => {
            let report = ac_reference_oracle(AcOracleSettings { nx, nt, max_dt })?;
            write_reference_grid(&report.grid, writer(Some(&out))?)?;
            eprintln!(
                "wrote {}x{} grid to {} (dt {:e}, self-convergence {:e})",
                nx,
                nt,
                out.display(),
                report.dt,
                report.self_convergence
            );
            Ok(0)
        }
    }
}
