use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scalar_asym::problem::{biharmonic, ProblemSpec};
use scalar_asym::report::{run, RunOptions, Stage};
use scalar_asym::spectra::RootIndex;
use scalar_asym::{Error, Result};

/// Asymptotic integration of perturbed fourth-order linear ODEs.
#[derive(Debug, Parser)]
#[command(name = "scalar-asym", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Roots, kernels and hypothesis checks.
    Analyze(RunArgs),
    /// Also runs the Picard iteration for each root.
    Solve(RunArgs),
    /// Also synthesizes y and cross-checks it against direct integration.
    Verify(RunArgs),
    /// Full pipeline with all output files.
    Report(RunArgs),
    /// Prints the configuration of the radial biharmonic problem.
    PresetBiharmonic {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        p: f64,
        /// Runs the full report into this directory instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Problem file in TOML.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated root indices, e.g. `1,3`.
    #[arg(long, value_delimiter = ',')]
    roots: Vec<usize>,
    /// Writes every Picard iterate to `trace_i.csv`.
    #[arg(long)]
    trace: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides a solver setting, e.g. `--tol fp_tol=1e-9`.
    #[arg(long, value_name = "KEY=VALUE")]
    tol: Vec<String>,
}

fn execute(cli: Cli) -> Result<i32> {
    let (stage, args) = match cli.command {
        Command::Analyze(a) => (Stage::Analyze, a),
        Command::Solve(a) => (Stage::Solve, a),
        Command::Verify(a) => (Stage::Verify, a),
        Command::Report(a) => (Stage::Report, a),
        Command::PresetBiharmonic { n, p, out } => {
            let b = biharmonic(n, p)?;
            let spec = ProblemSpec::unperturbed(b.k);
            match out {
                None => {
                    println!("# roots {:?}", b.roots);
                    print!("{}", spec.to_toml_string());
                    return Ok(0);
                }
                Some(dir) => {
                    let report = run(&spec, Stage::Report, &RunOptions::default(), Some(&dir))?;
                    print!("{}", report.summary());
                    return Ok(report.exit_code());
                }
            }
        }
    };
    let mut spec = ProblemSpec::load(&args.config)?;
    for item in &args.tol {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::validation("tol", format!("`{item}` is not KEY=VALUE")))?;
        spec.solver.set(key.trim(), value)?;
    }
    let roots = args
        .roots
        .iter()
        .map(|&i| RootIndex::new(i))
        .collect::<Result<Vec<_>>>()?;
    let options = RunOptions {
        roots,
        trace: args.trace,
    };
    let report = run(&spec, stage, &options, args.out.as_deref())?;
    print!("{}", report.summary());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_input_error() { 2 } else { 1 })
        }
    }
}
