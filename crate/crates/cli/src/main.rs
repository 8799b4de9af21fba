use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dwr_core::driver::{adaptive_loop, run_uniform, write_outputs, AdaptConfig, RunResult, StopReason};

/// Goal-oriented adaptive finite element runs.
///
/// `DWR_ALPHA` and `DWR_EPSILON` override the Dörfler fraction and the
/// stopping tolerance of the configuration file. `RUST_LOG` sets the log level.
#[derive(Parser)]
#[command(name = "dwr-adapt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adaptive refinement driven by the DWR estimator.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// The same pipeline on uniformly refined meshes.
    Uniform {
        config: PathBuf,
        /// Number of meshes, the initial one included.
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: &Cli) -> dwr_core::Result<(RunResult, PathBuf)> {
    let (path, out) = match &cli.command {
        Command::Run { config, out } | Command::Uniform { config, out, .. } => (config, out),
    };
    let mut cfg = AdaptConfig::from_file(path)?;
    cfg.apply_env()?;
    let mesh = cfg.build_mesh()?;
    let result = match cli.command {
        Command::Run { .. } => adaptive_loop(&cfg, mesh)?,
        Command::Uniform { levels, .. } => run_uniform(&cfg, mesh, levels)?,
    };
    write_outputs(&result, out)?;
    Ok((result, out.clone()))
}

fn summarize(result: &RunResult, out: &Path) {
    if let Some(last) = result.rows.last() {
        println!(
            "{} iterations, {} cells, {} dofs, J = {:.10e}, eta = {:.4e}",
            result.rows.len(),
            last.cells,
            last.dofs,
            last.j_value,
            last.eta_global
        );
        if let Some(e) = last.relative_error {
            println!("relative error {:.4}%", 100.0 * e);
        }
    }
    if let Some(m) = result.model_error {
        println!("model error {:.4}%", 100.0 * m);
    }
    match &result.stop {
        StopReason::Converged => println!("converged"),
        StopReason::MaxIterations => println!("stopped at max_iterations"),
        StopReason::Completed => println!("completed"),
        StopReason::Failed(msg) => eprintln!("error: {msg}"),
    }
    println!("results in {}", out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((result, out)) => {
            summarize(&result, &out);
            ExitCode::from(result.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
