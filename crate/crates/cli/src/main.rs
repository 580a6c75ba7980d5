mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::SolverFailure;
use config::{parse_grid, parse_lambda_path, parse_strategy, Overrides, RunConfig};
use liouville_core::solvers::{Grid, Strategy};

/// Singular mean-field Liouville equation on triangulated surfaces.
///
/// Settings come from built-in defaults, then the `--config` JSON document,
/// then the flags below; later sources win.
#[derive(Debug, Parser)]
#[command(name = "liouville", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Continuation path `a:b`.
    #[arg(long, global = true, value_parser = parse_lambda_path, allow_hyphen_values = true)]
    lambda_path: Option<[f64; 2]>,
    /// Number of bubble atoms for minmax.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Bubble grid `positions:scale,scale,...[@label]`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<Grid>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// min, minmax or continue.
    #[arg(long, global = true, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// χ(M,α), τ, classification, critical values and theorem hypotheses.
    Classify,
    /// Critical values up to `lambda_max` (default 2λ).
    Spectrum,
    /// Green's functions at the cones or at `pole`.
    Green,
    /// Solve at λ with the configured strategy.
    Solve,
    /// Continue a solution along `lambda_path`.
    Continue,
    /// Bubble energy slopes.
    Bubble,
    /// Continuation followed by the mass spectrum of the last state.
    Blowup,
    /// Mesh and operator checks, a stored field, and the local inequality probe.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Spectrum => "spectrum",
            Command::Green => "green",
            Command::Solve => "solve",
            Command::Continue => "continue",
            Command::Bubble => "bubble",
            Command::Blowup => "blowup",
            Command::Check => "check",
        }
    }
}

fn report(kind: &str, code: u8, message: String, detail: serde_json::Value) -> ExitCode {
    let body = json!({ "error": kind, "exit_code": code, "message": message, "detail": detail });
    eprintln!("{}", serde_json::to_string(&body).expect("plain JSON"));
    ExitCode::from(code)
}

fn threads() -> anyhow::Result<()> {
    if let Ok(s) = std::env::var("LIOUVILLE_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("LIOUVILLE_THREADS must be a positive integer, got '{s}'"))?;
        if n == 0 {
            anyhow::bail!("LIOUVILLE_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    threads()?;
    let mut config = match &cli.config {
        Some(p) => {
            let mut c = RunConfig::load(p)?;
            c.rebase(p.parent().unwrap_or(std::path::Path::new(".")));
            c
        }
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        lambda: cli.lambda,
        lambda_path: cli.lambda_path,
        k: cli.k,
        grid: cli.grid.clone(),
        tol: cli.tol,
        strategy: cli.strategy,
        output: cli.output.clone(),
        seed: cli.seed,
    });
    let mut run = output::Run::new(cli.command.name(), config.output.clone(), serde_json::to_value(&config)?);
    let result = match cli.command {
        Command::Classify => commands::classify_cmd(&config, &mut run),
        Command::Spectrum => commands::spectrum_cmd(&config, &mut run),
        Command::Green => commands::green_cmd(&config, &mut run),
        Command::Solve => commands::solve_cmd(&config, &mut run),
        Command::Continue => commands::continue_cmd(&config, &mut run),
        Command::Bubble => commands::bubble_cmd(&config, &mut run),
        Command::Blowup => commands::blowup_cmd(&config, &mut run),
        Command::Check => commands::check_cmd(&config, &mut run),
    };
    // the manifest is written for solver failures too
    match result {
        Ok(()) => run.finish(),
        Err(e) if e.is::<SolverFailure>() => {
            run.finish()?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report("usage", 1, e.render().to_string().trim().to_string(), json!(null));
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(f) = e.downcast_ref::<SolverFailure>() {
                return report("solver", 2, f.message.clone(), f.detail.clone());
            }
            if let Some(liouville_core::Error::NotConverged { solver, iterations, residual }) =
                e.downcast_ref::<liouville_core::Error>()
            {
                return report(
                    "solver",
                    2,
                    format!("{e:#}"),
                    json!({ "solver": solver, "iterations": iterations, "residual": residual }),
                );
            }
            report("input", 1, format!("{e:#}"), json!(null))
        }
    }
}
