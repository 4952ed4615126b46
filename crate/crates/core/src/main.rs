//! Command-line front end: certify a potential, verify the induced map,
//! run flows, run the discrete double transform, and emit Riccati demo
//! data. Exit codes: 0 pass, 2 certified-fail/verify-fail, 1 error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cconvex::config::RunConfig;
use cconvex::runner;

#[derive(Parser)]
#[command(
    name = "cconvex",
    about = "Certify c-convex transport potentials on model manifolds and verify the induced optimal maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override verification.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override grid.per_dim from the config.
    #[arg(long)]
    grid: Option<usize>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured c-convexity certifier.
    Certify(CommonArgs),
    /// Build the candidate map and verify optimality on an empirical sample.
    Verify(CommonArgs),
    /// Integrate the configured Hamiltonian flow and emit the trajectory.
    Flow(CommonArgs),
    /// Run the discrete double transform on the configured grid.
    Ctransform(CommonArgs),
    /// Emit (t, S, det Γ₂) for the scalar constant-coefficient equation.
    RiccatiDemo {
        /// Constant curvature coefficient k.
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Initial scalar value S(0).
        #[arg(long, allow_hyphen_values = true)]
        s0: f64,
        /// Integration horizon in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load_config(args: &CommonArgs) -> cconvex::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.verification.seed = seed;
    }
    if let Some(grid) = args.grid {
        config.grid.per_dim = grid;
    }
    Ok(config)
}

fn run() -> cconvex::Result<(i32, String, bool)> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print and exit 0; real usage errors exit 1
            if e.use_stderr() {
                eprint!("{e}");
                return Ok((runner::EXIT_ERROR, String::new(), true));
            }
            print!("{e}");
            return Ok((runner::EXIT_PASS, String::new(), true));
        }
    };

    let (outcome, quiet) = match &cli.command {
        Command::Certify(args) => (runner::cmd_certify(&load_config(args)?, &args.out)?, args.quiet),
        Command::Verify(args) => (runner::cmd_verify(&load_config(args)?, &args.out)?, args.quiet),
        Command::Flow(args) => (runner::cmd_flow(&load_config(args)?, &args.out)?, args.quiet),
        Command::Ctransform(args) => {
            (runner::cmd_ctransform(&load_config(args)?, &args.out)?, args.quiet)
        }
        Command::RiccatiDemo { k, s0, t_end, out, quiet } => {
            (runner::cmd_riccati_demo(*k, *s0, *t_end, out)?, *quiet)
        }
    };

    let mut summary = outcome.summary;
    for artifact in &outcome.artifacts {
        summary.push_str(&format!("\nwrote {}", artifact.display()));
    }
    Ok((outcome.exit_code, summary, quiet))
}

fn main() -> ExitCode {
    match run() {
        Ok((code, summary, quiet)) => {
            if !quiet && !summary.is_empty() {
                println!("{summary}");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::EXIT_ERROR as u8)
        }
    }
}
