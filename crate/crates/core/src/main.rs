use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crflow_core::bubble::DEFAULT_BUBBLE_TOLERANCE;
use crflow_core::cli;
use crflow_core::selftest::SelfTestOptions;

/// Webster curvature flow on the CR sphere.
#[derive(Parser)]
#[command(name = "crflow", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario; writes trajectory.csv and summary.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Table of the bubble-expansion constants A1..A6.
    Constants {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        refine: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check the Morse hypotheses for a JSON file of critical points.
    Morse { file: PathBuf },
    /// Export the standard bubble on the quadrature grid as CSV.
    Bubble {
        /// Center as "re,im;re,im;...".
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long)]
        eps: f64,
        #[arg(long = "J", default_value_t = 8)]
        degree: usize,
        #[arg(long, default_value_t = DEFAULT_BUBBLE_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                cli::EXIT_CONFIG as u8
            } else {
                0
            });
        }
    };
    if let Err(e) = cli::configure_threads() {
        eprintln!("{e}");
        return ExitCode::from(cli::EXIT_CONFIG as u8);
    }
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = match args.command {
        Command::Run { config, out: dir } => cli::cmd_run(&config, &dir, &mut out, &mut err),
        Command::Constants { n, refine, json } => {
            cli::cmd_constants(n, refine, json.as_deref(), &mut out, &mut err)
        }
        Command::Morse { file } => cli::cmd_morse(&file, &mut out, &mut err),
        Command::Bubble {
            p,
            eps,
            degree,
            tolerance,
            out: path,
        } => cli::cmd_bubble(
            &p,
            eps,
            degree,
            tolerance,
            path.as_deref(),
            &mut out,
            &mut err,
        ),
        Command::Selftest => cli::cmd_selftest(&SelfTestOptions::default(), &mut out),
    };
    ExitCode::from(code as u8)
}
