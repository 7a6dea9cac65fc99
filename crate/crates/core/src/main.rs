use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maplab::runner::{exit_code, run_command, Command};
use maplab::suites::Suite;

#[derive(Parser)]
#[command(name = "maplab", version, about = "MAP estimation under diagonal Gaussian priors on truncated l^p spaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Path to a JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize the Onsager-Machlup functional.
    Map(Common),
    /// Run verification suites and write a check report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suites to run (repeatable); all suites when omitted.
        #[arg(long = "suite", value_parser = |s: &str| s.parse::<Suite>())]
        suites: Vec<Suite>,
    },
    /// Build an asymptotic maximizing family and check the shell bound.
    Amf(Common),
    /// Write the two-dimensional level-set tables.
    Figure(Common),
    /// Draw prior samples and small-ball masses at the origin.
    Sample(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Map(c) => (Command::Map, c),
        Cmd::Verify { common, suites } => (Command::Verify(suites), common),
        Cmd::Amf(c) => (Command::Amf, c),
        Cmd::Figure(c) => (Command::Figure, c),
        Cmd::Sample(c) => (Command::Sample, c),
    };
    match run_command(&cmd, &common.config, common.seed, common.out.as_deref()) {
        Ok(outcome) => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
