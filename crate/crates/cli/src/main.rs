use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xcelram_cli::commands::{self, GenArgs, RunArgs};
use xcelram_cli::{Failure, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "xcelram", version, about = "Compute-in-SRAM BNN simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run inference and write per-layer energy/latency reports
    Run(RunArgs),
    /// Repeat `run` over values of one parameter, writing a CSV
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// sigma | sections
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Oracle-equivalence and ADC round-trip checks
    Selftest,
    /// Random weights plus a teacher-labelled dataset for a network
    GenToyData(GenArgs),
}

fn dispatch(cmd: Cmd) -> Result<String, Failure> {
    match cmd {
        Cmd::Run(args) => {
            let c = commands::resolve_config(&args)?;
            Ok(commands::cmd_run(&c, args.explain)?.stdout)
        }
        Cmd::Sweep { run, param, values } => {
            let c = commands::resolve_config(&run)?;
            commands::cmd_sweep(&c, &param, &values)
        }
        Cmd::Selftest => commands::cmd_selftest(),
        Cmd::GenToyData(args) => commands::cmd_gen_toy_data(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            e.print().ok();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.cmd) {
        Ok(out) => {
            std::io::stdout().write_all(out.as_bytes()).ok();
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Failure::Selftest(s) = &f {
                std::io::stdout().write_all(s.as_bytes()).ok();
            }
            eprintln!("xcelram: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
