mod args;
mod commands;
mod error;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match &cli.command {
        Command::Train(a) => commands::train(a, cli.seed),
        Command::Neuralize(a) => commands::neuralize_cmd(a),
        Command::Explain(a) => commands::explain_cmd(a, cli.seed),
        Command::Evaluate(a) => commands::evaluate_cmd(a, cli.seed),
        Command::Ablate(a) => commands::ablate_cmd(a, cli.seed),
        Command::Surface(a) => commands::surface_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
