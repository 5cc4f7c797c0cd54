use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use ten_cli::commands::{eval, generate, inspect, predict, train};
use ten_cli::error::CliError;

/// Dialogue-state tracking with turn-label and state-distribution models.
#[derive(Debug, Parser)]
#[command(name = "ten", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus and split it into train/dev/test.
    Generate(generate::GenerateArgs),
    /// Train one model variant and write its best checkpoint.
    Train(train::TrainArgs),
    /// Score a checkpoint against a gold corpus.
    Eval(eval::EvalArgs),
    /// Annotate a corpus with a checkpoint's predicted states.
    Predict(predict::PredictArgs),
    /// Print one dialogue's distributions and state readings.
    Inspect(inspect::InspectArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful output, not errors;
            // everything else is a bad invocation.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => CliError::EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Inspect(args) => inspect::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
