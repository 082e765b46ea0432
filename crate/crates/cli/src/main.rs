//! `skmarg`: synthesize corpora, train the transducer under TKM /
//! randomized TKM / SKM, decode, and score.
//!
//! Exit status: 0 on success, 2 for invalid configuration or usage,
//! 1 for anything that goes wrong while running.

mod cmd_decode;
mod cmd_eval;
mod cmd_gen;
mod cmd_train;
mod files;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "skmarg",
    version,
    about = "Marginalized phoneme-to-grapheme training and decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus directory.
    Gen(cmd_gen::GenArgs),
    /// Train transducer parameters on a corpus.
    Train(cmd_train::TrainArgs),
    /// Decode every utterance of a corpus with trained parameters.
    Decode(cmd_decode::DecodeArgs),
    /// Score hypotheses against a corpus's references.
    Eval(cmd_eval::EvalArgs),
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure::Config(e.into())
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen::run(a),
        Command::Train(a) => cmd_train::run(a),
        Command::Decode(a) => cmd_decode::run(a),
        Command::Eval(a) => cmd_eval::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
