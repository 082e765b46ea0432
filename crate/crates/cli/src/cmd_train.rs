use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use skmarg_core::corpus::Corpus;
use skmarg_core::marginal::{config_to_kv, smoothed_final_loss, train};

use crate::files::{write_text, CONFIG_ECHO, LOSS, PARAMS};
use crate::options::ConfigFlags;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory written by `gen`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run directory, conventionally runs/<name>.
    #[arg(long)]
    pub run: PathBuf,
    /// Train on the first N utterances only.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

pub fn run(args: TrainArgs) -> CmdResult {
    let cfg = args.flags.resolve()?;
    let corpus = Corpus::read(&args.corpus).map_err(Failure::runtime)?;
    let mut pairs = corpus.pairs();
    if let Some(n) = args.limit {
        pairs.truncate(n);
    }
    let echo = format!(
        "{}seed={}\ncorpus={}\nlimit={}\n",
        config_to_kv(&cfg.marginal, &cfg.sgd),
        cfg.seed,
        args.corpus.display(),
        args.limit
            .map_or_else(|| "-".to_string(), |n| n.to_string())
    );
    write_text(&args.run.join(CONFIG_ECHO), &echo).map_err(Failure::runtime)?;

    let outcome = train(
        &pairs,
        &corpus.phonemes,
        corpus.graphemes.len(),
        &cfg.marginal,
        &cfg.sgd,
        cfg.seed,
    )
    .with_context(|| format!("training on {}", args.corpus.display()))
    .map_err(Failure::runtime)?;

    write_text(&args.run.join(PARAMS), &outcome.params.to_text()).map_err(Failure::runtime)?;
    write_text(&args.run.join(LOSS), &outcome.loss_csv()).map_err(Failure::runtime)?;
    let last = outcome.records.last().map_or(f64::NAN, |r| r.loss);
    println!(
        "{}: {} steps on {} utterances, final loss {last:.4}, smoothed {:.4}, skipped {}",
        cfg.marginal.strategy,
        cfg.sgd.steps,
        pairs.len(),
        smoothed_final_loss(&outcome.records, 0.1).unwrap_or(f64::NAN),
        outcome.skipped
    );
    Ok(())
}
