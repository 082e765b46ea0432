use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use skmarg_core::corpus::Corpus;
use skmarg_core::marginal::{config_to_kv, decode};
use skmarg_core::scorer::{ScorerParams, ScorerTables};

use crate::files::{
    format_hyps, format_timing, read_text, write_text, Hypothesis, CONFIG_ECHO, HYPS, TIMING,
};
use crate::options::ConfigFlags;
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Parameters written by `train` or `gen --oracle_params`.
    #[arg(long)]
    pub params: PathBuf,
    /// Run directory; hyps.tsv and timing.tsv go here.
    #[arg(long)]
    pub run: PathBuf,
    /// Skip the first N utterances (e.g. the training split).
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

pub fn run(args: DecodeArgs) -> CmdResult {
    let cfg = args.flags.resolve()?;
    let params = ScorerParams::from_text(&read_text(&args.params).map_err(Failure::runtime)?)
        .with_context(|| format!("parsing {}", args.params.display()))
        .map_err(Failure::runtime)?;
    let corpus = Corpus::read(&args.corpus).map_err(Failure::runtime)?;
    if params.num_phonemes() != corpus.phonemes.len()
        || params.num_graphemes() != corpus.graphemes.len()
    {
        return Err(Failure::runtime(anyhow::anyhow!(
            "parameters are {}x{} but the corpus has {} phonemes and {} graphemes",
            params.num_phonemes(),
            params.num_graphemes(),
            corpus.phonemes.len(),
            corpus.graphemes.len()
        )));
    }
    let tables = ScorerTables::new(&params);
    let entries = corpus.entries.get(args.skip..).unwrap_or(&[]);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sgd.workers)
        .build()
        .map_err(Failure::runtime)?;
    let results: Vec<anyhow::Result<(Hypothesis, f64)>> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let t0 = Instant::now();
                let d = decode(&e.lattice, &corpus.phonemes, &tables, &cfg.marginal)
                    .with_context(|| format!("decoding {}", e.id))?;
                let wall = t0.elapsed().as_secs_f64();
                Ok((
                    Hypothesis {
                        id: e.id.clone(),
                        y: d.y,
                        logprob: d.logprob,
                    },
                    wall,
                ))
            })
            .collect()
    });
    let mut hyps = Vec::with_capacity(results.len());
    let mut timing = Vec::with_capacity(results.len());
    for (r, e) in results.into_iter().zip(entries) {
        let (h, wall) = r.map_err(Failure::runtime)?;
        timing.push((h.id.clone(), wall, e.lattice.duration_seconds()));
        hyps.push(h);
    }

    let echo = format!(
        "{}seed={}\ncorpus={}\nparams={}\nskip={}\n",
        config_to_kv(&cfg.marginal, &cfg.sgd),
        cfg.seed,
        args.corpus.display(),
        args.params.display(),
        args.skip
    );
    write_text(&args.run.join(CONFIG_ECHO), &echo).map_err(Failure::runtime)?;
    write_text(&args.run.join(HYPS), &format_hyps(&hyps, &corpus.graphemes))
        .map_err(Failure::runtime)?;
    write_text(&args.run.join(TIMING), &format_timing(&timing)).map_err(Failure::runtime)?;
    println!(
        "decoded {} utterances with decode_K={} decode_beam={}",
        hyps.len(),
        cfg.marginal.decode_k,
        cfg.marginal.decode_beam
    );
    Ok(())
}
