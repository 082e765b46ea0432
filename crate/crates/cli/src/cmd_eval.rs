use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use skmarg_core::corpus::Corpus;
use skmarg_core::eval::{corpus_wer, edit_distance, rtf_seconds, significance};

use crate::files::{parse_hyps, parse_timing, read_text, write_text, Hypothesis, REPORT};
use crate::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Hypotheses written by `decode`.
    #[arg(long)]
    pub hyps: PathBuf,
    /// A second system's hypotheses over the same utterances; adds a
    /// paired bootstrap p-value.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Timing file written by `decode`; adds the real-time factor.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Run directory for report.tsv; the report is only printed if omitted.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: EvalArgs) -> CmdResult {
    evaluate(&args).map_err(Failure::runtime)
}

fn evaluate(args: &EvalArgs) -> Result<()> {
    let corpus = Corpus::read(&args.corpus)?;
    let refs: HashMap<&str, &[usize]> = corpus
        .entries
        .iter()
        .map(|e| (e.id.as_str(), e.reference.as_slice()))
        .collect();
    let load = |p: &PathBuf| -> Result<Vec<Hypothesis>> {
        parse_hyps(&read_text(p)?, &corpus.graphemes)
            .with_context(|| format!("parsing {}", p.display()))
    };
    let hyps = load(&args.hyps)?;
    let pairs = aligned(&hyps, &refs)?;
    let mut report = corpus_wer(&pairs)?;

    if let Some(other) = &args.compare {
        let b = load(other)?;
        let ids = |h: &[Hypothesis]| h.iter().map(|x| x.id.clone()).collect::<Vec<_>>();
        if ids(&hyps) != ids(&b) {
            bail!(
                "{} and {} cover different utterances",
                args.hyps.display(),
                other.display()
            );
        }
        let errors = |pairs: &[(&[usize], &[usize])]| -> Vec<usize> {
            pairs
                .iter()
                .map(|(r, h)| edit_distance(r, h).distance)
                .collect()
        };
        let pairs_b = aligned(&b, &refs)?;
        report.p_value = Some(significance(&errors(&pairs), &errors(&pairs_b), args.seed)?);
    }

    if let Some(t) = &args.timing {
        let rows = parse_timing(&read_text(t)?)?;
        let wanted: HashMap<&str, ()> = hyps.iter().map(|h| (h.id.as_str(), ())).collect();
        let (mut wall, mut audio) = (0.0, 0.0);
        for (id, w, a) in &rows {
            if !wanted.contains_key(id.as_str()) {
                bail!("timing row for {id} has no hypothesis");
            }
            wall += w;
            audio += a;
        }
        if rows.len() != hyps.len() {
            bail!(
                "timing covers {} utterances, hypotheses {}",
                rows.len(),
                hyps.len()
            );
        }
        report.rtf = Some(rtf_seconds(wall, audio)?);
    }

    println!("{}", report.summary());
    if let Some(run) = &args.run {
        write_text(&run.join(REPORT), &report.to_tsv())?;
    }
    Ok(())
}

fn aligned<'a>(
    hyps: &'a [Hypothesis],
    refs: &HashMap<&str, &'a [usize]>,
) -> Result<Vec<(&'a [usize], &'a [usize])>> {
    let mut seen = HashMap::new();
    hyps.iter()
        .map(|h| {
            if seen.insert(h.id.as_str(), ()).is_some() {
                bail!("utterance {} appears twice", h.id);
            }
            let r = refs
                .get(h.id.as_str())
                .ok_or_else(|| anyhow!("utterance {} is not in the corpus", h.id))?;
            Ok((*r, h.y.as_slice()))
        })
        .collect()
}
