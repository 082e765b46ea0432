//! Candidate-set TSV: a `#` header with generation settings, then one line
//! per candidate, `log_weight<TAB>space-joined phoneme symbols`.

use std::fmt::Write as _;

use super::{dedup_merge, Candidate, CandidateError, CandidateSet, Strategy};
use crate::lattice::PhonemeVocab;

/// Settings recorded in the header line. Absent values print as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateHeader {
    pub strategy: Strategy,
    pub k: usize,
    pub n: Option<usize>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

pub fn format_candidates_tsv(
    set: &CandidateSet,
    vocab: &PhonemeVocab,
    header: &CandidateHeader,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# strategy={} K={} n={} temperature={} seed={}",
        header.strategy,
        header.k,
        opt(&header.n),
        opt(&header.temperature),
        opt(&header.seed)
    );
    for c in set.iter() {
        let _ = writeln!(out, "{}\t{}", c.log_weight, vocab.render(&c.labels));
    }
    out
}

pub fn parse_candidates_tsv(
    text: &str,
    vocab: &PhonemeVocab,
) -> Result<(CandidateHeader, CandidateSet), CandidateError> {
    let err = |line: usize, msg: String| CandidateError::Parse { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
    let body = first
        .strip_prefix('#')
        .ok_or_else(|| err(1, "missing '#' header".into()))?;

    let mut strategy = None;
    let mut k = None;
    let mut header = CandidateHeader {
        strategy: Strategy::Tkm,
        k: 0,
        n: None,
        temperature: None,
        seed: None,
    };
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(1, format!("bad header field {field:?}")))?;
        let missing = value == "-";
        let bad = |e: &dyn std::fmt::Display| err(1, format!("{key}: {e}"));
        match key {
            "strategy" => strategy = Some(value.parse::<Strategy>().map_err(|e| bad(&e))?),
            "K" => k = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "n" if !missing => header.n = Some(value.parse().map_err(|e| bad(&e))?),
            "temperature" if !missing => {
                header.temperature = Some(value.parse().map_err(|e| bad(&e))?)
            }
            "seed" if !missing => header.seed = Some(value.parse().map_err(|e| bad(&e))?),
            "n" | "temperature" | "seed" => {}
            _ => return Err(err(1, format!("unknown header key {key:?}"))),
        }
    }
    header.strategy = strategy.ok_or_else(|| err(1, "header lacks strategy".into()))?;
    header.k = k.ok_or_else(|| err(1, "header lacks K".into()))?;

    let mut raw = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (w, syms) = line
            .split_once('\t')
            .ok_or_else(|| err(lineno, "expected two tab-separated fields".into()))?;
        let log_weight: f64 = w.parse().map_err(|e| err(lineno, format!("{e}")))?;
        let labels = vocab
            .parse(syms)
            .ok_or_else(|| err(lineno, format!("unknown phoneme in {syms:?}")))?;
        raw.push(Candidate::new(labels, log_weight));
    }
    Ok((header.clone(), dedup_merge(raw, header.strategy)))
}
