use std::collections::BTreeSet;

use super::{marginal_logprob, MarginalConfig, MarginalError};
use crate::candidates::{prefix_beam_search, CandidateSet};
use crate::lattice::{EmissionLattice, PhonemeVocab};
use crate::scorer::{decode_with_tables, GraphemeSeq, ScorerTables};

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub y: GraphemeSeq,
    pub logprob: f64,
}

/// Longest grapheme string considered for a candidate of `h_len` phonemes.
pub fn decode_max_len(h_len: usize) -> usize {
    2 * h_len + 2
}

/// Marginal decoding over the top `decode_K` beam candidates, whatever
/// strategy the scorer was trained with.
pub fn decode(
    lattice: &EmissionLattice,
    vocab: &PhonemeVocab,
    tables: &ScorerTables,
    config: &MarginalConfig,
) -> Result<Decoded, MarginalError> {
    let cands = prefix_beam_search(lattice, vocab, config.decode_k)?;
    decode_candidates(&cands, tables, config.decode_beam)
}

/// Argmax of the marginal over the union of per-candidate `decode_y` beams.
pub fn decode_candidates(
    cands: &CandidateSet,
    tables: &ScorerTables,
    decode_beam: usize,
) -> Result<Decoded, MarginalError> {
    let mut pool = BTreeSet::new();
    for c in cands.iter() {
        let max_len = decode_max_len(c.labels.len());
        for (y, _) in decode_with_tables(tables, &c.labels, decode_beam, max_len) {
            pool.insert(y);
        }
    }
    let mut best: Option<Decoded> = None;
    for y in pool {
        let logprob = marginal_logprob(cands, tables, &y)?;
        let better = match &best {
            None => true,
            Some(b) => {
                logprob > b.logprob
                    || (logprob == b.logprob
                        && (y.len(), y.as_slice()) < (b.y.len(), b.y.as_slice()))
            }
        };
        if better {
            best = Some(Decoded { y, logprob });
        }
    }
    best.ok_or(MarginalError::EmptyPool)
}
