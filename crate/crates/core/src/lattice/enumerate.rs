use std::collections::BTreeMap;

use super::{collapse_states, EmissionLattice, LabelSeq, LatticeError, PhonemeVocab};

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Exact label-sequence distribution by brute force over all
/// `(V+1)^num_frames` alignments. Test oracle; exponential in frames.
pub fn enumerate_label_probs(
    lattice: &EmissionLattice,
    vocab: &PhonemeVocab,
    budget: u64,
) -> Result<BTreeMap<LabelSeq, f64>, LatticeError> {
    lattice.check_vocab(vocab)?;
    let states = lattice.num_states();
    let frames = lattice.num_frames();
    let alignments = (states as f64).powi(frames as i32);
    if alignments > budget as f64 {
        return Err(LatticeError::BudgetExceeded { alignments, budget });
    }

    let probs: Vec<Vec<f64>> = lattice
        .rows()
        .map(|r| r.iter().map(|x| x.exp()).collect())
        .collect();
    let mut out = BTreeMap::new();
    let mut path = vec![0usize; frames];
    loop {
        let p: f64 = path.iter().enumerate().map(|(t, &s)| probs[t][s]).product();
        if p > 0.0 {
            *out.entry(collapse_states(&path, vocab.blank()))
                .or_insert(0.0) += p;
        }
        // odometer increment, last frame fastest
        let mut t = frames;
        loop {
            if t == 0 {
                return Ok(out);
            }
            t -= 1;
            path[t] += 1;
            if path[t] < states {
                break;
            }
            path[t] = 0;
        }
    }
}
