use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};

use super::{dedup_merge, Candidate, CandidateError, CandidateSet, Strategy};
use crate::lattice::{
    apply_temperature, collapse_states, label_logprob, Alignment, EmissionLattice, LabelSeq,
    PhonemeVocab,
};
use crate::rng::RngState;

/// Per-frame categorical samplers for one lattice.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    frames: Vec<WeightedIndex<f64>>,
}

impl FrameSampler {
    pub fn new(lattice: &EmissionLattice) -> Self {
        let frames = lattice
            .rows()
            .map(|row| {
                WeightedIndex::new(row.iter().map(|x| x.exp()))
                    .expect("validated lattice rows carry positive mass")
            })
            .collect();
        Self { frames }
    }

    /// One state per frame, drawn independently, frames in order.
    pub fn sample(&self, rng: &mut RngState) -> Alignment {
        Alignment::new(self.frames.iter().map(|d| d.sample(rng)).collect())
    }
}

/// Draw a frame-level state path from the lattice's per-frame distributions.
pub fn sample_alignment(lattice: &EmissionLattice, rng: &mut RngState) -> Alignment {
    FrameSampler::new(lattice).sample(rng)
}

/// SKM candidates: `k` alignments sampled from the lattice tempered by
/// `temperature`, collapsed and merged.
///
/// Weights are exact log-probabilities on the original, untempered lattice.
/// `count` on each candidate records how many of the `k` draws produced it.
pub fn skm_sample_candidates(
    lattice: &EmissionLattice,
    vocab: &PhonemeVocab,
    k: usize,
    temperature: f64,
    rng: &mut RngState,
) -> Result<CandidateSet, CandidateError> {
    if k == 0 {
        return Err(CandidateError::ZeroK);
    }
    SkmSampler::new(lattice, vocab, temperature)?.sample(k, rng)
}

/// Tempered per-frame samplers for one lattice, built once and reused
/// whenever candidates are redrawn.
#[derive(Debug, Clone)]
pub struct SkmSampler<'a> {
    lattice: &'a EmissionLattice,
    vocab: &'a PhonemeVocab,
    tempered: FrameSampler,
}

impl<'a> SkmSampler<'a> {
    pub fn new(
        lattice: &'a EmissionLattice,
        vocab: &'a PhonemeVocab,
        temperature: f64,
    ) -> Result<Self, CandidateError> {
        lattice.check_vocab(vocab)?;
        let tempered = FrameSampler::new(&apply_temperature(lattice, temperature)?);
        Ok(Self {
            lattice,
            vocab,
            tempered,
        })
    }

    pub fn sample(&self, k: usize, rng: &mut RngState) -> Result<CandidateSet, CandidateError> {
        if k == 0 {
            return Err(CandidateError::ZeroK);
        }
        let blank = self.lattice.blank();
        let mut counts: BTreeMap<LabelSeq, u32> = BTreeMap::new();
        for _ in 0..k {
            let path = self.tempered.sample(rng);
            *counts
                .entry(collapse_states(path.states(), blank))
                .or_insert(0) += 1;
        }
        let mut raw = Vec::with_capacity(counts.len());
        for (labels, count) in counts {
            let w = label_logprob(self.lattice, &labels, self.vocab)?;
            debug_assert!(w > f64::NEG_INFINITY, "sampled path has zero probability");
            raw.push(Candidate {
                labels,
                log_weight: w.min(0.0),
                count,
            });
        }
        Ok(dedup_merge(raw, Strategy::Skm))
    }
}
