use std::collections::HashMap;

use super::{sort_candidates, Candidate, CandidateError, CandidateSet, Strategy};
use crate::lattice::{label_logprob, EmissionLattice, LabelSeq, PhonemeVocab};
use crate::logmath::log_add;

#[derive(Debug, Clone, Copy)]
struct PrefixScore {
    /// ends in blank
    blank: f64,
    /// ends in the prefix's last label
    label: f64,
}

impl PrefixScore {
    const ZERO: Self = Self {
        blank: f64::NEG_INFINITY,
        label: f64::NEG_INFINITY,
    };

    fn total(self) -> f64 {
        log_add(self.blank, self.label)
    }
}

/// CTC prefix beam search returning up to `k` sequences.
///
/// Alignment prefixes are merged by their collapsed label prefix. Survivors
/// are re-scored exactly with [`label_logprob`] and sorted by that score.
///
/// The beam keeps `k * (frames + 1)` prefixes. Every live prefix is a prefix
/// of some sequence with nonzero probability, so once `k` covers that support
/// nothing is pruned and the result is the exact distribution.
pub fn prefix_beam_search(
    lattice: &EmissionLattice,
    vocab: &PhonemeVocab,
    k: usize,
) -> Result<CandidateSet, CandidateError> {
    let width = k.saturating_mul(lattice.num_frames() + 1);
    prefix_beam_search_with_width(lattice, vocab, k, width)
}

/// As [`prefix_beam_search`], with a beam `width` independent of the number
/// `n_best` of returned sequences. `width` is raised to `n_best` if smaller.
pub fn prefix_beam_search_with_width(
    lattice: &EmissionLattice,
    vocab: &PhonemeVocab,
    n_best: usize,
    width: usize,
) -> Result<CandidateSet, CandidateError> {
    if n_best == 0 {
        return Err(CandidateError::ZeroK);
    }
    lattice.check_vocab(vocab)?;
    let width = width.max(n_best);
    let blank = lattice.blank();

    let mut beam: Vec<(Vec<usize>, PrefixScore)> = vec![(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            label: f64::NEG_INFINITY,
        },
    )];

    for row in lattice.rows() {
        let mut next: HashMap<Vec<usize>, PrefixScore> = HashMap::with_capacity(beam.len() * 4);
        for (prefix, score) in &beam {
            let total = score.total();
            let p_blank = row[blank];
            if p_blank > f64::NEG_INFINITY {
                let e = next.entry(prefix.clone()).or_insert(PrefixScore::ZERO);
                e.blank = log_add(e.blank, total + p_blank);
            }
            let last = prefix.last().copied();
            for (c, &p) in row.iter().enumerate().take(blank) {
                if p == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(c);
                if Some(c) == last {
                    // a repeat without a blank in between stays on the prefix
                    let e = next.entry(prefix.clone()).or_insert(PrefixScore::ZERO);
                    e.label = log_add(e.label, score.label + p);
                    let e = next.entry(extended).or_insert(PrefixScore::ZERO);
                    e.label = log_add(e.label, score.blank + p);
                } else {
                    let e = next.entry(extended).or_insert(PrefixScore::ZERO);
                    e.label = log_add(e.label, total + p);
                }
            }
        }
        let mut ranked: Vec<(Vec<usize>, PrefixScore)> = next
            .into_iter()
            .filter(|(_, s)| s.total() > f64::NEG_INFINITY)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total()
                .total_cmp(&a.1.total())
                .then_with(|| a.0.cmp(&b.0))
        });
        ranked.truncate(width);
        beam = ranked;
    }

    let mut out = Vec::with_capacity(n_best);
    for (prefix, _) in beam.into_iter().take(n_best) {
        let labels = LabelSeq::new(prefix);
        let w = label_logprob(lattice, &labels, vocab)?;
        if w > f64::NEG_INFINITY {
            out.push(Candidate::new(labels, w.min(0.0)));
        }
    }
    sort_candidates(&mut out);
    Ok(CandidateSet {
        candidates: out,
        strategy: Strategy::Tkm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_frames() {
        let l = EmissionLattice::from_probs(&[vec![0.5, 0.5], vec![0.5, 0.5]], 10.0).unwrap();
        let v = PhonemeVocab::new(["a"]).unwrap();
        let set = prefix_beam_search(&l, &v, 2).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.candidates()[0].labels.as_slice(), &[0]);
        assert!((set.candidates()[0].log_weight - 0.75f64.ln()).abs() < 1e-12);
        assert!(set.candidates()[1].labels.is_empty());
        assert!((set.candidates()[1].log_weight - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn certain_single_frame() {
        let l = EmissionLattice::from_probs(&[vec![1.0, 0.0]], 10.0).unwrap();
        let v = PhonemeVocab::new(["a"]).unwrap();
        for k in [1, 3, 8] {
            let set = prefix_beam_search(&l, &v, k).unwrap();
            assert_eq!(set.len(), 1);
            assert_eq!(set.candidates()[0].labels.as_slice(), &[0]);
            assert_eq!(set.candidates()[0].log_weight, 0.0);
        }
    }

    #[test]
    fn short_prefix_outranked_midway_survives() {
        // after frame 0 the prefix [a] ranks last of three, yet [a, b] is one
        // of only two sequences with nonzero probability
        let l = EmissionLattice::from_probs(&[vec![0.14, 0.49, 0.37], vec![0.0, 1.0, 0.0]], 10.0)
            .unwrap();
        let v = PhonemeVocab::new(["a", "b"]).unwrap();
        let set = prefix_beam_search(&l, &v, 2).unwrap();
        let seqs: Vec<&[usize]> = set.iter().map(|c| c.labels.as_slice()).collect();
        assert_eq!(seqs, vec![&[1][..], &[0, 1][..]]);
        let narrow = prefix_beam_search_with_width(&l, &v, 2, 2).unwrap();
        assert_eq!(narrow.len(), 1);
    }

    #[test]
    fn zero_k_rejected() {
        let l = EmissionLattice::from_probs(&[vec![1.0, 0.0]], 10.0).unwrap();
        let v = PhonemeVocab::new(["a"]).unwrap();
        assert_eq!(
            prefix_beam_search(&l, &v, 0).unwrap_err(),
            CandidateError::ZeroK
        );
    }
}
