use super::{EmissionLattice, LabelSeq, LatticeError, PhonemeVocab};
use crate::logmath::log_add;

/// `log p(h | x)`: the log-sum over every alignment that collapses to `h`.
///
/// Standard CTC forward recursion over the blank-augmented sequence
/// `[-, h1, -, h2, -, ..., hL, -]`. Returns `-inf` when `h` cannot fit in the
/// lattice's frames.
pub fn label_logprob(
    lattice: &EmissionLattice,
    h: &LabelSeq,
    vocab: &PhonemeVocab,
) -> Result<f64, LatticeError> {
    lattice.check_vocab(vocab)?;
    h.check(vocab)?;
    Ok(forward(lattice, h.as_slice()))
}

pub(crate) fn forward(lattice: &EmissionLattice, labels: &[usize]) -> f64 {
    let frames = lattice.num_frames();
    if LabelSeq::new(labels.to_vec()).min_frames() > frames {
        return f64::NEG_INFINITY;
    }
    let blank = lattice.blank();
    let ext: Vec<usize> = std::iter::once(blank)
        .chain(labels.iter().flat_map(|&l| [l, blank]))
        .collect();
    let s_len = ext.len();

    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = lattice.get(0, blank);
    if s_len > 1 {
        alpha[1] = lattice.get(0, ext[1]);
    }
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..frames {
        let row = lattice.row(t);
        // states before `first` cannot still reach the end in time
        let remaining = frames - t;
        let first = s_len.saturating_sub(2 * remaining);
        for s in 0..s_len {
            if s < first.saturating_sub(1) {
                next[s] = f64::NEG_INFINITY;
                continue;
            }
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_add(acc, alpha[s - 1]);
            }
            if s >= 2 && ext[s] != blank && ext[s] != ext[s - 2] {
                acc = log_add(acc, alpha[s - 2]);
            }
            next[s] = if acc == f64::NEG_INFINITY {
                acc
            } else {
                acc + row[ext[s]]
            };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    if s_len == 1 {
        alpha[0]
    } else {
        log_add(alpha[s_len - 1], alpha[s_len - 2])
    }
}
