//! Word error rate, paired bootstrap significance and real-time factor.
//!
//! WER is kept as a fraction everywhere; only [`EvalReport::summary`]
//! shows a percentage.

use rand::Rng;
use thiserror::Error;

use crate::lattice::EmissionLattice;
use crate::rng::RngState;

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("references contain no tokens")]
    EmptyReference,
    #[error("systems cover {0} and {1} utterances")]
    LengthMismatch(usize, usize),
    #[error("audio duration is zero")]
    ZeroDuration,
    #[error("decode time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
}

/// Levenshtein distance split into error types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.distance += o.distance;
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
    }
}

/// Unit-cost edit distance from `reference` to `hyp`.
///
/// Error types come from one optimal backtrace that prefers a substitution
/// or match, then an insertion, then a deletion.
pub fn edit_distance<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            d[i * w + j] = diag.min(d[i * w + j - 1] + 1).min(d[(i - 1) * w + j] + 1);
        }
    }
    let mut c = EditCounts {
        distance: d[n * w + m],
        ..EditCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                c.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i * w + j - 1] + 1 == here {
            c.insertions += 1;
            j -= 1;
        } else {
            c.deletions += 1;
            i -= 1;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub wer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
    pub utterances: usize,
    pub rtf: Option<f64>,
    pub p_value: Option<f64>,
}

impl EvalReport {
    /// Two-column `field\tvalue` table; absent optional fields are `-`.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        format!(
            "field\tvalue\nwer\t{}\nsubstitutions\t{}\ninsertions\t{}\ndeletions\t{}\n\
             ref_tokens\t{}\nutterances\t{}\nrtf\t{}\np_value\t{}\n",
            self.wer,
            self.substitutions,
            self.insertions,
            self.deletions,
            self.ref_tokens,
            self.utterances,
            opt(self.rtf),
            opt(self.p_value)
        )
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "WER {:.2}% ({} sub, {} ins, {} del over {} tokens, {} utterances)",
            100.0 * self.wer,
            self.substitutions,
            self.insertions,
            self.deletions,
            self.ref_tokens,
            self.utterances
        );
        if let Some(r) = self.rtf {
            s.push_str(&format!("\nRTF {r:.4}"));
        }
        if let Some(p) = self.p_value {
            s.push_str(&format!("\np-value {p:.3e}"));
        }
        s
    }
}

/// Micro-averaged WER over `(reference, hypothesis)` pairs.
pub fn corpus_wer<T: PartialEq>(pairs: &[(&[T], &[T])]) -> Result<EvalReport, EvalError> {
    let mut total = EditCounts::default();
    let mut ref_tokens = 0;
    for (r, h) in pairs {
        total += edit_distance(r, h);
        ref_tokens += r.len();
    }
    if ref_tokens == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(EvalReport {
        wer: total.distance as f64 / ref_tokens as f64,
        substitutions: total.substitutions,
        insertions: total.insertions,
        deletions: total.deletions,
        ref_tokens,
        utterances: pairs.len(),
        rtf: None,
        p_value: None,
    })
}

/// Two-sided paired bootstrap p-value for a non-zero mean difference of
/// per-utterance error counts.
///
/// Differences are centred on their mean to simulate the null; the p-value
/// is `(1 + #{|resampled mean| >= |observed mean|}) / (1 + B)`. Resample `r`
/// draws from its own stream of `seed`, so the result does not depend on
/// evaluation order.
pub fn significance(errors_a: &[usize], errors_b: &[usize], seed: u64) -> Result<f64, EvalError> {
    if errors_a.len() != errors_b.len() {
        return Err(EvalError::LengthMismatch(errors_a.len(), errors_b.len()));
    }
    let diffs: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(&a, &b)| b as f64 - a as f64)
        .collect();
    Ok(bootstrap_p_value(&diffs, BOOTSTRAP_RESAMPLES, seed))
}

pub fn bootstrap_p_value(diffs: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = diffs.len();
    if n == 0 {
        return 1.0;
    }
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = diffs.iter().map(|d| d - observed).collect();
    let extreme = (0..resamples)
        .filter(|&r| {
            let mut rng = RngState::stream(seed, r as u64);
            let mean = (0..n).map(|_| centred[rng.gen_range(0..n)]).sum::<f64>() / n as f64;
            mean.abs() >= observed.abs()
        })
        .count();
    (extreme + 1) as f64 / (resamples + 1) as f64
}

/// Decode wall time over audio duration.
pub fn rtf(decode_wall_seconds: f64, lattice: &EmissionLattice) -> Result<f64, EvalError> {
    rtf_seconds(decode_wall_seconds, lattice.duration_seconds())
}

pub fn rtf_seconds(decode_wall_seconds: f64, audio_seconds: f64) -> Result<f64, EvalError> {
    if !(decode_wall_seconds >= 0.0 && decode_wall_seconds.is_finite()) {
        return Err(EvalError::InvalidTime(decode_wall_seconds));
    }
    if audio_seconds <= 0.0 {
        return Err(EvalError::ZeroDuration);
    }
    Ok(decode_wall_seconds / audio_seconds)
}
