//! CTC emission lattices, alignments and label sequences.
//!
//! A lattice holds one row of log-posteriors per frame over `V` phonemes plus
//! the blank, which always sits at index `V` (the last column).

mod ctc;
mod enumerate;
mod text;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::logmath::log_sum_exp;

pub use ctc::label_logprob;
pub use enumerate::{enumerate_label_probs, DEFAULT_ENUMERATION_BUDGET};
pub use text::{format_lattice, parse_lattice};

/// Tolerance on `logsumexp(row)` when checking that a frame is normalized.
pub const ROW_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("frame {frame} is not normalized (|logsumexp| = {deviation:e})")]
    RowNotNormalized { frame: usize, deviation: f64 },
    #[error("frame {frame} has a non-finite entry at state {index}")]
    NonFiniteEntry { frame: usize, index: usize },
    #[error("lattice has no frames")]
    NoFrames,
    #[error("frame {frame} has {found} columns, expected {expected}")]
    RowWidth {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame shift must be positive and finite, got {0}")]
    InvalidFrameShift(f64),
    #[error("label {label} is outside a vocabulary of {vocab_size} phonemes")]
    VocabMismatch { label: usize, vocab_size: usize },
    #[error("lattice has {lattice} phoneme columns but the vocabulary has {vocab}")]
    WidthMismatch { lattice: usize, vocab: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("enumerating {alignments} alignments exceeds the budget of {budget}")]
    BudgetExceeded { alignments: f64, budget: u64 },
    #[error("invalid phoneme vocabulary: {0}")]
    InvalidVocab(String),
    #[error("lattice text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Ordered phoneme alphabet. The blank is implicit and sits at index `len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeVocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

/// Reserved name of the CTC blank; never a phoneme symbol.
pub const BLANK_SYMBOL: &str = "<b>";

impl PhonemeVocab {
    pub fn new<S: Into<String>>(
        symbols: impl IntoIterator<Item = S>,
    ) -> Result<Self, LatticeError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(LatticeError::InvalidVocab(format!("bad symbol {s:?}")));
            }
            if s == BLANK_SYMBOL {
                return Err(LatticeError::InvalidVocab("blank used as a phoneme".into()));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(LatticeError::InvalidVocab(format!(
                    "duplicate symbol {s:?}"
                )));
            }
        }
        Ok(Self { symbols, index })
    }

    /// `p0 .. p{n-1}`.
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("p{i}"))).expect("numbered symbols are unique")
    }

    /// Number of phonemes `V` (blank excluded).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> Option<&str> {
        if i == self.blank() {
            Some(BLANK_SYMBOL)
        } else {
            self.symbols.get(i).map(String::as_str)
        }
    }

    pub fn index_of(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Space-joined symbols of a label sequence.
    pub fn render(&self, h: &LabelSeq) -> String {
        h.iter()
            .map(|&l| self.symbol(l).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse space-separated phoneme symbols.
    pub fn parse(&self, s: &str) -> Option<LabelSeq> {
        s.split_whitespace()
            .map(|t| self.index_of(t))
            .collect::<Option<Vec<_>>>()
            .map(LabelSeq::new)
    }
}

/// A phoneme sequence with no blanks.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSeq(Vec<usize>);

impl LabelSeq {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Fails if any label is the blank or beyond it.
    pub fn check(&self, vocab: &PhonemeVocab) -> Result<(), LatticeError> {
        match self.0.iter().find(|&&l| l >= vocab.len()) {
            Some(&label) => Err(LatticeError::VocabMismatch {
                label,
                vocab_size: vocab.len(),
            }),
            None => Ok(()),
        }
    }

    /// Minimum number of frames an alignment of this sequence needs: one per
    /// label plus a separating blank between equal neighbours.
    pub fn min_frames(&self) -> usize {
        let repeats = self.0.windows(2).filter(|w| w[0] == w[1]).count();
        self.0.len() + repeats
    }
}

impl From<Vec<usize>> for LabelSeq {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Frame-level state path, one state in `[0, V]` per frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alignment(Vec<usize>);

impl Alignment {
    pub fn new(states: Vec<usize>) -> Self {
        Self(states)
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-frame log-posteriors over `V` phonemes and the blank.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLattice {
    num_frames: usize,
    num_states: usize,
    log_probs: Vec<f64>,
    frame_shift_ms: f64,
}

impl EmissionLattice {
    /// Build from rows of log-probabilities (blank last) and validate.
    pub fn from_rows(rows: Vec<Vec<f64>>, frame_shift_ms: f64) -> Result<Self, LatticeError> {
        let num_states = rows.first().map(Vec::len).ok_or(LatticeError::NoFrames)?;
        let num_frames = rows.len();
        let mut log_probs = Vec::with_capacity(num_frames * num_states);
        for (frame, row) in rows.into_iter().enumerate() {
            if row.len() != num_states {
                return Err(LatticeError::RowWidth {
                    frame,
                    expected: num_states,
                    found: row.len(),
                });
            }
            log_probs.extend(row);
        }
        let lattice = Self {
            num_frames,
            num_states,
            log_probs,
            frame_shift_ms,
        };
        validate_lattice(&lattice)?;
        Ok(lattice)
    }

    /// Build from rows of linear probabilities; zeros become `-inf`.
    pub fn from_probs(rows: &[Vec<f64>], frame_shift_ms: f64) -> Result<Self, LatticeError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|p| p.ln()).collect())
                .collect(),
            frame_shift_ms,
        )
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// `V + 1`.
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `V`, the number of non-blank columns.
    pub fn num_phonemes(&self) -> usize {
        self.num_states - 1
    }

    pub fn blank(&self) -> usize {
        self.num_states - 1
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    /// Audio duration covered by the lattice.
    pub fn duration_seconds(&self) -> f64 {
        self.num_frames as f64 * self.frame_shift_ms / 1000.0
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.log_probs[t * self.num_states..(t + 1) * self.num_states]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.log_probs.chunks_exact(self.num_states)
    }

    pub fn get(&self, t: usize, state: usize) -> f64 {
        self.log_probs[t * self.num_states + state]
    }

    pub(crate) fn check_vocab(&self, vocab: &PhonemeVocab) -> Result<(), LatticeError> {
        if vocab.len() != self.num_phonemes() {
            return Err(LatticeError::WidthMismatch {
                lattice: self.num_phonemes(),
                vocab: vocab.len(),
            });
        }
        Ok(())
    }
}

/// Check row normalization and that no entry is NaN or `+inf`.
///
/// `-inf` entries are accepted: they mark states with zero posterior.
pub fn validate_lattice(lattice: &EmissionLattice) -> Result<(), LatticeError> {
    if lattice.num_frames == 0 {
        return Err(LatticeError::NoFrames);
    }
    if !(lattice.frame_shift_ms.is_finite() && lattice.frame_shift_ms > 0.0) {
        return Err(LatticeError::InvalidFrameShift(lattice.frame_shift_ms));
    }
    for (frame, row) in lattice.rows().enumerate() {
        if let Some(index) = row.iter().position(|&x| x.is_nan() || x == f64::INFINITY) {
            return Err(LatticeError::NonFiniteEntry { frame, index });
        }
        let deviation = log_sum_exp(row).abs();
        if !(deviation <= ROW_TOLERANCE) {
            return Err(LatticeError::RowNotNormalized { frame, deviation });
        }
    }
    Ok(())
}

/// Merge adjacent repeated states, then drop blanks.
pub fn collapse(alignment: &Alignment, vocab: &PhonemeVocab) -> LabelSeq {
    collapse_states(alignment.states(), vocab.blank())
}

pub(crate) fn collapse_states(states: &[usize], blank: usize) -> LabelSeq {
    let mut out = Vec::new();
    let mut prev = None;
    for &s in states {
        if prev != Some(s) && s != blank {
            out.push(s);
        }
        prev = Some(s);
    }
    LabelSeq(out)
}

/// Rescale every row to `row / T` and renormalize in the log domain.
pub fn apply_temperature(
    lattice: &EmissionLattice,
    temperature: f64,
) -> Result<EmissionLattice, LatticeError> {
    if !(temperature > 0.0) || temperature.is_nan() {
        return Err(LatticeError::NonPositiveTemperature(temperature));
    }
    let mut log_probs = Vec::with_capacity(lattice.log_probs.len());
    for row in lattice.rows() {
        let scaled: Vec<f64> = row.iter().map(|&x| x / temperature).collect();
        let z = log_sum_exp(&scaled);
        log_probs.extend(scaled.into_iter().map(|x| x - z));
    }
    Ok(EmissionLattice {
        log_probs,
        ..lattice.clone()
    })
}

impl fmt::Display for LabelSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> PhonemeVocab {
        PhonemeVocab::new(["a", "b"]).unwrap()
    }

    #[test]
    fn validate_accepts_normalized_rows() {
        let half = 0.5f64.ln();
        assert!(EmissionLattice::from_rows(vec![vec![half, half]; 2], 10.0).is_ok());
    }

    #[test]
    fn validate_rejects_unnormalized_row() {
        let x = 0.6f64.ln();
        let err = EmissionLattice::from_rows(vec![vec![x, x]], 10.0).unwrap_err();
        assert!(matches!(
            err,
            LatticeError::RowNotNormalized { frame: 0, .. }
        ));
    }

    #[test]
    fn validate_rejects_positive_infinity() {
        let err = EmissionLattice::from_rows(vec![vec![f64::INFINITY, 0.0]], 10.0).unwrap_err();
        assert_eq!(err, LatticeError::NonFiniteEntry { frame: 0, index: 0 });
        let err = EmissionLattice::from_rows(vec![vec![0.0, f64::NAN]], 10.0).unwrap_err();
        assert_eq!(err, LatticeError::NonFiniteEntry { frame: 0, index: 1 });
    }

    #[test]
    fn validate_rejects_ragged_and_empty() {
        assert_eq!(
            EmissionLattice::from_rows(vec![], 10.0).unwrap_err(),
            LatticeError::NoFrames
        );
        let err = EmissionLattice::from_rows(vec![vec![0.0, f64::NEG_INFINITY], vec![0.0]], 10.0)
            .unwrap_err();
        assert!(matches!(err, LatticeError::RowWidth { frame: 1, .. }));
    }

    #[test]
    fn collapse_examples() {
        let v = ab();
        let (a, b, blank) = (0, 1, v.blank());
        let c = |s: Vec<usize>| collapse(&Alignment::new(s), &v).into_vec();
        assert_eq!(c(vec![a, a, blank, b, blank]), vec![a, b]);
        assert_eq!(c(vec![blank, blank, blank]), Vec::<usize>::new());
        assert_eq!(c(vec![a, blank, a]), vec![a, a]);
        assert_eq!(c(vec![]), Vec::<usize>::new());
    }

    #[test]
    fn temperature_one_is_identity() {
        let l =
            EmissionLattice::from_probs(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]], 10.0).unwrap();
        let t = apply_temperature(&l, 1.0).unwrap();
        for (x, y) in l.log_probs.iter().zip(&t.log_probs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn temperature_rejects_nonpositive() {
        let l = EmissionLattice::from_probs(&[vec![0.5, 0.5]], 10.0).unwrap();
        assert!(apply_temperature(&l, 0.0).is_err());
        assert!(apply_temperature(&l, -1.0).is_err());
        assert!(apply_temperature(&l, f64::NAN).is_err());
    }

    #[test]
    fn temperature_keeps_impossible_states_impossible() {
        let l = EmissionLattice::from_probs(&[vec![1.0, 0.0]], 10.0).unwrap();
        let t = apply_temperature(&l, 3.0).unwrap();
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(0, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn vocab_rejects_duplicates_and_blank() {
        assert!(PhonemeVocab::new(["a", "a"]).is_err());
        assert!(PhonemeVocab::new([BLANK_SYMBOL]).is_err());
        assert!(PhonemeVocab::new(["a b"]).is_err());
        let v = ab();
        assert_eq!(v.blank(), 2);
        assert_eq!(v.symbol(2), Some(BLANK_SYMBOL));
        assert_eq!(v.parse("b a"), Some(LabelSeq::new(vec![1, 0])));
        assert_eq!(v.parse("c"), None);
    }

    #[test]
    fn min_frames_counts_repeats() {
        assert_eq!(LabelSeq::new(vec![0, 0, 1, 1, 1]).min_frames(), 8);
        assert_eq!(LabelSeq::empty().min_frames(), 0);
    }
}
