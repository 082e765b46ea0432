//! Phoneme-to-grapheme scoring.
//!
//! [`ScorerParams`] parameterize a locally normalized monotonic edit-op
//! transducer that generates graphemes left to right while reading a phoneme
//! sequence. At every cell of the (phonemes read, graphemes written) grid the
//! next operation is drawn from `softmax(op_logits)`:
//!
//! * substitute: read `h_j`, write a grapheme from `softmax(emit[h_j])`,
//! * insert: write a grapheme from `softmax(emit[INSERT])` without reading,
//! * delete: read `h_j` and write nothing.
//!
//! Once every phoneme has been read, the substitute and delete mass becomes
//! the probability of stopping. Every path therefore ends with probability
//! one and `p(y | h)` is a proper distribution over grapheme strings.

mod decode;
mod transducer;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

pub(crate) use decode::decode_with_tables;
pub use decode::decode_y;
pub use transducer::{seq_logprob, seq_logprob_grad, ScorerTables};

pub const OP_SUB: usize = 0;
pub const OP_INS: usize = 1;
pub const OP_DEL: usize = 2;

/// Reserved end-of-sequence marker; never a member of a [`GraphemeSeq`].
pub const EOS_SYMBOL: &str = "</s>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("phoneme {0} is outside the scorer's phoneme inventory")]
    PhonemeOutOfRange(usize),
    #[error("grapheme {0} is outside the scorer's grapheme inventory")]
    GraphemeOutOfRange(usize),
    #[error("sequence pair has zero probability under the scorer")]
    ImpossiblePair,
    #[error("invalid grapheme vocabulary: {0}")]
    InvalidVocab(String),
    #[error("parameters contain a non-finite value")]
    NonFinite,
    #[error("params text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Ordered grapheme alphabet. [`EOS_SYMBOL`] is reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphemeVocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl GraphemeVocab {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self, ScorerError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) || s == EOS_SYMBOL {
                return Err(ScorerError::InvalidVocab(format!("bad symbol {s:?}")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(ScorerError::InvalidVocab(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// `a`..`z`, then `g26`, `g27`, ...
    pub fn letters(n: usize) -> Self {
        Self::new((0..n).map(|i| {
            if i < 26 {
                char::from(b'a' + i as u8).to_string()
            } else {
                format!("g{i}")
            }
        }))
        .expect("generated symbols are unique")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn render(&self, y: &GraphemeSeq) -> String {
        y.iter()
            .map(|&g| self.symbols.get(g).map_or("?", String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse space-separated symbols; rejects unknown symbols and EOS.
    pub fn parse(&self, s: &str) -> Result<GraphemeSeq, ScorerError> {
        s.split_whitespace()
            .map(|t| {
                self.index_of(t)
                    .ok_or_else(|| ScorerError::InvalidVocab(format!("unknown grapheme {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(GraphemeSeq)
    }
}

/// A grapheme string `y_1 .. y_L`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphemeSeq(Vec<usize>);

impl GraphemeSeq {
    pub fn new(graphemes: Vec<usize>) -> Self {
        Self(graphemes)
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
}

impl From<Vec<usize>> for GraphemeSeq {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Transducer logits.
///
/// `emit_logits` has `num_phonemes + 1` rows of `num_graphemes` columns; the
/// extra last row is the insertion distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    num_phonemes: usize,
    num_graphemes: usize,
    pub emit_logits: Vec<f64>,
    pub op_logits: [f64; 3],
}

impl ScorerParams {
    /// All logits zero: uniform operations and emissions.
    pub fn uniform(num_phonemes: usize, num_graphemes: usize) -> Self {
        Self {
            num_phonemes,
            num_graphemes,
            emit_logits: vec![0.0; (num_phonemes + 1) * num_graphemes],
            op_logits: [0.0; 3],
        }
    }

    pub fn from_parts(
        num_phonemes: usize,
        num_graphemes: usize,
        emit_logits: Vec<f64>,
        op_logits: [f64; 3],
    ) -> Result<Self, ScorerError> {
        if emit_logits.len() != (num_phonemes + 1) * num_graphemes || num_graphemes == 0 {
            return Err(ScorerError::InvalidVocab(format!(
                "expected {} emission logits",
                (num_phonemes + 1) * num_graphemes
            )));
        }
        let p = Self {
            num_phonemes,
            num_graphemes,
            emit_logits,
            op_logits,
        };
        p.check_finite()?;
        Ok(p)
    }

    pub fn num_phonemes(&self) -> usize {
        self.num_phonemes
    }

    pub fn num_graphemes(&self) -> usize {
        self.num_graphemes
    }

    /// Row index of the insertion distribution.
    pub fn insert_row(&self) -> usize {
        self.num_phonemes
    }

    pub fn emit_row(&self, row: usize) -> &[f64] {
        &self.emit_logits[row * self.num_graphemes..(row + 1) * self.num_graphemes]
    }

    pub fn emit_row_mut(&mut self, row: usize) -> &mut [f64] {
        let g = self.num_graphemes;
        &mut self.emit_logits[row * g..(row + 1) * g]
    }

    pub fn check_finite(&self) -> Result<(), ScorerError> {
        if self
            .emit_logits
            .iter()
            .chain(&self.op_logits)
            .all(|x| x.is_finite())
        {
            Ok(())
        } else {
            Err(ScorerError::NonFinite)
        }
    }

    /// A zero vector shaped like these parameters.
    pub fn zeros_like(&self) -> Self {
        Self::uniform(self.num_phonemes, self.num_graphemes)
    }

    /// Flattened view: emission logits followed by the three op logits.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.emit_logits.clone();
        v.extend_from_slice(&self.op_logits);
        v
    }

    pub fn flat_len(&self) -> usize {
        self.emit_logits.len() + 3
    }

    pub fn get_flat(&self, i: usize) -> f64 {
        if i < self.emit_logits.len() {
            self.emit_logits[i]
        } else {
            self.op_logits[i - self.emit_logits.len()]
        }
    }

    pub fn set_flat(&mut self, i: usize, v: f64) {
        let n = self.emit_logits.len();
        if i < n {
            self.emit_logits[i] = v;
        } else {
            self.op_logits[i - n] = v;
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.emit_logits.iter_mut().zip(&other.emit_logits) {
            *a += scale * b;
        }
        for (a, b) in self.op_logits.iter_mut().zip(&other.op_logits) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.emit_logits.iter_mut().for_each(|x| *x *= s);
        self.op_logits.iter_mut().for_each(|x| *x *= s);
    }

    pub fn l2_norm(&self) -> f64 {
        self.emit_logits
            .iter()
            .chain(&self.op_logits)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Text form: `V_phoneme V_grapheme`, then one line per emission row
    /// (insertion row last), then the substitute/insert/delete logits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.num_phonemes, self.num_graphemes);
        for row in self.emit_logits.chunks_exact(self.num_graphemes) {
            let cols: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", cols.join(" "));
        }
        let ops: Vec<String> = self.op_logits.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", ops.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ScorerError> {
        let err = |line: usize, msg: String| ScorerError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let nums = |lineno: usize, line: &str| -> Result<Vec<f64>, ScorerError> {
            line.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(lineno, e.to_string())))
                .collect()
        };
        let (hl, header) = lines
            .next()
            .ok_or_else(|| err(1, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| err(hl, e.to_string())))
            .collect::<Result<_, _>>()?;
        let [vp, vg] = dims[..] else {
            return Err(err(hl, "expected `V_phoneme V_grapheme`".into()));
        };
        let mut emit = Vec::with_capacity((vp + 1) * vg);
        for _ in 0..=vp {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(hl, "missing emission rows".into()))?;
            let row = nums(ln, line)?;
            if row.len() != vg {
                return Err(err(ln, format!("expected {vg} logits, got {}", row.len())));
            }
            emit.extend(row);
        }
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(hl, "missing op logits".into()))?;
        let ops = nums(ln, line)?;
        let [s, i, d] = ops[..] else {
            return Err(err(ln, "expected 3 op logits".into()));
        };
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content".into()));
        }
        Self::from_parts(vp, vg, emit, [s, i, d])
    }
}
