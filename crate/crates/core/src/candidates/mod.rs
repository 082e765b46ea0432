//! Candidate phoneme sequences for marginalization.
//!
//! Three producers share one output type:
//! * [`prefix_beam_search`] ranks the Top-K sequences (TKM),
//! * [`randomized_subset`] draws `n` of those at random (randomized TKM),
//! * [`skm_sample_candidates`] samples frame paths from a tempered lattice
//!   and collapses them (SKM).
//!
//! Whatever the producer, each candidate carries its exact CTC log-probability
//! on the original lattice, so the sets are interchangeable downstream.

mod beam;
mod sampling;
mod tsv;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LabelSeq, LatticeError};
use crate::rng::RngState;

pub use beam::{prefix_beam_search, prefix_beam_search_with_width};
pub use sampling::{sample_alignment, skm_sample_candidates, FrameSampler, SkmSampler};
pub use tsv::{format_candidates_tsv, parse_candidates_tsv, CandidateHeader};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CandidateError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("need {requested} candidates but only {available} are available")]
    NotEnoughCandidates { requested: usize, available: usize },
    #[error("K must be at least 1")]
    ZeroK,
    #[error("candidate TSV, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Tkm,
    RandomizedTkm,
    Skm,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Tkm, Strategy::RandomizedTkm, Strategy::Skm];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Tkm => "tkm",
            Strategy::RandomizedTkm => "randomized_tkm",
            Strategy::Skm => "skm",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tkm" => Ok(Strategy::Tkm),
            "randomized_tkm" | "rtkm" => Ok(Strategy::RandomizedTkm),
            "skm" => Ok(Strategy::Skm),
            other => Err(format!(
                "unknown strategy {other:?} (tkm | randomized_tkm | skm)"
            )),
        }
    }
}

/// A phoneme sequence and its log-probability under the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub labels: LabelSeq,
    pub log_weight: f64,
    /// How many raw proposals collapsed onto this sequence (1 for beam output).
    pub count: u32,
}

impl Candidate {
    pub fn new(labels: LabelSeq, log_weight: f64) -> Self {
        Self {
            labels,
            log_weight,
            count: 1,
        }
    }
}

/// Distinct candidates, sorted by descending weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
    strategy: Strategy,
}

impl CandidateSet {
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Number of distinct phoneme sequences; equal to `len()` by construction.
    pub fn distinct_count(&self) -> usize {
        self.candidates.len()
    }

    /// Total raw proposals behind the set (sum of multiplicities).
    pub fn total_count(&self) -> u64 {
        self.candidates.iter().map(|c| c.count as u64).sum()
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn into_vec(self) -> Vec<Candidate> {
        self.candidates
    }
}

/// Merge candidates with identical phoneme sequences.
///
/// Weights of duplicates are equal by construction, so the first one is kept;
/// multiplicities add up. Output is sorted by descending weight, ties broken
/// by label order.
pub fn dedup_merge(raw: Vec<Candidate>, strategy: Strategy) -> CandidateSet {
    let mut merged: BTreeMap<LabelSeq, Candidate> = BTreeMap::new();
    for c in raw {
        match merged.get_mut(&c.labels) {
            Some(existing) => existing.count += c.count,
            None => {
                merged.insert(c.labels.clone(), c);
            }
        }
    }
    let mut candidates: Vec<Candidate> = merged.into_values().collect();
    sort_candidates(&mut candidates);
    CandidateSet {
        candidates,
        strategy,
    }
}

pub(crate) fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        b.log_weight
            .total_cmp(&a.log_weight)
            .then_with(|| a.labels.cmp(&b.labels))
    });
}

/// Uniformly choose `n` distinct members of `full` without replacement.
///
/// Returns [`CandidateError::NotEnoughCandidates`] when `full` is smaller than
/// `n`; callers then use `full` unchanged.
pub fn randomized_subset(
    full: &CandidateSet,
    n: usize,
    rng: &mut RngState,
) -> Result<CandidateSet, CandidateError> {
    if n == 0 {
        return Err(CandidateError::ZeroK);
    }
    if full.len() < n {
        return Err(CandidateError::NotEnoughCandidates {
            requested: n,
            available: full.len(),
        });
    }
    let mut picked: Vec<usize> = index::sample(rng, full.len(), n).into_vec();
    picked.sort_unstable();
    Ok(CandidateSet {
        candidates: picked
            .into_iter()
            .map(|i| full.candidates[i].clone())
            .collect(),
        strategy: Strategy::RandomizedTkm,
    })
}
