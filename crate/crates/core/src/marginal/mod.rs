//! The marginalized objective
//!
//! ```text
//! p(y | x) ~= sum_k p(h_k | x) * p(y | h_k)
//! ```
//!
//! over a candidate set `{h_k}`, its gradient with the candidate weights held
//! fixed, training under each candidate strategy, and decoding.

mod config;
mod decode;
mod train;

use thiserror::Error;

use crate::candidates::{CandidateError, CandidateSet};
use crate::lattice::LabelSeq;
use crate::logmath::log_sum_exp;
use crate::scorer::{GraphemeSeq, ScorerError, ScorerParams, ScorerTables};

pub use config::{
    apply_config_map, config_to_kv, parse_config_text, CandidateWeighting, MarginalConfig,
    SgdConfig,
};
pub use decode::{decode, decode_candidates, decode_max_len, Decoded};
pub use train::{
    smoothed_final_loss, train, train_with_plan, CandidatePlan, TrainOutcome, TrainRecord,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginalError {
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("every candidate gives the target zero probability")]
    AllImpossible,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("decoding produced no hypotheses")]
    EmptyPool,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
}

/// Anything that can score `log p(y | h)`.
///
/// Implementations must return values `<= 0`, sum to at most one over `y`
/// for a fixed `h`, and be deterministic.
pub trait SequenceScorer {
    fn seq_logprob(&self, h: &LabelSeq, y: &GraphemeSeq) -> Result<f64, ScorerError>;
}

impl SequenceScorer for ScorerTables {
    fn seq_logprob(&self, h: &LabelSeq, y: &GraphemeSeq) -> Result<f64, ScorerError> {
        self.logprob(h, y)
    }
}

impl SequenceScorer for ScorerParams {
    fn seq_logprob(&self, h: &LabelSeq, y: &GraphemeSeq) -> Result<f64, ScorerError> {
        ScorerTables::new(self).logprob(h, y)
    }
}

/// How candidate log-weights enter the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightOptions {
    pub weighting: CandidateWeighting,
    pub renormalize: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self {
            weighting: CandidateWeighting::Posterior,
            renormalize: false,
        }
    }
}

impl WeightOptions {
    pub fn from_config(c: &MarginalConfig) -> Self {
        Self {
            weighting: c.weighting,
            renormalize: c.renormalize,
        }
    }

    pub fn log_weights(&self, set: &CandidateSet) -> Vec<f64> {
        let mut w: Vec<f64> = match self.weighting {
            CandidateWeighting::Posterior => set.iter().map(|c| c.log_weight).collect(),
            CandidateWeighting::Frequency => {
                let total = (set.total_count() as f64).ln();
                set.iter().map(|c| (c.count as f64).ln() - total).collect()
            }
        };
        if self.renormalize {
            let z = log_sum_exp(&w);
            w.iter_mut().for_each(|x| *x -= z);
        }
        w
    }
}

/// `log sum_k p(h_k | x) p(y | h_k)` with unnormalized posterior weights.
///
/// Returns `-inf` (not an error) when every term is impossible.
pub fn marginal_logprob<S: SequenceScorer + ?Sized>(
    candidates: &CandidateSet,
    scorer: &S,
    y: &GraphemeSeq,
) -> Result<f64, MarginalError> {
    marginal_logprob_with(candidates, scorer, y, WeightOptions::default())
}

pub fn marginal_logprob_with<S: SequenceScorer + ?Sized>(
    candidates: &CandidateSet,
    scorer: &S,
    y: &GraphemeSeq,
    opts: WeightOptions,
) -> Result<f64, MarginalError> {
    if candidates.is_empty() {
        return Err(MarginalError::EmptyCandidates);
    }
    let weights = opts.log_weights(candidates);
    let terms = candidates
        .iter()
        .zip(weights)
        .map(|(c, w)| Ok(w + scorer.seq_logprob(&c.labels, y)?))
        .collect::<Result<Vec<f64>, MarginalError>>()?;
    Ok(log_sum_exp(&terms))
}

/// Marginal log-probability and its gradient: the responsibility-weighted
/// sum of per-candidate scorer gradients. Candidate weights are constants.
pub fn marginal_grad(
    candidates: &CandidateSet,
    params: &ScorerParams,
    y: &GraphemeSeq,
) -> Result<(f64, ScorerParams), MarginalError> {
    marginal_grad_with(
        candidates,
        &ScorerTables::new(params),
        y,
        WeightOptions::default(),
    )
}

pub fn marginal_grad_with(
    candidates: &CandidateSet,
    tables: &ScorerTables,
    y: &GraphemeSeq,
    opts: WeightOptions,
) -> Result<(f64, ScorerParams), MarginalError> {
    if candidates.is_empty() {
        return Err(MarginalError::EmptyCandidates);
    }
    let weights = opts.log_weights(candidates);
    let mut terms = Vec::with_capacity(candidates.len());
    let mut grads = Vec::with_capacity(candidates.len());
    for (c, w) in candidates.iter().zip(weights) {
        match tables.logprob_grad(&c.labels, y) {
            Ok((lp, g)) => {
                terms.push(w + lp);
                grads.push(Some(g));
            }
            Err(ScorerError::ImpossiblePair) => {
                terms.push(f64::NEG_INFINITY);
                grads.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let total = log_sum_exp(&terms);
    if total == f64::NEG_INFINITY {
        return Err(MarginalError::AllImpossible);
    }
    let mut grad = ScorerParams::uniform(tables.num_phonemes(), tables.num_graphemes());
    for (term, g) in terms.iter().zip(grads) {
        if let Some(g) = g {
            grad.add_scaled(&g, (term - total).exp());
        }
    }
    Ok((total, grad))
}
