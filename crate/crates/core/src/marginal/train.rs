use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use super::{marginal_grad_with, MarginalConfig, MarginalError, SgdConfig, WeightOptions};
use crate::candidates::{
    prefix_beam_search, randomized_subset, CandidateError, CandidateSet, SkmSampler, Strategy,
};
use crate::lattice::{EmissionLattice, PhonemeVocab};
use crate::rng::RngState;
use crate::scorer::{GraphemeSeq, ScorerParams, ScorerTables};

/// One point of the loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    /// Mean negative marginal log-likelihood over the interval's examples.
    pub loss: f64,
    pub wall_ms: f64,
    /// Examples dropped in this interval because every candidate was impossible.
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub records: Vec<TrainRecord>,
    pub skipped: usize,
}

impl TrainOutcome {
    /// `step,loss,wall_ms` with a header line.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,loss,wall_ms\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{:.3}\n", r.step, r.loss, r.wall_ms));
        }
        out
    }
}

/// Where each example's candidates come from at each step.
#[derive(Debug, Clone)]
pub enum CandidatePlan {
    /// Same set every step (TKM, or any precomputed set).
    Fixed(Vec<CandidateSet>),
    /// Fresh uniform `n`-subset of a cached set every step (randomized TKM).
    Subset { full: Vec<CandidateSet>, n: usize },
    /// Sampled from the tempered lattice (SKM); once, or anew every step.
    Sampled {
        k: usize,
        temperature: f64,
        resample_each_step: bool,
    },
}

/// Train the transducer from uniform logits under `config`'s strategy.
pub fn train(
    corpus: &[(EmissionLattice, GraphemeSeq)],
    vocab: &PhonemeVocab,
    num_graphemes: usize,
    config: &MarginalConfig,
    sgd: &SgdConfig,
    seed: u64,
) -> Result<TrainOutcome, MarginalError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(MarginalError::EmptyCorpus);
    }
    let pool = thread_pool(sgd.workers);
    let beams = || -> Result<Vec<CandidateSet>, MarginalError> {
        pool.install(|| {
            corpus
                .par_iter()
                .map(|(lat, _)| prefix_beam_search(lat, vocab, config.k).map_err(Into::into))
                .collect()
        })
    };
    let plan = match config.strategy {
        Strategy::Tkm => CandidatePlan::Fixed(beams()?),
        Strategy::RandomizedTkm => CandidatePlan::Subset {
            full: beams()?,
            n: config.n,
        },
        Strategy::Skm => CandidatePlan::Sampled {
            k: config.k,
            temperature: config.temperature,
            resample_each_step: config.resample_each_step,
        },
    };
    let init = ScorerParams::uniform(vocab.len(), num_graphemes);
    train_with_plan(
        corpus,
        vocab,
        &plan,
        init,
        WeightOptions::from_config(config),
        sgd,
        seed,
    )
}

/// Mini-batch gradient ascent on the mean marginal log-likelihood.
///
/// Randomness is keyed by `(seed, step, example)`, and per-example gradients
/// are reduced in batch order, so results do not depend on `sgd.workers`.
pub fn train_with_plan(
    corpus: &[(EmissionLattice, GraphemeSeq)],
    vocab: &PhonemeVocab,
    plan: &CandidatePlan,
    init: ScorerParams,
    weights: WeightOptions,
    sgd: &SgdConfig,
    seed: u64,
) -> Result<TrainOutcome, MarginalError> {
    sgd.validate()?;
    if corpus.is_empty() {
        return Err(MarginalError::EmptyCorpus);
    }
    let pool = thread_pool(sgd.workers);
    let started = Instant::now();

    let samplers: Vec<SkmSampler> = match plan {
        CandidatePlan::Sampled { temperature, .. } => corpus
            .iter()
            .map(|(lat, _)| SkmSampler::new(lat, vocab, *temperature))
            .collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };
    let frozen_samples: Option<Vec<CandidateSet>> = match plan {
        CandidatePlan::Sampled {
            k,
            resample_each_step: false,
            ..
        } => Some(
            samplers
                .iter()
                .enumerate()
                .map(|(i, s)| s.sample(*k, &mut RngState::stream2(seed, 0, i as u32)))
                .collect::<Result<_, _>>()?,
        ),
        _ => None,
    };

    let candidates_for = |idx: usize, step: usize| -> Result<CandidateSet, MarginalError> {
        let mut rng = RngState::stream2(seed, step as u64 + 1, idx as u32);
        Ok(match plan {
            CandidatePlan::Fixed(sets) => sets[idx].clone(),
            CandidatePlan::Subset { full, n } => {
                match randomized_subset(&full[idx], *n, &mut rng) {
                    Ok(s) => s,
                    Err(CandidateError::NotEnoughCandidates { .. }) => full[idx].clone(),
                    Err(e) => return Err(e.into()),
                }
            }
            CandidatePlan::Sampled { k, .. } => match &frozen_samples {
                Some(sets) => sets[idx].clone(),
                None => samplers[idx].sample(*k, &mut rng)?,
            },
        })
    };

    let mut params = init;
    let mut records = Vec::new();
    let mut skipped_total = 0;
    let (mut interval_loss, mut interval_n, mut interval_skipped) = (0.0, 0usize, 0usize);

    for step in 1..=sgd.steps {
        let batch = batch_indices(corpus.len(), sgd.batch_size, seed, step);
        let tables = ScorerTables::new(&params);
        let per_example = |&idx: &usize| {
            let cands = candidates_for(idx, step)?;
            match marginal_grad_with(&cands, &tables, &corpus[idx].1, weights) {
                Ok(r) => Ok(Some(r)),
                Err(MarginalError::AllImpossible) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let results: Vec<Result<Option<(f64, ScorerParams)>, MarginalError>> = if sgd.workers > 1 {
            pool.install(|| batch.par_iter().map(per_example).collect())
        } else {
            batch.iter().map(per_example).collect()
        };

        let mut grad = params.zeros_like();
        let mut used = 0usize;
        for r in results {
            match r? {
                Some((lp, g)) => {
                    grad.add_scaled(&g, 1.0);
                    interval_loss -= lp;
                    used += 1;
                }
                None => interval_skipped += 1,
            }
        }
        interval_n += used;
        if used > 0 {
            grad.scale(1.0 / used as f64);
            let norm = grad.l2_norm();
            if norm > sgd.clip_norm {
                grad.scale(sgd.clip_norm / norm);
            }
            params.add_scaled(&grad, sgd.learning_rate);
        }

        if step % sgd.log_every == 0 || step == sgd.steps {
            if interval_n > 0 {
                records.push(TrainRecord {
                    step,
                    loss: interval_loss / interval_n as f64,
                    wall_ms: started.elapsed().as_secs_f64() * 1000.0,
                    skipped: interval_skipped,
                });
            }
            skipped_total += interval_skipped;
            interval_loss = 0.0;
            interval_n = 0;
            interval_skipped = 0;
        }
    }

    Ok(TrainOutcome {
        params,
        records,
        skipped: skipped_total,
    })
}

fn batch_indices(len: usize, batch: usize, seed: u64, step: usize) -> Vec<usize> {
    if batch >= len {
        return (0..len).collect();
    }
    let mut rng = RngState::stream2(seed, step as u64 + 1, u32::MAX);
    let mut idx = index::sample(&mut rng, len, batch).into_vec();
    idx.sort_unstable();
    idx
}

fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// Mean loss over the last `fraction` of the records (at least one).
pub fn smoothed_final_loss(records: &[TrainRecord], fraction: f64) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let take = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len());
    let tail = &records[records.len() - take..];
    Some(tail.iter().map(|r| r.loss).sum::<f64>() / take as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LabelSeq;

    fn tiny_corpus() -> (Vec<(EmissionLattice, GraphemeSeq)>, PhonemeVocab) {
        let lat = EmissionLattice::from_probs(
            &[
                vec![0.8, 0.1, 0.1],
                vec![0.1, 0.1, 0.8],
                vec![0.1, 0.7, 0.2],
            ],
            10.0,
        )
        .unwrap();
        (
            vec![(lat, GraphemeSeq::new(vec![0, 1]))],
            PhonemeVocab::new(["a", "b"]).unwrap(),
        )
    }

    #[test]
    fn zero_learning_rate_keeps_params_and_loss_flat() {
        let (corpus, vocab) = tiny_corpus();
        let sgd = SgdConfig {
            steps: 40,
            learning_rate: 0.0,
            batch_size: 4,
            log_every: 10,
            ..SgdConfig::default()
        };
        let out = train(
            &corpus,
            &vocab,
            2,
            &MarginalConfig::published(Strategy::Tkm),
            &sgd,
            1,
        )
        .unwrap();
        assert_eq!(out.params, ScorerParams::uniform(2, 2));
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.loss == out.records[0].loss));
    }

    #[test]
    fn loss_decreases_for_every_strategy() {
        let (corpus, vocab) = tiny_corpus();
        let sgd = SgdConfig {
            steps: 200,
            learning_rate: 0.5,
            log_every: 20,
            ..SgdConfig::default()
        };
        for s in Strategy::ALL {
            let mut cfg = MarginalConfig::published(s);
            if s == Strategy::RandomizedTkm {
                cfg.k = 4;
                cfg.n = 2;
            }
            let out = train(&corpus, &vocab, 2, &cfg, &sgd, 5).unwrap();
            let first = out.records.first().unwrap().loss;
            let last = out.records.last().unwrap().loss;
            assert!(last < first, "{s}: {first} -> {last}");
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (mut corpus, vocab) = tiny_corpus();
        let extra = (
            EmissionLattice::from_probs(&[vec![0.3, 0.3, 0.4], vec![0.5, 0.2, 0.3]], 10.0).unwrap(),
            GraphemeSeq::new(vec![1]),
        );
        corpus.push(extra);
        let run = |workers| {
            let sgd = SgdConfig {
                steps: 30,
                batch_size: 2,
                log_every: 5,
                workers,
                ..SgdConfig::default()
            };
            train(
                &corpus,
                &vocab,
                2,
                &MarginalConfig::published(Strategy::Skm),
                &sgd,
                11,
            )
            .unwrap()
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.params, b.params);
        let losses = |o: &TrainOutcome| o.records.iter().map(|r| r.loss).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
    }

    #[test]
    fn smoothing_window() {
        let recs: Vec<TrainRecord> = (1..=10)
            .map(|i| TrainRecord {
                step: i,
                loss: i as f64,
                wall_ms: 0.0,
                skipped: 0,
            })
            .collect();
        assert_eq!(smoothed_final_loss(&recs, 0.2), Some(9.5));
        assert_eq!(smoothed_final_loss(&recs, 0.0), Some(10.0));
        assert_eq!(smoothed_final_loss(&[], 0.5), None);
        let _ = LabelSeq::empty();
    }
}
