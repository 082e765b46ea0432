//! Browser demo over the benchmark language.
//!
//! Three views, each a pure function of its arguments:
//! - [`tempered_view`]: one lattice before and after temperature scaling
//! - [`candidate_view`]: top-K beam candidates next to K tempered samples
//! - [`diversity_sweep`]: mean distinct candidates as temperature varies
//!
//! The `wasm_*` exports wrap these and return JSON strings.

use serde::Serialize;
use skmarg_core::candidates::{prefix_beam_search, skm_sample_candidates, CandidateSet};
use skmarg_core::eval::edit_distance;
use skmarg_core::lattice::{apply_temperature, EmissionLattice, PhonemeVocab};
use skmarg_core::logmath::log_sum_exp;
use skmarg_core::rng::RngState;
use skmarg_core::synth::{gen_corpus, SynthExample, SynthSpec};
use wasm_bindgen::prelude::*;

/// Lattices per sweep point.
pub const SWEEP_LATTICES: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperedView {
    pub phonemes: Vec<String>,
    pub reference: String,
    pub truth: String,
    /// Linear probabilities, frame-major, blank last.
    pub original: Vec<Vec<f64>>,
    pub tempered: Vec<Vec<f64>>,
    /// Mean per-frame entropy in nats.
    pub entropy_original: f64,
    pub entropy_tempered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRow {
    pub labels: String,
    pub logprob: f64,
    pub count: u32,
    pub edits_from_truth: usize,
    pub is_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateView {
    pub truth: String,
    pub beam: Vec<CandidateRow>,
    pub sampled: Vec<CandidateRow>,
    /// Posterior mass covered by each set.
    pub beam_mass: f64,
    pub sampled_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub temperature: f64,
    pub mean_distinct: f64,
    /// Mean pairwise edit distance between distinct candidates.
    pub mean_spread: f64,
    pub mean_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub k: usize,
    pub noise: f64,
    pub beam: SweepPoint,
    pub sampled: Vec<SweepPoint>,
}

fn spec(noise: f64, seed: u64) -> Result<SynthSpec, String> {
    let mut spec = SynthSpec::benchmark();
    spec.noise = noise;
    spec.seed = seed;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn example(noise: f64, seed: u64) -> Result<(SynthSpec, SynthExample), String> {
    let spec = spec(noise, seed)?;
    let ex = gen_corpus(&spec, 1).map_err(|e| e.to_string())?.remove(0);
    Ok((spec, ex))
}

fn probs(lattice: &EmissionLattice) -> Vec<Vec<f64>> {
    lattice
        .rows()
        .map(|r| r.iter().map(|x| x.exp()).collect())
        .collect()
}

fn mean_entropy(rows: &[Vec<f64>]) -> f64 {
    let h: f64 = rows
        .iter()
        .map(|r| {
            r.iter()
                .filter(|&&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum::<f64>()
        })
        .sum();
    h / rows.len() as f64
}

pub fn tempered_view(noise: f64, seed: u64, temperature: f64) -> Result<TemperedView, String> {
    let (spec, ex) = example(noise, seed)?;
    let hot = apply_temperature(&ex.lattice, temperature).map_err(|e| e.to_string())?;
    let vocab = spec.phoneme_vocab();
    let original = probs(&ex.lattice);
    let tempered = probs(&hot);
    let mut phonemes = vocab.symbols().to_vec();
    phonemes.push("-".into());
    Ok(TemperedView {
        phonemes,
        reference: spec.grapheme_vocab().render(&ex.y_true),
        truth: vocab.render(&ex.h_true),
        entropy_original: mean_entropy(&original),
        entropy_tempered: mean_entropy(&tempered),
        original,
        tempered,
    })
}

fn rows(set: &CandidateSet, vocab: &PhonemeVocab, truth: &[usize]) -> Vec<CandidateRow> {
    set.iter()
        .map(|c| CandidateRow {
            labels: vocab.render(&c.labels),
            logprob: c.log_weight,
            count: c.count,
            edits_from_truth: edit_distance(truth, c.labels.as_slice()).distance,
            is_truth: c.labels.as_slice() == truth,
        })
        .collect()
}

fn mass(set: &CandidateSet) -> f64 {
    log_sum_exp(&set.iter().map(|c| c.log_weight).collect::<Vec<_>>()).exp()
}

/// `draw` picks an independent sample stream for the same lattice.
pub fn candidate_view(
    noise: f64,
    seed: u64,
    k: usize,
    temperature: f64,
    draw: u64,
) -> Result<CandidateView, String> {
    let (spec, ex) = example(noise, seed)?;
    let vocab = spec.phoneme_vocab();
    let beam = prefix_beam_search(&ex.lattice, &vocab, k).map_err(|e| e.to_string())?;
    let mut rng = RngState::stream(seed, draw);
    let sampled = skm_sample_candidates(&ex.lattice, &vocab, k, temperature, &mut rng)
        .map_err(|e| e.to_string())?;
    let truth = ex.h_true.as_slice();
    Ok(CandidateView {
        truth: vocab.render(&ex.h_true),
        beam_mass: mass(&beam),
        sampled_mass: mass(&sampled),
        beam: rows(&beam, &vocab, truth),
        sampled: rows(&sampled, &vocab, truth),
    })
}

fn spread(set: &CandidateSet) -> f64 {
    let c = set.candidates();
    let mut total = 0usize;
    let mut pairs = 0usize;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            total += edit_distance(c[i].labels.as_slice(), c[j].labels.as_slice()).distance;
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total as f64 / pairs as f64
    }
}

#[derive(Default)]
struct Accumulator {
    distinct: f64,
    spread: f64,
    mass: f64,
}

impl Accumulator {
    fn add(&mut self, set: &CandidateSet) {
        self.distinct += set.distinct_count() as f64;
        self.spread += spread(set);
        self.mass += mass(set);
    }

    fn point(&self, temperature: f64, n: usize) -> SweepPoint {
        let n = n as f64;
        SweepPoint {
            temperature,
            mean_distinct: self.distinct / n,
            mean_spread: self.spread / n,
            mean_mass: self.mass / n,
        }
    }
}

pub fn diversity_sweep(
    noise: f64,
    seed: u64,
    k: usize,
    temperatures: &[f64],
) -> Result<Sweep, String> {
    let spec = spec(noise, seed)?;
    let vocab = spec.phoneme_vocab();
    let examples = gen_corpus(&spec, SWEEP_LATTICES).map_err(|e| e.to_string())?;
    let mut beam = Accumulator::default();
    for ex in &examples {
        beam.add(&prefix_beam_search(&ex.lattice, &vocab, k).map_err(|e| e.to_string())?);
    }
    let sampled = temperatures
        .iter()
        .map(|&t| {
            let mut acc = Accumulator::default();
            for (i, ex) in examples.iter().enumerate() {
                let mut rng = RngState::stream(seed, i as u64);
                acc.add(
                    &skm_sample_candidates(&ex.lattice, &vocab, k, t, &mut rng)
                        .map_err(|e| e.to_string())?,
                );
            }
            Ok(acc.point(t, examples.len()))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Sweep {
        k,
        noise,
        beam: beam.point(1.0, examples.len()),
        sampled,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn wasm_tempered_view(noise: f64, seed: u32, temperature: f64) -> Result<String, JsValue> {
    to_js(tempered_view(noise, seed as u64, temperature))
}

#[wasm_bindgen]
pub fn wasm_candidate_view(
    noise: f64,
    seed: u32,
    k: u32,
    temperature: f64,
    draw: u32,
) -> Result<String, JsValue> {
    to_js(candidate_view(
        noise,
        seed as u64,
        k as usize,
        temperature,
        draw as u64,
    ))
}

#[wasm_bindgen]
pub fn wasm_diversity_sweep(
    noise: f64,
    seed: u32,
    k: u32,
    temperatures: Vec<f64>,
) -> Result<String, JsValue> {
    to_js(diversity_sweep(
        noise,
        seed as u64,
        k as usize,
        &temperatures,
    ))
}
