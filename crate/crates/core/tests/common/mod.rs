#![allow(dead_code)]

use proptest::prelude::*;
use skmarg_core::lattice::{EmissionLattice, PhonemeVocab};
use skmarg_core::scorer::ScorerParams;

/// Small random lattice; about one entry in eight is an impossible state.
pub fn lattice(
    max_frames: usize,
    max_phonemes: usize,
) -> impl Strategy<Value = (EmissionLattice, PhonemeVocab)> {
    (1..=max_frames, 1..=max_phonemes).prop_flat_map(|(frames, v)| {
        prop::collection::vec(prop::collection::vec(0.0..1.0f64, v + 1), frames).prop_map(
            move |rows| {
                let probs: Vec<Vec<f64>> = rows
                    .into_iter()
                    .map(|r| {
                        let mut r: Vec<f64> = r
                            .into_iter()
                            .map(|x| if x < 0.12 { 0.0 } else { x })
                            .collect();
                        if r.iter().all(|&x| x == 0.0) {
                            r[v] = 1.0;
                        }
                        let z: f64 = r.iter().sum();
                        r.into_iter().map(|x| x / z).collect()
                    })
                    .collect();
                (
                    EmissionLattice::from_probs(&probs, 10.0).unwrap(),
                    PhonemeVocab::numbered(v),
                )
            },
        )
    })
}

pub fn params(num_phonemes: usize, num_graphemes: usize) -> impl Strategy<Value = ScorerParams> {
    (
        prop::collection::vec(-2.0..2.0f64, (num_phonemes + 1) * num_graphemes),
        prop::array::uniform3(-1.5..1.5f64),
    )
        .prop_map(move |(emit, ops)| {
            ScorerParams::from_parts(num_phonemes, num_graphemes, emit, ops).unwrap()
        })
}

/// Every string over `0..vocab` of length at most `max_len`, shortest first.
pub fn all_strings(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s: &Vec<usize>| {
                (0..vocab).map(move |g| {
                    let mut t = s.clone();
                    t.push(g);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Central finite-difference gradient of `f` at every flat parameter.
pub fn numeric_grad(params: &ScorerParams, f: impl Fn(&ScorerParams) -> f64) -> Vec<f64> {
    let eps = 1e-5;
    (0..params.flat_len())
        .map(|i| {
            let mut up = params.clone();
            up.set_flat(i, params.get_flat(i) + eps);
            let mut down = params.clone();
            down.set_flat(i, params.get_flat(i) - eps);
            (f(&up) - f(&down)) / (2.0 * eps)
        })
        .collect()
}

/// Largest coordinate error relative to the largest gradient coordinate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
