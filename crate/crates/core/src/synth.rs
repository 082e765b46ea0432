//! Synthetic grapheme/phoneme language and noisy lattice generator.
//!
//! Grapheme strings are drawn uniformly, rendered to phonemes through a
//! probabilistic g2p map, and turned into CTC lattices whose frames mix a
//! point mass on the intended state with a noise distribution.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Dirichlet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{EmissionLattice, LabelSeq, PhonemeVocab};
use crate::rng::RngState;
use crate::scorer::{GraphemeSeq, GraphemeVocab, ScorerParams, OP_DEL, OP_INS, OP_SUB};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid corpus settings: {0}")]
    InvalidSpec(String),
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("cannot synthesize a lattice for an empty label sequence")]
    EmptyLabels,
    #[error("oracle parameters need single-phoneme renderings; grapheme {0} has a longer one")]
    MultiPhonemeRendering(usize),
}

/// One way a grapheme can be pronounced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rendering {
    pub phonemes: Vec<usize>,
    pub prob: f64,
}

/// Shape of the noise mixed into each frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseProfile {
    /// Every state equally likely.
    Uniform,
    /// A fresh Dirichlet(alpha) draw per frame, so confusions differ by frame.
    Dirichlet { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_phonemes: usize,
    pub num_graphemes: usize,
    /// Indexed by grapheme.
    pub g2p: Vec<Vec<Rendering>>,
    pub min_len: usize,
    pub max_len: usize,
    pub frames_per_phoneme: usize,
    pub noise: f64,
    pub noise_profile: NoiseProfile,
    pub frame_shift_ms: f64,
    pub seed: u64,
}

const PROB_TOLERANCE: f64 = 1e-9;

impl SynthSpec {
    /// One-to-one g2p: grapheme `i` is always phoneme `i`.
    pub fn unambiguous(n: usize) -> Self {
        Self {
            num_phonemes: n,
            num_graphemes: n,
            g2p: (0..n)
                .map(|i| {
                    vec![Rendering {
                        phonemes: vec![i],
                        prob: 1.0,
                    }]
                })
                .collect(),
            min_len: 2,
            max_len: 5,
            frames_per_phoneme: 2,
            noise: 0.0,
            noise_profile: NoiseProfile::Uniform,
            frame_shift_ms: 10.0,
            seed: 0,
        }
    }

    /// The ambiguous benchmark language: 8 phonemes, 8 graphemes, four of
    /// which have a second, less likely pronunciation (one of them two
    /// phonemes long) that collides with another grapheme's.
    pub fn benchmark() -> Self {
        let mut spec = Self::unambiguous(8);
        let r = |phonemes: &[usize], prob: f64| Rendering {
            phonemes: phonemes.to_vec(),
            prob,
        };
        spec.g2p[0] = vec![r(&[0], 0.8), r(&[1], 0.2)];
        spec.g2p[2] = vec![r(&[2], 0.85), r(&[3], 0.15)];
        spec.g2p[5] = vec![r(&[5], 0.7), r(&[5, 6], 0.3)];
        spec.g2p[7] = vec![r(&[7], 0.85), r(&[6], 0.15)];
        spec.min_len = 3;
        spec.max_len = 6;
        spec.noise = 0.1;
        spec.noise_profile = NoiseProfile::Dirichlet { alpha: 0.3 };
        spec
    }

    pub fn phoneme_vocab(&self) -> PhonemeVocab {
        PhonemeVocab::numbered(self.num_phonemes)
    }

    pub fn grapheme_vocab(&self) -> GraphemeVocab {
        GraphemeVocab::letters(self.num_graphemes)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.num_phonemes == 0 || self.num_graphemes == 0 {
            return bad("vocabularies must be non-empty".into());
        }
        if self.g2p.len() != self.num_graphemes {
            return bad(format!(
                "g2p covers {} graphemes, expected {}",
                self.g2p.len(),
                self.num_graphemes
            ));
        }
        for (g, renderings) in self.g2p.iter().enumerate() {
            if renderings.is_empty() || renderings.len() > 2 {
                return bad(format!("grapheme {g} needs one or two renderings"));
            }
            let mut total = 0.0;
            for r in renderings {
                if r.phonemes.is_empty() || r.phonemes.iter().any(|&p| p >= self.num_phonemes) {
                    return bad(format!("grapheme {g} has an invalid rendering"));
                }
                if !(r.prob > 0.0 && r.prob <= 1.0) {
                    return bad(format!("grapheme {g} has rendering probability {}", r.prob));
                }
                total += r.prob;
            }
            if (total - 1.0).abs() > PROB_TOLERANCE {
                return bad(format!("grapheme {g} renderings sum to {total}"));
            }
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!(
                "length range [{}, {}] is empty or starts at 0",
                self.min_len, self.max_len
            ));
        }
        if self.frames_per_phoneme == 0 {
            return bad("frames_per_phoneme must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1), got {}", self.noise));
        }
        if let NoiseProfile::Dirichlet { alpha } = self.noise_profile {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad(format!("Dirichlet alpha must be positive, got {alpha}"));
            }
        }
        if !(self.frame_shift_ms > 0.0 && self.frame_shift_ms.is_finite()) {
            return bad("frame_shift_ms must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub y_true: GraphemeSeq,
    pub h_true: LabelSeq,
    pub lattice: EmissionLattice,
}

/// `count` examples; example `i` depends only on `(spec.seed, i)`.
pub fn gen_corpus(spec: &SynthSpec, count: usize) -> Result<Vec<SynthExample>, SynthError> {
    spec.validate()?;
    if count == 0 {
        return Err(SynthError::ZeroCount);
    }
    let renderers: Vec<WeightedIndex<f64>> = spec
        .g2p
        .iter()
        .map(|rs| WeightedIndex::new(rs.iter().map(|r| r.prob)).expect("validated"))
        .collect();
    (0..count)
        .map(|i| {
            let mut rng = RngState::stream2(spec.seed, 1, i as u32);
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            let y: Vec<usize> = (0..len)
                .map(|_| rng.gen_range(0..spec.num_graphemes))
                .collect();
            let mut h = Vec::new();
            for &g in &y {
                let r = &spec.g2p[g][renderers[g].sample(&mut rng)];
                h.extend_from_slice(&r.phonemes);
            }
            let h_true = LabelSeq::new(h);
            let lattice = synth_lattice(&h_true, spec, &mut rng)?;
            Ok(SynthExample {
                y_true: GraphemeSeq::new(y),
                h_true,
                lattice,
            })
        })
        .collect()
}

/// Lay out `h_true` with `frames_per_phoneme` frames per label and one
/// blank-leaning frame between consecutive labels, then add noise.
pub fn synth_lattice(
    h_true: &LabelSeq,
    spec: &SynthSpec,
    rng: &mut RngState,
) -> Result<EmissionLattice, SynthError> {
    if h_true.is_empty() {
        return Err(SynthError::EmptyLabels);
    }
    let states = spec.num_phonemes + 1;
    let blank = spec.num_phonemes;
    let mut intended = Vec::new();
    for (i, &p) in h_true.iter().enumerate() {
        if i > 0 {
            intended.push(blank);
        }
        intended.extend(std::iter::repeat_n(p, spec.frames_per_phoneme));
    }
    let dirichlet = match spec.noise_profile {
        NoiseProfile::Dirichlet { alpha } => {
            Some(Dirichlet::new_with_size(alpha, states).expect("validated alpha, >= 2 states"))
        }
        NoiseProfile::Uniform => None,
    };
    let rows = intended
        .into_iter()
        .map(|target| {
            let noise_dist: Vec<f64> = match &dirichlet {
                Some(d) => d.sample(rng),
                None => vec![1.0 / states as f64; states],
            };
            let mut row: Vec<f64> = noise_dist.iter().map(|u| spec.noise * u).collect();
            row[target] += 1.0 - spec.noise;
            let z: f64 = row.iter().sum();
            row.iter().map(|p| (p / z).ln()).collect()
        })
        .collect();
    EmissionLattice::from_rows(rows, spec.frame_shift_ms)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

/// Log-probability standing in for an impossible event in oracle logits.
const ORACLE_FLOOR: f64 = -30.0;

/// Transducer parameters that invert the g2p map: each phoneme emits
/// graphemes with probability `P(g | p)` under a uniform grapheme prior,
/// and insertions or deletions are all but ruled out.
pub fn oracle_params(spec: &SynthSpec) -> Result<ScorerParams, SynthError> {
    spec.validate()?;
    let mut params = ScorerParams::uniform(spec.num_phonemes, spec.num_graphemes);
    let mut joint = vec![vec![0.0; spec.num_graphemes]; spec.num_phonemes];
    for (g, renderings) in spec.g2p.iter().enumerate() {
        for r in renderings {
            if r.phonemes.len() != 1 {
                return Err(SynthError::MultiPhonemeRendering(g));
            }
            joint[r.phonemes[0]][g] += r.prob;
        }
    }
    for (p, row) in joint.iter().enumerate() {
        let z: f64 = row.iter().sum();
        if z == 0.0 {
            continue;
        }
        for (dst, &m) in params.emit_row_mut(p).iter_mut().zip(row) {
            *dst = if m > 0.0 { (m / z).ln() } else { ORACLE_FLOOR };
        }
    }
    params.op_logits[OP_SUB] = -ORACLE_FLOOR;
    params.op_logits[OP_INS] = 0.0;
    params.op_logits[OP_DEL] = 0.0;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::label_logprob;

    #[test]
    fn specs_validate() {
        SynthSpec::benchmark().validate().unwrap();
        SynthSpec::unambiguous(5).validate().unwrap();
        let mut s = SynthSpec::benchmark();
        s.noise = 1.0;
        assert!(s.validate().is_err());
        s.noise = 0.2;
        s.g2p[1][0].prob = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn noiseless_lattice_is_certain() {
        let spec = SynthSpec::unambiguous(3);
        let h = LabelSeq::new(vec![1, 1, 0]);
        let lat = synth_lattice(&h, &spec, &mut RngState::new(0)).unwrap();
        assert_eq!(lat.num_frames(), 3 * 2 + 2);
        assert_eq!(label_logprob(&lat, &h, &spec.phoneme_vocab()).unwrap(), 0.0);
    }

    #[test]
    fn heavy_noise_is_nearly_uniform() {
        let mut spec = SynthSpec::unambiguous(3);
        spec.noise = 0.999_999;
        let lat = synth_lattice(&LabelSeq::new(vec![2]), &spec, &mut RngState::new(0)).unwrap();
        for row in lat.rows() {
            for &x in row {
                assert!((x.exp() - 0.25).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn corpus_is_deterministic_and_consistent() {
        let spec = SynthSpec::benchmark();
        let a = gen_corpus(&spec, 20).unwrap();
        assert_eq!(a, gen_corpus(&spec, 20).unwrap());
        // prefixes agree: example i does not depend on count
        assert_eq!(a[..5], gen_corpus(&spec, 5).unwrap()[..]);
        for ex in &a {
            assert!((spec.min_len..=spec.max_len).contains(&ex.y_true.len()));
            assert!(ex.h_true.len() >= ex.y_true.len());
        }
    }

    #[test]
    fn oracle_inverts_unambiguous_map() {
        let p = oracle_params(&SynthSpec::unambiguous(3)).unwrap();
        assert_eq!(p.emit_row(1), &[ORACLE_FLOOR, 0.0, ORACLE_FLOOR]);
        assert!(matches!(
            oracle_params(&SynthSpec::benchmark()),
            Err(SynthError::MultiPhonemeRendering(5))
        ));
    }
}
