//! Sampled and top-K marginalization of a CTC phoneme recognizer's output
//! for phoneme-to-grapheme conversion.
//!
//! * [`lattice`]: emission lattices, collapse, the CTC forward pass, temperature.
//! * [`candidates`]: prefix beam search, sampled candidates, random subsets.
//! * [`scorer`]: a trainable edit-op transducer `p(y | h)`.
//! * [`marginal`]: the marginal over candidates, its gradient, training and decoding.
//! * [`synth`] / [`corpus`]: synthetic data and its directory layout.
//! * [`eval`]: WER, paired bootstrap and real-time factor.

pub mod candidates;
pub mod corpus;
pub mod eval;
pub mod lattice;
pub mod logmath;
pub mod marginal;
pub mod rng;
pub mod scorer;
pub mod synth;
