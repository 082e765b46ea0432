use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use skmarg_core::corpus::Corpus;
use skmarg_core::synth::{gen_corpus, oracle_params, NoiseProfile, SynthSpec};

use crate::files::{write_text, CONFIG_ECHO};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Language {
    /// 8 phonemes and graphemes with four ambiguous pronunciations.
    Benchmark,
    /// Grapheme i is always phoneme i.
    Unambiguous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Profile {
    Uniform,
    Dirichlet,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Corpus directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of utterances.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub count: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Language::Benchmark)]
    pub language: Language,
    /// Inventory size for the unambiguous language.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Weight of the noise distribution in every frame, in [0, 1).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long = "noise_profile", alias = "noise-profile", value_enum)]
    pub noise_profile: Option<Profile>,
    /// Concentration of the Dirichlet noise profile.
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long = "frames_per_phoneme", alias = "frames-per-phoneme")]
    pub frames_per_phoneme: Option<usize>,
    /// Shortest utterance, in graphemes.
    #[arg(long = "min_len", alias = "min-len")]
    pub min_len: Option<usize>,
    /// Longest utterance, in graphemes.
    #[arg(long = "max_len", alias = "max-len")]
    pub max_len: Option<usize>,
    #[arg(long = "frame_shift_ms", alias = "frame-shift-ms")]
    pub frame_shift_ms: Option<f64>,
    /// Also write parameters that invert the g2p map (single-phoneme
    /// pronunciations only).
    #[arg(long = "oracle_params", alias = "oracle-params")]
    pub oracle_params: Option<PathBuf>,
}

impl GenArgs {
    pub fn spec(&self) -> SynthSpec {
        let mut spec = match self.language {
            Language::Benchmark => SynthSpec::benchmark(),
            Language::Unambiguous => SynthSpec::unambiguous(self.size),
        };
        spec.seed = self.seed;
        if let Some(x) = self.noise {
            spec.noise = x;
        }
        match self.noise_profile {
            Some(Profile::Uniform) => spec.noise_profile = NoiseProfile::Uniform,
            Some(Profile::Dirichlet) => {
                spec.noise_profile = NoiseProfile::Dirichlet { alpha: self.alpha }
            }
            None => {}
        }
        if let Some(x) = self.frames_per_phoneme {
            spec.frames_per_phoneme = x;
        }
        if let Some(x) = self.min_len {
            spec.min_len = x;
        }
        if let Some(x) = self.max_len {
            spec.max_len = x;
        }
        if let Some(x) = self.frame_shift_ms {
            spec.frame_shift_ms = x;
        }
        spec
    }
}

pub fn run(args: GenArgs) -> CmdResult {
    let spec = args.spec();
    spec.validate().map_err(Failure::config)?;
    let oracle = match &args.oracle_params {
        Some(_) => Some(oracle_params(&spec).map_err(Failure::config)?),
        None => None,
    };
    let examples = gen_corpus(&spec, args.count as usize).map_err(Failure::runtime)?;
    let corpus = Corpus::from_examples(spec.phoneme_vocab(), spec.grapheme_vocab(), &examples);
    corpus.write(&args.out).map_err(Failure::runtime)?;

    let echo = serde_json::to_string_pretty(&spec)
        .context("serializing spec")
        .map_err(Failure::runtime)?;
    write_text(
        &args.out.join(CONFIG_ECHO),
        &format!("count={}\nspec={echo}\n", args.count),
    )
    .map_err(Failure::runtime)?;
    if let (Some(path), Some(p)) = (&args.oracle_params, oracle) {
        write_text(path, &p.to_text()).map_err(Failure::runtime)?;
    }

    let frames: usize = corpus.entries.iter().map(|e| e.lattice.num_frames()).sum();
    let tokens: usize = corpus.entries.iter().map(|e| e.reference.len()).sum();
    println!(
        "wrote {} utterances to {} ({frames} frames, {tokens} reference graphemes, noise {})",
        corpus.entries.len(),
        args.out.display(),
        spec.noise
    );
    Ok(())
}
