//! Flags shared by `train` and `decode`, merged over an optional config file.

use std::path::PathBuf;

use clap::Args;
use serde_json::{Map, Value};
use skmarg_core::candidates::Strategy;
use skmarg_core::marginal::{
    apply_config_map, parse_config_text, CandidateWeighting, MarginalConfig, SgdConfig,
};

use crate::files::read_text;
use crate::Failure;

/// Every marginal and optimizer setting. Unset flags fall back to the
/// config file, then to the published defaults for the chosen strategy.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigFlags {
    /// `key = value` lines or a JSON object using the field names below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate strategy: tkm, randomized_tkm or skm.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Beam width (tkm, randomized_tkm) or number of samples (skm).
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Subset size for randomized_tkm; must be below K.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sampling temperature for skm.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Beam candidates marginalized over when decoding.
    #[arg(long = "decode_K", alias = "decode-K")]
    pub decode_k: Option<usize>,
    /// Grapheme beam per candidate when decoding.
    #[arg(long = "decode_beam", alias = "decode-beam")]
    pub decode_beam: Option<usize>,
    /// Draw fresh skm samples every step (true) or once (false).
    #[arg(long = "resample_each_step", alias = "resample-each-step")]
    pub resample_each_step: Option<bool>,
    /// Renormalize candidate weights over each set.
    #[arg(long)]
    pub renormalize: Option<bool>,
    /// Candidate weights: posterior or frequency.
    #[arg(long, value_parser = parse_weighting)]
    pub weighting: Option<CandidateWeighting>,
    /// SGD steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "learning_rate", alias = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "batch_size", alias = "batch-size")]
    pub batch_size: Option<usize>,
    /// Gradient L2 clip.
    #[arg(long = "clip_norm", alias = "clip-norm")]
    pub clip_norm: Option<f64>,
    /// Steps per loss record.
    #[arg(long = "log_every", alias = "log-every")]
    pub log_every: Option<usize>,
    /// Worker threads; results match a single worker.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_weighting(s: &str) -> Result<CandidateWeighting, String> {
    match s {
        "posterior" => Ok(CandidateWeighting::Posterior),
        "frequency" => Ok(CandidateWeighting::Frequency),
        _ => Err(format!("expected posterior or frequency, got {s:?}")),
    }
}

pub struct Resolved {
    pub marginal: MarginalConfig,
    pub sgd: SgdConfig,
    pub seed: u64,
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let mut map = match &self.config {
            Some(p) => parse_config_text(&read_text(p).map_err(Failure::config)?)
                .map_err(Failure::config)?,
            None => Map::new(),
        };
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("strategy", self.strategy.map(|s| Value::from(s.as_str())));
        set("K", self.k.map(Value::from));
        set("n", self.n.map(Value::from));
        set("temperature", self.temperature.map(Value::from));
        set("decode_K", self.decode_k.map(Value::from));
        set("decode_beam", self.decode_beam.map(Value::from));
        set(
            "resample_each_step",
            self.resample_each_step.map(Value::from),
        );
        set("renormalize", self.renormalize.map(Value::from));
        set(
            "weighting",
            self.weighting.map(|w| {
                Value::from(match w {
                    CandidateWeighting::Posterior => "posterior",
                    CandidateWeighting::Frequency => "frequency",
                })
            }),
        );
        set("steps", self.steps.map(Value::from));
        set("learning_rate", self.learning_rate.map(Value::from));
        set("batch_size", self.batch_size.map(Value::from));
        set("clip_norm", self.clip_norm.map(Value::from));
        set("log_every", self.log_every.map(Value::from));
        set("workers", self.workers.map(Value::from));
        set("seed", self.seed.map(Value::from));

        // defaults follow the strategy, wherever it was given
        let strategy = match map.get("strategy") {
            Some(Value::String(s)) => s
                .parse::<Strategy>()
                .map_err(|e| Failure::config(anyhow::anyhow!(e)))?,
            Some(other) => return Err(Failure::config(anyhow::anyhow!("bad strategy {other}"))),
            None => Strategy::Skm,
        };
        map.insert("strategy".into(), Value::from(strategy.as_str()));
        let (marginal, sgd, rest) = apply_config_map(
            &map,
            &MarginalConfig::published(strategy),
            &SgdConfig::default(),
            &["seed"],
        )
        .map_err(Failure::config)?;
        marginal.validate().map_err(Failure::config)?;
        sgd.validate().map_err(Failure::config)?;
        let seed = match rest.get("seed") {
            None => 0,
            Some(v) => v.as_u64().ok_or_else(|| {
                Failure::config(anyhow::anyhow!("seed must be a non-negative integer"))
            })?,
        };
        Ok(Resolved {
            marginal,
            sgd,
            seed,
        })
    }
}
