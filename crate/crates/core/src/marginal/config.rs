//! Marginal-training configuration and its file format.
//!
//! Config files are either `key = value` lines (`#` comments allowed) or a
//! single JSON object. Keys match the struct field names below exactly
//! (`K`, `n`, `decode_K`, ...).

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::MarginalError;
use crate::candidates::Strategy;

/// How candidates are weighted inside the marginal sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateWeighting {
    /// `p(h | x)` from the CTC forward pass.
    Posterior,
    /// Sample multiplicity `count / total_count` (Monte-Carlo estimate).
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginalConfig {
    pub strategy: Strategy,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub temperature: f64,
    #[serde(rename = "decode_K")]
    pub decode_k: usize,
    pub decode_beam: usize,
    pub resample_each_step: bool,
    /// Renormalize candidate weights over the set before summing.
    pub renormalize: bool,
    pub weighting: CandidateWeighting,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        Self::published(Strategy::Skm)
    }
}

impl MarginalConfig {
    /// Published settings: TKM top-8, randomized TKM n=8 of K=32, SKM K=8
    /// at T=1.5; decoding marginalizes over the top 8 beam candidates.
    pub fn published(strategy: Strategy) -> Self {
        let (k, n) = match strategy {
            Strategy::Tkm => (8, 8),
            Strategy::RandomizedTkm => (32, 8),
            Strategy::Skm => (8, 8),
        };
        Self {
            strategy,
            k,
            n,
            temperature: 1.5,
            decode_k: 8,
            decode_beam: 4,
            resample_each_step: true,
            renormalize: false,
            weighting: CandidateWeighting::Posterior,
        }
    }

    pub fn validate(&self) -> Result<(), MarginalError> {
        let bad = |m: String| Err(MarginalError::Config(m));
        if self.k == 0 || self.decode_k == 0 || self.decode_beam == 0 {
            return bad("K, decode_K and decode_beam must be at least 1".into());
        }
        if self.strategy == Strategy::RandomizedTkm && !(self.n >= 1 && self.n < self.k) {
            return bad(format!(
                "randomized_tkm needs 1 <= n < K, got n={} K={}",
                self.n, self.k
            ));
        }
        if self.strategy == Strategy::Skm
            && !(self.temperature > 0.0 && self.temperature.is_finite())
        {
            return bad(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 9] = [
        "strategy",
        "K",
        "n",
        "temperature",
        "decode_K",
        "decode_beam",
        "resample_each_step",
        "renormalize",
        "weighting",
    ];
}

/// Stochastic gradient settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub log_every: usize,
    pub workers: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            learning_rate: 0.5,
            batch_size: 16,
            clip_norm: 5.0,
            log_every: 50,
            workers: 1,
        }
    }
}

impl SgdConfig {
    pub const KEYS: [&'static str; 6] = [
        "steps",
        "learning_rate",
        "batch_size",
        "clip_norm",
        "log_every",
        "workers",
    ];

    pub fn validate(&self) -> Result<(), MarginalError> {
        if self.batch_size == 0 || self.log_every == 0 || self.workers == 0 {
            return Err(MarginalError::Config(
                "batch_size, log_every and workers must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(MarginalError::Config("learning_rate must be >= 0".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(MarginalError::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Parse `key = value` lines or a JSON object into a flat key map.
pub fn parse_config_text(text: &str) -> Result<Map<String, Value>, MarginalError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return serde_json::from_str::<Map<String, Value>>(trimmed)
            .map_err(|e| MarginalError::Config(format!("config JSON: {e}")));
    }
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| MarginalError::Config(format!("line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().to_string(), scalar(v.trim()));
    }
    Ok(map)
}

fn scalar(v: &str) -> Value {
    if let Ok(b) = v.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(u) = v.parse::<u64>() {
        return Value::from(u);
    }
    if let Ok(f) = v.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(f) {
            return Value::Number(n);
        }
    }
    Value::String(v.to_string())
}

/// Split a key map into marginal and SGD sections, starting from `base`
/// values. `extra` keys are accepted and returned untouched.
pub fn apply_config_map(
    map: &Map<String, Value>,
    base: &MarginalConfig,
    sgd_base: &SgdConfig,
    extra: &[&str],
) -> Result<(MarginalConfig, SgdConfig, Map<String, Value>), MarginalError> {
    let mut marginal = match serde_json::to_value(base) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    let mut sgd = match serde_json::to_value(sgd_base) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    let mut rest = Map::new();
    for (k, v) in map {
        if MarginalConfig::KEYS.contains(&k.as_str()) {
            marginal.insert(k.clone(), v.clone());
        } else if SgdConfig::KEYS.contains(&k.as_str()) {
            sgd.insert(k.clone(), v.clone());
        } else if extra.contains(&k.as_str()) {
            rest.insert(k.clone(), v.clone());
        } else {
            return Err(MarginalError::Config(format!("unknown config key {k:?}")));
        }
    }
    let marginal: MarginalConfig = serde_json::from_value(Value::Object(marginal))
        .map_err(|e| MarginalError::Config(e.to_string()))?;
    let sgd: SgdConfig = serde_json::from_value(Value::Object(sgd))
        .map_err(|e| MarginalError::Config(e.to_string()))?;
    Ok((marginal, sgd, rest))
}

/// `key=value` lines for every field, sorted by key.
pub fn config_to_kv(marginal: &MarginalConfig, sgd: &SgdConfig) -> String {
    let mut out = String::new();
    for v in [serde_json::to_value(marginal), serde_json::to_value(sgd)] {
        if let Ok(Value::Object(m)) = v {
            for (k, v) in m {
                let s = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                out.push_str(&format!("{k}={s}\n"));
            }
        }
    }
    out
}
