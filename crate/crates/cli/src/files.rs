//! Run-directory files and the hypothesis/timing TSV formats.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use skmarg_core::scorer::{GraphemeSeq, GraphemeVocab};

pub const CONFIG_ECHO: &str = "config.echo";
pub const PARAMS: &str = "params.txt";
pub const LOSS: &str = "loss.csv";
pub const HYPS: &str = "hyps.tsv";
pub const TIMING: &str = "timing.tsv";
pub const REPORT: &str = "report.tsv";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: String,
    pub y: GraphemeSeq,
    pub logprob: f64,
}

/// `id \t graphemes \t log-prob`, one utterance per line.
pub fn format_hyps(hyps: &[Hypothesis], vocab: &GraphemeVocab) -> String {
    hyps.iter()
        .map(|h| format!("{}\t{}\t{}\n", h.id, vocab.render(&h.y), h.logprob))
        .collect()
}

pub fn parse_hyps(text: &str, vocab: &GraphemeVocab) -> Result<Vec<Hypothesis>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                bail!("line {}: expected id, hypothesis and log-prob", i + 1);
            }
            Ok(Hypothesis {
                id: f[0].to_string(),
                y: vocab
                    .parse(f[1])
                    .with_context(|| format!("line {}", i + 1))?,
                logprob: f[2]
                    .parse()
                    .with_context(|| format!("line {}: log-prob", i + 1))?,
            })
        })
        .collect()
}

/// `id \t decode_seconds \t audio_seconds` after a header line.
pub fn format_timing(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::from("id\tdecode_seconds\taudio_seconds\n");
    for (id, wall, audio) in rows {
        out.push_str(&format!("{id}\t{wall:.6}\t{audio}\n"));
    }
    out
}

pub fn parse_timing(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("id\tdecode_seconds\taudio_seconds") {
        bail!("timing file lacks its header");
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 3 {
                bail!("timing row {l:?} needs three fields");
            }
            Ok((f[0].to_string(), f[1].parse()?, f[2].parse()?))
        })
        .collect()
}
