//! On-disk corpus layout.
//!
//! ```text
//! <dir>/manifest.tsv     id, frames, ref_len (header line first)
//! <dir>/<id>.lat         lattice text
//! <dir>/<id>.ref         space-joined graphemes
//! <dir>/phonemes.txt     one phoneme symbol per line
//! <dir>/graphemes.txt    one grapheme symbol per line
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lattice::{format_lattice, parse_lattice, EmissionLattice, LatticeError, PhonemeVocab};
use crate::scorer::{GraphemeSeq, GraphemeVocab, ScorerError};
use crate::synth::SynthExample;

pub const MANIFEST: &str = "manifest.tsv";
pub const MANIFEST_HEADER: &str = "id\tframes\tref_len";
pub const PHONEMES: &str = "phonemes.txt";
pub const GRAPHEMES: &str = "graphemes.txt";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: io::Error },
    #[error("{path}: {error}")]
    Lattice { path: PathBuf, error: LatticeError },
    #[error("{path}: {error}")]
    Scorer { path: PathBuf, error: ScorerError },
    #[error("{path}, line {line}: {msg}")]
    Manifest {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub id: String,
    pub lattice: EmissionLattice,
    pub reference: GraphemeSeq,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub phonemes: PhonemeVocab,
    pub graphemes: GraphemeVocab,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn from_examples(
        phonemes: PhonemeVocab,
        graphemes: GraphemeVocab,
        examples: &[SynthExample],
    ) -> Self {
        let entries = examples
            .iter()
            .enumerate()
            .map(|(i, ex)| CorpusEntry {
                id: utterance_id(i),
                lattice: ex.lattice.clone(),
                reference: ex.y_true.clone(),
            })
            .collect();
        Self {
            phonemes,
            graphemes,
            entries,
        }
    }

    /// `(lattice, reference)` pairs in manifest order.
    pub fn pairs(&self) -> Vec<(EmissionLattice, GraphemeSeq)> {
        self.entries
            .iter()
            .map(|e| (e.lattice.clone(), e.reference.clone()))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        create_dir(dir)?;
        write_file(&dir.join(PHONEMES), &lines(self.phonemes.symbols()))?;
        write_file(&dir.join(GRAPHEMES), &lines(self.graphemes.symbols()))?;
        let mut manifest = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            write_file(
                &dir.join(format!("{}.lat", e.id)),
                &format_lattice(&e.lattice),
            )?;
            write_file(
                &dir.join(format!("{}.ref", e.id)),
                &format!("{}\n", self.graphemes.render(&e.reference)),
            )?;
            manifest.push_str(&format!(
                "{}\t{}\t{}\n",
                e.id,
                e.lattice.num_frames(),
                e.reference.len()
            ));
        }
        write_file(&dir.join(MANIFEST), &manifest)
    }

    pub fn read(dir: &Path) -> Result<Self, CorpusError> {
        let phonemes = PhonemeVocab::new(read_symbols(&dir.join(PHONEMES))?).map_err(|error| {
            CorpusError::Lattice {
                path: dir.join(PHONEMES),
                error,
            }
        })?;
        let graphemes =
            GraphemeVocab::new(read_symbols(&dir.join(GRAPHEMES))?).map_err(|error| {
                CorpusError::Scorer {
                    path: dir.join(GRAPHEMES),
                    error,
                }
            })?;
        let manifest_path = dir.join(MANIFEST);
        let manifest = read_file(&manifest_path)?;
        let bad = |line: usize, msg: String| CorpusError::Manifest {
            path: manifest_path.clone(),
            line,
            msg,
        };
        let mut rows = manifest.lines().enumerate();
        match rows.next() {
            Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
            _ => return Err(bad(1, format!("expected header {MANIFEST_HEADER:?}"))),
        }
        let mut entries = Vec::new();
        for (i, line) in rows {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(i + 1, "expected 3 tab-separated fields".into()));
            }
            let id = fields[0].to_string();
            let lat_path = dir.join(format!("{id}.lat"));
            let lattice =
                parse_lattice(&read_file(&lat_path)?).map_err(|error| CorpusError::Lattice {
                    path: lat_path.clone(),
                    error,
                })?;
            if lattice.num_phonemes() != phonemes.len() {
                return Err(CorpusError::Lattice {
                    path: lat_path,
                    error: LatticeError::WidthMismatch {
                        lattice: lattice.num_phonemes(),
                        vocab: phonemes.len(),
                    },
                });
            }
            let ref_path = dir.join(format!("{id}.ref"));
            let reference =
                graphemes
                    .parse(&read_file(&ref_path)?)
                    .map_err(|error| CorpusError::Scorer {
                        path: ref_path,
                        error,
                    })?;
            if fields[1].parse::<usize>().ok() != Some(lattice.num_frames())
                || fields[2].parse::<usize>().ok() != Some(reference.len())
            {
                return Err(bad(
                    i + 1,
                    format!("sizes for {id} disagree with its files"),
                ));
            }
            entries.push(CorpusEntry {
                id,
                lattice,
                reference,
            });
        }
        Ok(Self {
            phonemes,
            graphemes,
            entries,
        })
    }
}

pub fn utterance_id(i: usize) -> String {
    format!("utt{i:05}")
}

fn lines(symbols: &[String]) -> String {
    symbols.iter().map(|s| format!("{s}\n")).collect()
}

fn read_symbols(path: &Path) -> Result<Vec<String>, CorpusError> {
    Ok(read_file(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|error| CorpusError::Io {
        path: dir.to_path_buf(),
        error,
    })
}

pub fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|error| CorpusError::Io {
        path: path.to_path_buf(),
        error,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CorpusError> {
    fs::write(path, contents).map_err(|error| CorpusError::Io {
        path: path.to_path_buf(),
        error,
    })
}
