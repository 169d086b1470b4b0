//! File-format detection and data-spec loading shared by the subcommands.
//!
//! A data spec is a file path (`.pbm`, `.fa`/`.fasta`), a directory of PBM
//! files (loaded in name order), or one of the self-contained builtins:
//!
//!   patterns:train[:<h>x<w>]     bundled pattern images (default 128x128)
//!   patterns:test[:<h>x<w>]
//!   seq-markov:<alphabet>:<stay>:<len>   synthetic Markov sequence
//!   seq-iid:<alphabet>:<len>             synthetic i.i.d. sequence

use std::path::{Path, PathBuf};

use ndude::data::{
    load_fasta, load_pbm, patterns, save_fasta, save_pbm, synthetic_sequence, BinaryImage,
    Corpus, ReadSet, SourceModel,
};
use ndude::error::{NdudeError, Result};
use ndude::rng::derive_seed;

/// Loaded data with enough shape information to write results back in the
/// same format.
pub enum Payload {
    Images(Vec<BinaryImage>),
    Reads(ReadSet),
}

impl Payload {
    pub fn corpus(&self) -> Corpus {
        match self {
            Payload::Images(imgs) => Corpus::Grids(imgs.clone()),
            Payload::Reads(reads) => Corpus::from_reads(reads),
        }
    }

    /// Rewraps denoised/corrupted symbol data in this payload's shape.
    pub fn with_corpus(&self, corpus: &Corpus) -> Result<Payload> {
        match (self, corpus) {
            (Payload::Images(_), Corpus::Grids(g)) => Ok(Payload::Images(g.clone())),
            (Payload::Reads(r), Corpus::Seqs(s)) => {
                Ok(Payload::Reads(r.with_reads(s.clone())?))
            }
            _ => Err(NdudeError::DimensionMismatch(
                "result corpus does not match the input payload shape".into(),
            )),
        }
    }
}

/// Loads a single input file, detecting PBM vs FASTA by extension then by
/// header sniffing.
pub fn load_file(path: &Path) -> Result<Payload> {
    match detect_format(path)? {
        Format::Pbm => Ok(Payload::Images(vec![load_pbm(path)?])),
        Format::Fasta => Ok(Payload::Reads(ReadSet::from_records(load_fasta(path)?)?)),
    }
}

/// Writes a payload to `path` in its native format.
pub fn save_file(path: &Path, payload: &Payload) -> Result<()> {
    match payload {
        Payload::Images(imgs) => match imgs.as_slice() {
            [img] => save_pbm(path, img),
            _ => Err(NdudeError::InvalidParameter(
                "cannot write a multi-image payload to a single PBM file".into(),
            )),
        },
        Payload::Reads(reads) => save_fasta(path, &reads.to_records()),
    }
}

enum Format {
    Pbm,
    Fasta,
}

fn detect_format(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pbm") => return Ok(Format::Pbm),
        Some("fa") | Some("fasta") => return Ok(Format::Fasta),
        _ => {}
    }
    let head = std::fs::read(path).map_err(|e| NdudeError::io(path, e))?;
    match head.first() {
        Some(b'P') => Ok(Format::Pbm),
        Some(b'>') => Ok(Format::Fasta),
        _ => Err(NdudeError::format(
            path,
            "cannot detect format (expected PBM or FASTA)",
        )),
    }
}

/// Loads a data spec into a corpus (for training inputs, where per-item
/// identity does not need to survive).
pub fn load_spec(spec: &str, seed: u64) -> Result<Corpus> {
    if let Some(rest) = spec.strip_prefix("patterns:") {
        return patterns_spec(rest);
    }
    if let Some(rest) = spec.strip_prefix("seq-markov:") {
        let (alphabet, stay, len) = parse3(rest, spec)?;
        let seq = synthetic_sequence(
            len,
            alphabet,
            SourceModel::Markov { stay_prob: stay },
            derive_seed(seed, 0x5E9),
        )?;
        return Ok(Corpus::from_seq(seq));
    }
    if let Some(rest) = spec.strip_prefix("seq-iid:") {
        let (alphabet, len) = rest
            .split_once(':')
            .and_then(|(a, l)| Some((a.parse().ok()?, l.parse().ok()?)))
            .ok_or_else(|| {
                NdudeError::InvalidParameter(format!("bad seq-iid spec: {spec}"))
            })?;
        let seq = synthetic_sequence(
            len,
            alphabet,
            SourceModel::IidUniform,
            derive_seed(seed, 0x11D),
        )?;
        return Ok(Corpus::from_seq(seq));
    }

    let path = Path::new(spec);
    let meta = std::fs::metadata(path).map_err(|e| NdudeError::io(path, e))?;
    if meta.is_dir() {
        let mut pbms: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| NdudeError::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("pbm"))
            .collect();
        pbms.sort();
        if pbms.is_empty() {
            return Err(NdudeError::InvalidParameter(format!(
                "directory {spec} contains no .pbm files"
            )));
        }
        let images: Result<Vec<BinaryImage>> = pbms.iter().map(|p| load_pbm(p)).collect();
        return Ok(Corpus::Grids(images?));
    }
    Ok(load_file(path)?.corpus())
}

fn patterns_spec(rest: &str) -> Result<Corpus> {
    let (which, dims) = match rest.split_once(':') {
        Some((w, d)) => (w, Some(d)),
        None => (rest, None),
    };
    let (h, w) = match dims {
        None => (128, 128),
        Some(d) => d
            .split_once('x')
            .and_then(|(h, w)| Some((h.parse().ok()?, w.parse().ok()?)))
            .ok_or_else(|| {
                NdudeError::InvalidParameter(format!("bad pattern dims: {d} (want <h>x<w>)"))
            })?,
    };
    match which {
        "train" => Ok(patterns::train_corpus(h, w)),
        "test" => Ok(patterns::test_corpus(h, w)),
        other => Err(NdudeError::InvalidParameter(format!(
            "unknown pattern set: {other} (want train or test)"
        ))),
    }
}

fn parse3(rest: &str, spec: &str) -> Result<(usize, f64, usize)> {
    let parts: Vec<&str> = rest.split(':').collect();
    if let [a, s, l] = parts.as_slice() {
        if let (Ok(a), Ok(s), Ok(l)) = (a.parse(), s.parse(), l.parse()) {
            return Ok((a, s, l));
        }
    }
    Err(NdudeError::InvalidParameter(format!(
        "bad spec: {spec} (want seq-markov:<alphabet>:<stay>:<len>)"
    )))
}

/// Loads several data specs and concatenates them into one corpus; all specs
/// must yield the same corpus kind.
pub fn load_specs(specs: &[String], seed: u64) -> Result<Corpus> {
    let mut loaded = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        loaded.push(load_spec(spec, derive_seed(seed, i as u64))?);
    }
    merge(loaded)
}

fn merge(corpora: Vec<Corpus>) -> Result<Corpus> {
    let mut iter = corpora.into_iter();
    let mut acc = iter
        .next()
        .ok_or_else(|| NdudeError::InvalidParameter("no data specs given".into()))?;
    for c in iter {
        acc = match (acc, c) {
            (Corpus::Seqs(mut a), Corpus::Seqs(b)) => {
                a.extend(b);
                Corpus::Seqs(a)
            }
            (Corpus::Grids(mut a), Corpus::Grids(b)) => {
                a.extend(b);
                Corpus::Grids(a)
            }
            _ => {
                return Err(NdudeError::InvalidParameter(
                    "cannot mix image and sequence data specs".into(),
                ))
            }
        };
    }
    Ok(acc)
}
