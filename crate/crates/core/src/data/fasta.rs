//! FASTA I/O for ACGT sequences. Lowercase is accepted on load, uppercase is
//! emitted; any other base (including N) is rejected with its position.

use std::path::Path;

use super::{ReadSet, ReferenceSequence};
use crate::error::{NdudeError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    pub description: Option<String>,
    /// Base indices A=0, C=1, G=2, T=3.
    pub seq: Vec<u8>,
}

pub fn base_index(c: char) -> Option<u8> {
    match c.to_ascii_uppercase() {
        'A' => Some(0),
        'C' => Some(1),
        'G' => Some(2),
        'T' => Some(3),
        _ => None,
    }
}

pub fn base_char(b: u8) -> char {
    super::DNA_BASES[b as usize]
}

pub fn load_fasta(path: &Path) -> Result<Vec<FastaRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| NdudeError::io(path, e))?;
    let mut records: Vec<FastaRecord> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let mut parts = header.splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(NdudeError::format(
                    path,
                    format!("empty record id on line {}", line_no + 1),
                ));
            }
            let description = parts.next().map(|d| d.trim().to_string()).filter(|d| !d.is_empty());
            records.push(FastaRecord {
                id,
                description,
                seq: Vec::new(),
            });
            continue;
        }
        let record = records.last_mut().ok_or_else(|| {
            NdudeError::format(
                path,
                format!("sequence data before any `>` header on line {}", line_no + 1),
            )
        })?;
        for c in line.chars() {
            match base_index(c) {
                Some(b) => record.seq.push(b),
                None => {
                    return Err(NdudeError::format(
                        path,
                        format!(
                            "invalid base {c:?} at position {} of record {}",
                            record.seq.len() + 1,
                            record.id
                        ),
                    ))
                }
            }
        }
    }
    if records.is_empty() {
        return Err(NdudeError::format(path, "no records found"));
    }
    Ok(records)
}

const LINE_WIDTH: usize = 70;

pub fn save_fasta(path: &Path, records: &[FastaRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        match &rec.description {
            Some(d) => out.push_str(&format!(">{} {}\n", rec.id, d)),
            None => out.push_str(&format!(">{}\n", rec.id)),
        }
        for chunk in rec.seq.chunks(LINE_WIDTH) {
            out.extend(chunk.iter().map(|&b| base_char(b)));
            out.push('\n');
        }
        if rec.seq.is_empty() {
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

impl ReadSet {
    /// Builds a read set from FASTA records, recovering `offset=<n>`
    /// annotations when present.
    pub fn from_records(records: Vec<FastaRecord>) -> Result<Self> {
        let mut ids = Vec::with_capacity(records.len());
        let mut reads = Vec::with_capacity(records.len());
        let mut offsets = Vec::with_capacity(records.len());
        for rec in records {
            offsets.push(rec.description.as_deref().and_then(parse_offset));
            ids.push(rec.id);
            reads.push(rec.seq);
        }
        ReadSet::new(ids, reads, offsets)
    }

    pub fn to_records(&self) -> Vec<FastaRecord> {
        (0..self.len())
            .map(|i| FastaRecord {
                id: self.ids[i].clone(),
                description: self.offsets[i].map(|o| format!("offset={o}")),
                seq: self.reads[i].clone(),
            })
            .collect()
    }
}

fn parse_offset(desc: &str) -> Option<usize> {
    desc.split_whitespace()
        .find_map(|tok| tok.strip_prefix("offset="))
        .and_then(|v| v.parse().ok())
}

impl ReferenceSequence {
    pub fn from_record(rec: FastaRecord) -> Result<Self> {
        ReferenceSequence::new(rec.id, rec.seq)
    }

    pub fn to_record(&self) -> FastaRecord {
        FastaRecord {
            id: self.label.clone(),
            description: None,
            seq: self.symbols.clone(),
        }
    }
}
