//! Netpbm bitmap I/O: ASCII `P1` and packed binary `P4`. Comments are
//! tolerated on load; saving always emits `P4` without comments, rows padded
//! to whole bytes per the PBM convention.

use std::path::Path;

use super::BinaryImage;
use crate::error::{NdudeError, Result};

pub fn load_pbm(path: &Path) -> Result<BinaryImage> {
    let raw = std::fs::read(path).map_err(|e| NdudeError::io(path, e))?;
    parse_pbm(&raw).map_err(|msg| NdudeError::format(path, msg))
}

fn parse_pbm(raw: &[u8]) -> std::result::Result<BinaryImage, String> {
    let mut cursor = 0usize;
    let magic = next_token(raw, &mut cursor).ok_or("missing magic number")?;
    match magic.as_slice() {
        b"P1" => parse_p1(raw, cursor),
        b"P4" => parse_p4(raw, cursor),
        other => Err(format!(
            "unsupported magic {:?}, expected P1 or P4",
            String::from_utf8_lossy(other)
        )),
    }
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token(raw: &[u8], cursor: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *cursor < raw.len() && raw[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < raw.len() && raw[*cursor] == b'#' {
            while *cursor < raw.len() && raw[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= raw.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < raw.len() && !raw[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    Some(raw[start..*cursor].to_vec())
}

fn parse_dim(raw: &[u8], cursor: &mut usize, what: &str) -> std::result::Result<usize, String> {
    let tok = next_token(raw, cursor).ok_or(format!("missing {what}"))?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .ok_or(format!("bad {what}: {:?}", String::from_utf8_lossy(&tok)))
}

fn parse_p1(raw: &[u8], mut cursor: usize) -> std::result::Result<BinaryImage, String> {
    let width = parse_dim(raw, &mut cursor, "width")?;
    let height = parse_dim(raw, &mut cursor, "height")?;
    let mut bits = Vec::with_capacity(width * height);
    // P1 raster: 0/1 digits, whitespace optional, comments allowed.
    while bits.len() < width * height {
        if cursor >= raw.len() {
            return Err(format!(
                "raster ended after {} of {} pixels",
                bits.len(),
                width * height
            ));
        }
        match raw[cursor] {
            b'0' => bits.push(0),
            b'1' => bits.push(1),
            b'#' => {
                while cursor < raw.len() && raw[cursor] != b'\n' {
                    cursor += 1;
                }
            }
            c if c.is_ascii_whitespace() => {}
            c => return Err(format!("unexpected byte {c:#04x} in P1 raster")),
        }
        cursor += 1;
    }
    BinaryImage::new(height, width, bits).map_err(|e| e.to_string())
}

fn parse_p4(raw: &[u8], mut cursor: usize) -> std::result::Result<BinaryImage, String> {
    let width = parse_dim(raw, &mut cursor, "width")?;
    let height = parse_dim(raw, &mut cursor, "height")?;
    // Exactly one whitespace byte separates the header from the raster.
    if cursor >= raw.len() || !raw[cursor].is_ascii_whitespace() {
        return Err("missing separator before P4 raster".into());
    }
    cursor += 1;
    let row_bytes = width.div_ceil(8);
    if raw.len() < cursor + row_bytes * height {
        return Err("truncated P4 raster".into());
    }
    let mut bits = Vec::with_capacity(width * height);
    for r in 0..height {
        let row = &raw[cursor + r * row_bytes..cursor + (r + 1) * row_bytes];
        for c in 0..width {
            let byte = row[c / 8];
            bits.push((byte >> (7 - c % 8)) & 1);
        }
    }
    BinaryImage::new(height, width, bits).map_err(|e| e.to_string())
}

pub fn save_pbm(path: &Path, img: &BinaryImage) -> Result<()> {
    let row_bytes = img.width.div_ceil(8);
    let mut out = format!("P4\n{} {}\n", img.width, img.height).into_bytes();
    out.reserve(row_bytes * img.height);
    for r in 0..img.height {
        let mut packed = vec![0u8; row_bytes];
        for c in 0..img.width {
            if img.get(r, c) == 1 {
                packed[c / 8] |= 1 << (7 - c % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}
