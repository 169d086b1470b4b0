//! Sliding-window context extraction and one-hot encoding.
//!
//! A context never contains the center symbol itself: 1D windows hold the k
//! symbols on each side, 2D windows hold an ell x ell patch with the center
//! skipped. Positions that fall outside the data are padding, so every
//! position of every input yields a window of the same length.

use crate::error::{NdudeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextKind {
    /// Double-sided 1D context of k symbols per side.
    OneD { k: usize },
    /// Square 2D patch of odd side ell, center excluded.
    TwoD { ell: usize },
}

impl ContextKind {
    pub fn window_len(&self) -> usize {
        match *self {
            ContextKind::OneD { k } => 2 * k,
            ContextKind::TwoD { ell } => ell * ell - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ContextKind::TwoD { ell } = *self {
            if ell < 3 || ell % 2 == 0 {
                return Err(NdudeError::InvalidParameter(format!(
                    "2D patch side must be odd and >= 3, got {ell}"
                )));
            }
        }
        Ok(())
    }

    /// Parses `1d:<k>` or `2d:<ell>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let kind = if let Some(k) = spec.strip_prefix("1d:") {
            ContextKind::OneD {
                k: k.parse().map_err(|_| {
                    NdudeError::InvalidParameter(format!("bad context order: {spec}"))
                })?,
            }
        } else if let Some(ell) = spec.strip_prefix("2d:") {
            ContextKind::TwoD {
                ell: ell.parse().map_err(|_| {
                    NdudeError::InvalidParameter(format!("bad patch side: {spec}"))
                })?,
            }
        } else {
            return Err(NdudeError::InvalidParameter(format!(
                "context spec must be 1d:<k> or 2d:<ell>, got {spec}"
            )));
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn describe(&self) -> String {
        match *self {
            ContextKind::OneD { k } => format!("1d:{k}"),
            ContextKind::TwoD { ell } => format!("2d:{ell}"),
        }
    }
}

/// The symbols around one position, in fixed scan order. `None` marks
/// out-of-bounds padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextWindow {
    pub kind: ContextKind,
    pub symbols: Vec<Option<u8>>,
}

/// Byte value marking padding inside a canonical context key.
const KEY_PAD: u8 = 0xFF;

impl ContextWindow {
    /// Canonical byte key: one byte per window cell, padding as 0xFF.
    /// Alphabets are limited to at most 255 symbols.
    pub fn key(&self) -> Vec<u8> {
        self.symbols
            .iter()
            .map(|s| match s {
                Some(v) => *v,
                None => KEY_PAD,
            })
            .collect()
    }

    /// One-hot encoding: one |Z|-block per cell, all-zero for padding.
    pub fn encode(&self, z_size: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.symbols.len() * z_size];
        self.encode_into(z_size, &mut out);
        out
    }

    /// Writes the encoding into a caller-provided buffer of exactly
    /// `window_len * z_size` entries.
    pub fn encode_into(&self, z_size: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.symbols.len() * z_size);
        out.fill(0.0);
        for (cell, sym) in self.symbols.iter().enumerate() {
            if let Some(v) = sym {
                debug_assert!((*v as usize) < z_size);
                out[cell * z_size + *v as usize] = 1.0;
            }
        }
    }
}

/// Extracts the double-sided 1D context `(Z_{i-k}..Z_{i-1}, Z_{i+1}..Z_{i+k})`.
pub fn extract_1d(seq: &[u8], i: usize, k: usize) -> ContextWindow {
    let mut symbols = Vec::with_capacity(2 * k);
    extract_1d_into(seq, i, k, &mut symbols);
    ContextWindow {
        kind: ContextKind::OneD { k },
        symbols,
    }
}

/// Allocation-free variant of [`extract_1d`] for hot loops.
pub fn extract_1d_into(seq: &[u8], i: usize, k: usize, symbols: &mut Vec<Option<u8>>) {
    debug_assert!(i < seq.len());
    symbols.clear();
    for offset in (1..=k).rev() {
        symbols.push(i.checked_sub(offset).map(|p| seq[p]));
    }
    for offset in 1..=k {
        symbols.push(seq.get(i + offset).copied());
    }
}

/// Extracts the row-major ell x ell patch around `(r, c)`, center excluded,
/// with zero padding of width `(ell - 1) / 2` at the image boundary.
pub fn extract_2d(
    bits: &[u8],
    height: usize,
    width: usize,
    r: usize,
    c: usize,
    ell: usize,
) -> Result<ContextWindow> {
    let kind = ContextKind::TwoD { ell };
    kind.validate()?;
    if bits.len() != height * width || r >= height || c >= width {
        return Err(NdudeError::DimensionMismatch(format!(
            "position ({r},{c}) outside {height}x{width} image"
        )));
    }
    let mut symbols = Vec::with_capacity(ell * ell - 1);
    extract_2d_into(bits, height, width, r, c, ell, &mut symbols);
    Ok(ContextWindow { kind, symbols })
}

/// Allocation-free variant of [`extract_2d`]; arguments must already be valid.
pub fn extract_2d_into(
    bits: &[u8],
    height: usize,
    width: usize,
    r: usize,
    c: usize,
    ell: usize,
    symbols: &mut Vec<Option<u8>>,
) {
    symbols.clear();
    let half = (ell / 2) as isize;
    for dr in -half..=half {
        for dc in -half..=half {
            if dr == 0 && dc == 0 {
                continue;
            }
            let rr = r as isize + dr;
            let cc = c as isize + dc;
            let inside =
                rr >= 0 && rr < height as isize && cc >= 0 && cc < width as isize;
            symbols.push(inside.then(|| bits[rr as usize * width + cc as usize]));
        }
    }
}

/// Encoded context with the center symbol's one-hot block appended: the
/// input layout of the direct-mapping (vanilla supervised) models.
pub fn encode_with_center(window: &ContextWindow, center: u8, z_size: usize) -> Vec<f64> {
    let mut out = vec![0.0; (window.symbols.len() + 1) * z_size];
    encode_with_center_into(window, center, z_size, &mut out);
    out
}

pub fn encode_with_center_into(
    window: &ContextWindow,
    center: u8,
    z_size: usize,
    out: &mut [f64],
) {
    let ctx_len = window.symbols.len() * z_size;
    window.encode_into(z_size, &mut out[..ctx_len]);
    out[ctx_len..].fill(0.0);
    debug_assert!((center as usize) < z_size);
    out[ctx_len + center as usize] = 1.0;
}
