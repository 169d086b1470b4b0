//! Tiny synthetic binary pattern images (stripes, checkerboards, half-planes,
//! glyph rasters). They stand in for natural-image corpora so the training
//! and evaluation pipelines are exercisable without bundled photographs: the
//! train and test sets share pattern families but no image.

use super::{BinaryImage, Corpus};
use crate::rng::SplitMix64;

pub fn stripes(height: usize, width: usize, period: usize, phase: usize, vertical: bool) -> BinaryImage {
    BinaryImage::from_fn(height, width, |r, c| {
        let axis = if vertical { c } else { r };
        (((axis + phase) / period) % 2) as u8
    })
}

pub fn checkerboard(height: usize, width: usize, cell: usize, phase: usize) -> BinaryImage {
    BinaryImage::from_fn(height, width, |r, c| {
        ((((r + phase) / cell) + ((c + phase) / cell)) % 2) as u8
    })
}

/// Half-plane `a*r + b*c >= threshold`.
pub fn half_plane(height: usize, width: usize, a: i64, b: i64, threshold: i64) -> BinaryImage {
    BinaryImage::from_fn(height, width, |r, c| {
        u8::from(a * r as i64 + b * c as i64 >= threshold)
    })
}

// 5x3 glyph bitmaps, row-major, loosely letter-shaped.
const GLYPHS: [[u8; 15]; 8] = [
    [0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 0, 1, 1, 0, 1], // A
    [1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 0, 1, 1, 1, 0], // B
    [0, 1, 1, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 1], // C
    [1, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1], // E
    [1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 0, 1, 1, 0, 1], // H
    [1, 1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 1, 1, 1], // I
    [1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0, 0], // P
    [1, 1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0], // T
];

/// Text-like raster: a grid of randomly chosen glyphs with 1-pixel spacing.
pub fn glyphs(height: usize, width: usize, seed: u64) -> BinaryImage {
    let mut rng = SplitMix64::new(seed);
    let (cell_h, cell_w) = (6usize, 4usize);
    let cols = width.div_ceil(cell_w);
    let rows = height.div_ceil(cell_h);
    let picks: Vec<usize> = (0..rows * cols).map(|_| rng.next_below(GLYPHS.len())).collect();
    BinaryImage::from_fn(height, width, |r, c| {
        let (gr, gc) = (r / cell_h, c / cell_w);
        let (ir, ic) = (r % cell_h, c % cell_w);
        if ir >= 5 || ic >= 3 {
            return 0; // spacing
        }
        GLYPHS[picks[gr * cols + gc]][ir * 3 + ic]
    })
}

/// Training-side pattern corpus: ten images covering all four families at
/// several scales.
pub fn train_corpus(height: usize, width: usize) -> Corpus {
    Corpus::Grids(vec![
        stripes(height, width, 2, 0, true),
        stripes(height, width, 3, 0, true),
        stripes(height, width, 3, 0, false),
        stripes(height, width, 4, 0, true),
        checkerboard(height, width, 2, 0),
        checkerboard(height, width, 3, 0),
        checkerboard(height, width, 4, 0),
        half_plane(height, width, 1, 1, (height + width) as i64 / 2),
        glyphs(height, width, 101),
        glyphs(height, width, 102),
    ])
}

/// Test-side pattern corpus: same four families but no image shared with
/// [`train_corpus`]: two images stay close to the training statistics
/// (shifted phase, fresh glyph text) and two drift away from them (an unseen
/// stripe period, a different half-plane slope).
pub fn test_corpus(height: usize, width: usize) -> Corpus {
    Corpus::Grids(vec![
        stripes(height, width, 5, 1, true),
        checkerboard(height, width, 3, 1),
        half_plane(height, width, 2, 1, (height + width) as i64 / 2),
        glyphs(height, width, 909),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_produce_valid_images() {
        for img in [
            stripes(16, 16, 2, 0, true),
            checkerboard(16, 16, 3, 1),
            half_plane(16, 16, 1, 1, 16),
            glyphs(16, 16, 5),
        ] {
            assert_eq!(img.bits().len(), 256);
            assert!(img.bits().iter().all(|&b| b <= 1));
        }
    }

    #[test]
    fn train_and_test_sets_are_disjoint() {
        let (Corpus::Grids(train), Corpus::Grids(test)) =
            (train_corpus(32, 32), test_corpus(32, 32))
        else {
            panic!("pattern corpora are image corpora");
        };
        for t in &test {
            assert!(train.iter().all(|tr| tr != t));
        }
    }

    #[test]
    fn glyphs_deterministic_by_seed() {
        assert_eq!(glyphs(24, 24, 7), glyphs(24, 24, 7));
        assert_ne!(glyphs(24, 24, 7), glyphs(24, 24, 8));
    }
}
