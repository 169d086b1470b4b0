//! Discrete universal denoising toolkit.
//!
//! Implements the count-based DUDE baseline and Neural DUDE (a sliding-window
//! denoiser realized by a small fully-connected network trained on
//! pseudo-labels derived from the noise channel alone), together with
//! supervised pre-training, blind (composite-noise) pre-training, and adaptive
//! fine-tuning on the noisy data subject to denoising. Supports 1D sequences
//! (including DNA reads over {A,C,G,T}) and binary images with 2D patch
//! contexts, plus a reduced output head that scales to larger alphabets.

pub mod channel;
pub mod context;
pub mod data;
pub mod denoiser;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{NdudeError, Result};
