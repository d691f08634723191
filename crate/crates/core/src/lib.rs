//! Segmentation verification without reference masks.
//!
//! A generative reconstructor inpaints the image region masked by a
//! strip around a candidate segmentation boundary; a windowed structural
//! similarity score between the original and the reconstruction feeds a
//! thresholded Accept / Uncertain / Reject verdict. A black-box
//! regression scorer is provided as the fragile baseline, together with
//! sign-gradient attacks against both scorers and a deterministic
//! synthetic dataset generator to exercise the whole pipeline.

pub mod attacks;
pub mod error;
pub mod image;
pub mod nnet;
pub mod pgm;
pub mod ssim;
pub mod stats;
pub mod synthdata;
pub mod verify;

pub use error::{Error, Result};
