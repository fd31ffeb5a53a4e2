//! Stochastic frequency masking (SFM) for image-restoration training data.
//!
//! SFM removes a random quarter-annulus of an image's DCT-II coefficients.
//! This crate provides the transform, the two mask samplers (central and
//! targeted), the masking operator itself, the synthetic degradations used
//! alongside it (blur, downsampling, noise), radial spectral analysis tools,
//! and a deterministic batch pipeline.

pub mod degrade;
pub mod error;
pub mod image;
pub mod io;
pub mod mask;
pub mod pipeline;
pub mod sfm;
pub mod spectra;
pub mod transform;

pub use error::{Error, Result};
pub use image::{Image, NominalRange};
pub use mask::{Mask, MaskMode, MaskSpec};
pub use sfm::{apply_sfm, maybe_apply_sfm, SfmConfig, SfmMode};
pub use transform::{dct2_forward, dct2_inverse, Spectrum};
