//! Stochastic frequency masking of whole images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::{max_radius, realize, sample_central, sample_targeted, Mask, MaskSpec};
use crate::transform::{Dct2dPlan, Spectrum};

pub const DEFAULT_RATE: f64 = 0.5;
/// Target radius of the denoising recipe, as a fraction of `r_max`.
pub const DEFAULT_TARGET_CENTER: f64 = 0.85;
/// Half-normal scale of the denoising recipe, as a fraction of `r_max`.
pub const DEFAULT_TARGET_SIGMA: f64 = 0.15;

fn default_rate() -> f64 {
    DEFAULT_RATE
}

fn default_center() -> f64 {
    DEFAULT_TARGET_CENTER
}

fn default_sigma() -> f64 {
    DEFAULT_TARGET_SIGMA
}

/// Sampling mode. Targeted parameters are fractions of each image's `r_max`
/// so a single config applies across raster sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SfmMode {
    Central,
    Targeted {
        #[serde(default = "default_center")]
        r_center: f64,
        #[serde(default = "default_sigma")]
        sigma_delta: f64,
    },
}

impl SfmMode {
    pub fn targeted_default() -> Self {
        SfmMode::Targeted {
            r_center: DEFAULT_TARGET_CENTER,
            sigma_delta: DEFAULT_TARGET_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfmConfig {
    #[serde(flatten)]
    pub mode: SfmMode,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub clamp_output: bool,
}

impl Default for SfmConfig {
    fn default() -> Self {
        SfmConfig {
            mode: SfmMode::Central,
            rate: DEFAULT_RATE,
            clamp_output: false,
        }
    }
}

impl SfmConfig {
    pub fn central(rate: f64) -> Self {
        SfmConfig {
            mode: SfmMode::Central,
            rate,
            clamp_output: false,
        }
    }

    pub fn targeted(rate: f64, r_center: f64, sigma_delta: f64) -> Self {
        SfmConfig {
            mode: SfmMode::Targeted {
                r_center,
                sigma_delta,
            },
            rate,
            clamp_output: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::invalid(format!(
                "rate must lie in [0, 1], got {}",
                self.rate
            )));
        }
        if let SfmMode::Targeted {
            r_center,
            sigma_delta,
        } = self.mode
        {
            if !(0.0..=1.0).contains(&r_center) {
                return Err(Error::invalid(format!(
                    "targeted r_center is a fraction of r_max in [0, 1], got {r_center}"
                )));
            }
            if !(sigma_delta > 0.0 && sigma_delta.is_finite()) {
                return Err(Error::invalid(format!(
                    "targeted sigma_delta must be positive, got {sigma_delta}"
                )));
            }
        }
        Ok(())
    }

    /// Draws a mask spec for an image of the given dims, per the configured mode.
    pub fn sample_spec<R: Rng + ?Sized>(
        &self,
        dims: (usize, usize),
        rng: &mut R,
    ) -> Result<MaskSpec> {
        match self.mode {
            SfmMode::Central => sample_central(dims, rng),
            SfmMode::Targeted {
                r_center,
                sigma_delta,
            } => {
                let r_max = max_radius(dims);
                sample_targeted(dims, r_center * r_max, sigma_delta * r_max, rng)
            }
        }
    }
}

fn apply_mask_in_place(spec: &mut Spectrum, mask: &Mask) {
    let plane = mask.height() * mask.width();
    for channel in spec.coeffs_mut().chunks_exact_mut(plane) {
        for (c, keep) in channel.iter_mut().zip(mask.bits()) {
            if !keep {
                *c = 0.0;
            }
        }
    }
}

/// Multiplies every channel's DCT by the same binary mask and transforms back.
pub fn apply_mask(img: &Image, mask: &Mask) -> Result<Image> {
    if (mask.height(), mask.width()) != img.dims() {
        return Err(Error::invalid(format!(
            "mask is {}x{} but image is {}x{}",
            mask.height(),
            mask.width(),
            img.height(),
            img.width()
        )));
    }
    let plan = Dct2dPlan::new(img.height(), img.width())?;
    let mut spec = plan.forward(img)?;
    apply_mask_in_place(&mut spec, mask);
    plan.inverse(&spec)
}

/// Realizes `spec` for the image and applies it. The output is not clamped.
pub fn apply_sfm(img: &Image, spec: &MaskSpec) -> Result<(Image, Mask)> {
    let mask = realize(spec, img.dims())?;
    let out = apply_mask(img, &mask)?;
    Ok((out, mask))
}

#[derive(Debug, Clone)]
pub struct SfmOutcome {
    pub image: Image,
    pub applied: bool,
    pub spec: Option<MaskSpec>,
    /// Samples changed by output clamping (0 unless `clamp_output` is set).
    pub clamped: usize,
}

/// Applies SFM with probability `cfg.rate`.
///
/// Always consumes exactly one `f64` (the gate) and one `u64` (the seed of
/// a child stream used for mask sampling) from `rng`, whether or not the
/// gate fires, so downstream draws do not shift with the outcome.
pub fn maybe_apply_sfm<R: Rng + ?Sized>(
    img: &Image,
    cfg: &SfmConfig,
    rng: &mut R,
) -> Result<SfmOutcome> {
    cfg.validate()?;
    let gate = rng.random::<f64>();
    let child_seed = rng.random::<u64>();
    if gate >= cfg.rate {
        return Ok(SfmOutcome {
            image: img.clone(),
            applied: false,
            spec: None,
            clamped: 0,
        });
    }
    let mut child = ChaCha8Rng::seed_from_u64(child_seed);
    let spec = cfg.sample_spec(img.dims(), &mut child)?;
    let (mut image, _) = apply_sfm(img, &spec)?;
    let clamped = if cfg.clamp_output {
        image.clamp_to_range()
    } else {
        0
    };
    Ok(SfmOutcome {
        image,
        applied: true,
        spec: Some(spec),
        clamped,
    })
}
