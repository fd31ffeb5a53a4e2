//! Quarter-annulus masks over the DCT coefficient grid.
//!
//! Coefficient `(u, v)` sits at radius `sqrt(u^2 + v^2)` measured in index
//! units from the DC corner. A mask removes every coefficient whose radius
//! falls in the half-open interval `[r_inner, r_outer)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a [`MaskSpec`] was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MaskMode {
    /// Both radii drawn uniformly from `[0, r_max]`.
    Central,
    /// Radii drawn as half-normal offsets around `r_center`.
    Targeted { r_center: f64, sigma_delta: f64 },
}

/// A realized set of annulus radii for one raster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    #[serde(flatten)]
    pub mode: MaskMode,
    pub r_inner: f64,
    pub r_outer: f64,
    pub r_max: f64,
}

/// `sqrt(a^2 + b^2)` for a raster of `a` by `b` samples.
pub fn max_radius(dims: (usize, usize)) -> f64 {
    let (a, b) = (dims.0 as f64, dims.1 as f64);
    (a * a + b * b).sqrt()
}

fn check_dims(dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::invalid(format!(
            "mask dimensions must be non-zero, got {}x{}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

impl MaskSpec {
    /// Builds a spec from explicit radii (no sampling involved).
    pub fn with_radii(dims: (usize, usize), r_inner: f64, r_outer: f64) -> Result<Self> {
        check_dims(dims)?;
        if !(r_inner >= 0.0 && r_inner <= r_outer && r_outer.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 <= r_inner <= r_outer, got [{r_inner}, {r_outer})"
            )));
        }
        Ok(MaskSpec {
            mode: MaskMode::Central,
            r_inner,
            r_outer,
            r_max: max_radius(dims),
        })
    }

    /// Whether a coefficient at radius `r` is removed by this spec.
    #[inline]
    pub fn masks_radius(&self, r: f64) -> bool {
        self.r_inner <= r && r < self.r_outer
    }

    /// True when this spec's annulus contains `other`'s.
    pub fn contains(&self, other: &MaskSpec) -> bool {
        self.r_inner <= other.r_inner && other.r_outer <= self.r_outer
    }
}

/// Central mode: two independent `Uniform[0, r_max]` draws, ordered.
///
/// Consumes exactly two `f64` draws from `rng`.
pub fn sample_central<R: Rng + ?Sized>(dims: (usize, usize), rng: &mut R) -> Result<MaskSpec> {
    check_dims(dims)?;
    let r_max = max_radius(dims);
    let a = rng.random::<f64>() * r_max;
    let b = rng.random::<f64>() * r_max;
    Ok(central_from_draws(r_max, a, b))
}

fn central_from_draws(r_max: f64, a: f64, b: f64) -> MaskSpec {
    let (r_inner, r_outer) = if a > b { (b, a) } else { (a, b) };
    MaskSpec {
        mode: MaskMode::Central,
        r_inner,
        r_outer,
        r_max,
    }
}

/// Targeted mode: `[r_center - d_in, r_center + d_out]` with both offsets
/// half-normal with scale `sigma_delta`.
///
/// The inner radius is clipped at 0 and the outer one at `r_max * sqrt(2)`.
pub fn sample_targeted<R: Rng + ?Sized>(
    dims: (usize, usize),
    r_center: f64,
    sigma_delta: f64,
    rng: &mut R,
) -> Result<MaskSpec> {
    check_dims(dims)?;
    let r_max = max_radius(dims);
    if !(0.0..=r_max).contains(&r_center) {
        return Err(Error::invalid(format!(
            "r_center {r_center} outside [0, {r_max}]"
        )));
    }
    if !(sigma_delta > 0.0 && sigma_delta.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma_delta must be positive, got {sigma_delta}"
        )));
    }
    let normal = Normal::new(0.0, sigma_delta)
        .map_err(|e| Error::invalid(format!("bad sigma_delta: {e}")))?;
    let delta_in = normal.sample(rng).abs();
    let delta_out = normal.sample(rng).abs();
    Ok(MaskSpec {
        mode: MaskMode::Targeted {
            r_center,
            sigma_delta,
        },
        r_inner: (r_center - delta_in).max(0.0),
        r_outer: (r_center + delta_out).min(r_max * std::f64::consts::SQRT_2),
        r_max,
    })
}

/// Probability that central mode masks radius `r`: `2 (t - t^2)`, `t = r / r_max`.
pub fn band_mask_probability(r: f64, r_max: f64) -> Result<f64> {
    if !(r_max > 0.0) || !(0.0..=r_max).contains(&r) {
        return Err(Error::invalid(format!("radius {r} outside [0, {r_max}]")));
    }
    let t = r / r_max;
    Ok(2.0 * (t - t * t))
}

/// Probability that targeted mode masks radius `r` (ignoring clipping):
/// `erfc(|r - r_center| / (sigma_delta sqrt 2))`.
pub fn targeted_band_mask_probability(r: f64, r_center: f64, sigma_delta: f64) -> f64 {
    libm::erfc((r - r_center).abs() / (sigma_delta * std::f64::consts::SQRT_2))
}

/// Binary keep/drop grid; `true` keeps the coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn all_kept(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn keeps(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.width + v]
    }

    pub fn masked_count(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    /// Set of removed coefficients, as `(u, v)` pairs in row-major order.
    pub fn masked_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|u| (0..self.width).map(move |v| (u, v)))
            .filter(|&(u, v)| !self.keeps(u, v))
            .collect()
    }
}

/// Radius of coefficient `(u, v)` in index units.
#[inline]
pub fn coefficient_radius(u: usize, v: usize) -> f64 {
    ((u * u + v * v) as f64).sqrt()
}

/// Turns a spec into the binary grid for a raster of `dims = (height, width)`.
pub fn realize(spec: &MaskSpec, dims: (usize, usize)) -> Result<Mask> {
    check_dims(dims)?;
    let r_max = max_radius(dims);
    if spec.r_max != r_max {
        return Err(Error::invalid(format!(
            "spec was sampled for r_max {} but dims {}x{} give {r_max}",
            spec.r_max, dims.0, dims.1
        )));
    }
    let (h, w) = dims;
    let mut bits = Vec::with_capacity(h * w);
    for u in 0..h {
        for v in 0..w {
            bits.push(!spec.masks_radius(coefficient_radius(u, v)));
        }
    }
    Ok(Mask {
        height: h,
        width: w,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_four_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = sample_central((3, 4), &mut rng).unwrap();
        assert_eq!(spec.r_max, 5.0);
        assert!(spec.r_inner <= spec.r_outer && spec.r_outer <= 5.0);
    }

    #[test]
    fn central_draws_are_permuted() {
        let r_max = 10.0;
        let spec = central_from_draws(r_max, 0.8 * r_max, 0.3 * r_max);
        assert_eq!(spec.r_inner, 0.3 * r_max);
        assert_eq!(spec.r_outer, 0.8 * r_max);
    }

    #[test]
    fn central_consumes_two_draws() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = a.clone();
        sample_central((16, 16), &mut a).unwrap();
        b.random::<f64>();
        b.random::<f64>();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn probability_closed_form() {
        assert_eq!(band_mask_probability(0.0, 8.0).unwrap(), 0.0);
        assert_eq!(band_mask_probability(4.0, 8.0).unwrap(), 0.5);
        assert!((band_mask_probability(2.0, 8.0).unwrap() - 0.375).abs() < 1e-15);
        assert!(band_mask_probability(8.5, 8.0).is_err());
        assert!(band_mask_probability(-0.1, 8.0).is_err());
    }

    #[test]
    fn full_annulus_masks_everything() {
        let dims = (8, 8);
        let r_max = max_radius(dims);
        let spec = MaskSpec::with_radii(dims, 0.0, r_max * 2f64.sqrt() + 1e-9).unwrap();
        let mask = realize(&spec, dims).unwrap();
        assert_eq!(mask.masked_count(), 64);
    }

    #[test]
    fn empty_annulus_keeps_everything() {
        let dims = (8, 5);
        let spec = MaskSpec::with_radii(dims, 3.0, 3.0).unwrap();
        assert_eq!(realize(&spec, dims).unwrap().masked_count(), 0);
    }

    #[test]
    fn annulus_2_to_4_on_8x8_brute_force() {
        let dims = (8, 8);
        let spec = MaskSpec::with_radii(dims, 2.0, 4.0).unwrap();
        let mask = realize(&spec, dims).unwrap();
        let mut expected = Vec::new();
        for u in 0..8usize {
            for v in 0..8usize {
                let d2 = u * u + v * v;
                // 2 <= r < 4  <=>  4 <= r^2 < 16 on integer radii-squared
                if (4..16).contains(&d2) {
                    expected.push((u, v));
                }
            }
        }
        assert_eq!(mask.masked_cells(), expected);
        for cell in [(0, 2), (1, 2), (2, 2), (3, 0)] {
            assert!(!mask.keeps(cell.0, cell.1), "{cell:?} should be masked");
        }
        for cell in [(0, 0), (1, 1), (0, 4)] {
            assert!(mask.keeps(cell.0, cell.1), "{cell:?} should be kept");
        }
    }

    #[test]
    fn dc_masked_only_when_inner_is_zero() {
        let dims = (4, 4);
        let a = MaskSpec::with_radii(dims, 0.0, 1.0).unwrap();
        let b = MaskSpec::with_radii(dims, 1e-9, 1.0).unwrap();
        assert!(!realize(&a, dims).unwrap().keeps(0, 0));
        assert!(realize(&b, dims).unwrap().keeps(0, 0));
    }

    #[test]
    fn realize_rejects_mismatched_dims() {
        let spec = MaskSpec::with_radii((8, 8), 1.0, 2.0).unwrap();
        assert!(realize(&spec, (8, 9)).is_err());
    }

    #[test]
    fn targeted_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r_max = max_radius((10, 10));
        assert!(sample_targeted((10, 10), r_max + 0.01, 1.0, &mut rng).is_err());
        assert!(sample_targeted((10, 10), 1.0, 0.0, &mut rng).is_err());
        assert!(sample_targeted((10, 10), r_max, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn targeted_zero_width_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = (32, 32);
        let rc = 20.3;
        let spec = sample_targeted(dims, rc, 1e-12, &mut rng).unwrap();
        assert!((spec.r_inner - rc).abs() < 1e-10 && (spec.r_outer - rc).abs() < 1e-10);
        assert!(spec.masks_radius(rc));
        assert!(!spec.masks_radius(rc - 1e-6) && !spec.masks_radius(rc + 1e-6));
    }

    #[test]
    fn targeted_defaults_for_denoising() {
        let r_max = max_radius((64, 64));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = sample_targeted((64, 64), 0.85 * r_max, 0.15 * r_max, &mut rng).unwrap();
        match spec.mode {
            MaskMode::Targeted {
                r_center,
                sigma_delta,
            } => {
                assert_eq!(r_center, 0.85 * r_max);
                assert_eq!(sigma_delta, 0.15 * r_max);
            }
            MaskMode::Central => panic!("wrong mode"),
        }
        assert!(spec.r_inner <= 0.85 * r_max && 0.85 * r_max <= spec.r_outer);
    }

    #[test]
    fn spec_json_shape() {
        let spec = MaskSpec {
            mode: MaskMode::Targeted {
                r_center: 5.0,
                sigma_delta: 1.0,
            },
            r_inner: 4.0,
            r_outer: 6.5,
            r_max: 8.0,
        };
        let v = serde_json::to_value(spec).unwrap();
        assert_eq!(v["mode"], "targeted");
        assert_eq!(v["r_center"], 5.0);
        let back: MaskSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }
}
