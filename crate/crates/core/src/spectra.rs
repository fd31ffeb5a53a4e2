//! Radial spectral analysis on the DCT grid.
//!
//! Radii here are normalized: coefficient `(u, v)` of an `H x W` raster sits
//! at `rho = sqrt((u/H)^2 + (v/W)^2) / sqrt(2)`, which lies in `[0, 1)` and
//! equals `sqrt(u^2 + v^2) / r_max` for square rasters. The angular frequency
//! of that coefficient is `omega = pi * sqrt(2) * rho` rad/sample.

use std::f64::consts::{PI, SQRT_2};

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{Image, NominalRange};
use crate::mask::coefficient_radius;
use crate::transform::{Dct2dPlan, Spectrum};

pub const DEFAULT_BINS: usize = 64;

/// Normalized radius of coefficient `(u, v)` on an `h x w` grid.
#[inline]
pub fn normalized_radius(u: usize, v: usize, h: usize, w: usize) -> f64 {
    let a = u as f64 / h as f64;
    let b = v as f64 / w as f64;
    (a * a + b * b).sqrt() / SQRT_2
}

pub fn omega_to_radius(omega: f64) -> f64 {
    omega / (PI * SQRT_2)
}

pub fn radius_to_omega(rho: f64) -> f64 {
    rho * PI * SQRT_2
}

/// Normalized radius where a Gaussian of std-dev `sigma` passes half power.
pub fn gaussian_half_power_radius(sigma: f64) -> f64 {
    omega_to_radius(std::f64::consts::LN_2.sqrt() / sigma)
}

/// A statistic averaged over equal-width annular bins of normalized radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    fn empty(bins: usize) -> Self {
        RadialProfile {
            bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            values: vec![0.0; bins],
            counts: vec![0; bins],
        }
    }

    /// `amplitude * rho^-alpha` evaluated at bin centres.
    pub fn power_law(bins: usize, alpha: f64, amplitude: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("need at least one bin"));
        }
        let mut p = Self::empty(bins);
        let centers = p.centers();
        for (i, c) in centers.into_iter().enumerate() {
            p.values[i] = amplitude * c.powf(-alpha);
            p.counts[i] = 1;
        }
        Ok(p)
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }

    pub fn same_binning(&self, other: &RadialProfile) -> bool {
        self.bin_edges == other.bin_edges
    }

    /// Count-weighted average of several profiles with identical binning.
    pub fn average(profiles: &[RadialProfile]) -> Result<RadialProfile> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::invalid("no profiles to average"))?;
        let mut sums = vec![0.0; first.bins()];
        let mut counts = vec![0usize; first.bins()];
        for p in profiles {
            if !p.same_binning(first) {
                return Err(Error::invalid("profiles use different binning"));
            }
            for i in 0..p.bins() {
                sums[i] += p.values[i] * p.counts[i] as f64;
                counts[i] += p.counts[i];
            }
        }
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        Ok(RadialProfile {
            bin_edges: first.bin_edges.clone(),
            values,
            counts,
        })
    }

    /// First radius at which the profile drops below `level`, interpolated
    /// in the log domain between neighbouring populated bins.
    pub fn first_crossing_below(&self, level: f64) -> Option<f64> {
        let centers = self.centers();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..self.bins() {
            if self.counts[i] == 0 {
                continue;
            }
            let (c, v) = (centers[i], self.values[i]);
            if v < level {
                return Some(match prev {
                    Some((pc, pv)) if pv > 0.0 && v > 0.0 => {
                        let t = (pv.ln() - level.ln()) / (pv.ln() - v.ln());
                        pc + t * (c - pc)
                    }
                    _ => c,
                });
            }
            prev = Some((c, v));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdOptions {
    pub bins: usize,
    pub window: Window,
}

impl Default for PsdOptions {
    fn default() -> Self {
        PsdOptions {
            bins: DEFAULT_BINS,
            window: Window::None,
        }
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Radially averaged DCT periodogram with the per-channel mean removed.
///
/// The DC coefficient is excluded (it is zero after mean removal), and
/// channels are pooled into the same bins.
pub fn radial_psd(img: &Image, bins: usize) -> Result<RadialProfile> {
    radial_psd_with(
        img,
        &PsdOptions {
            bins,
            window: Window::None,
        },
    )
}

pub fn radial_psd_with(img: &Image, opts: &PsdOptions) -> Result<RadialProfile> {
    let (h, w) = img.dims();
    if h < 8 || w < 8 {
        return Err(Error::invalid(format!(
            "radial PSD needs at least 8x8, got {h}x{w}"
        )));
    }
    if opts.bins < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 bins, got {}",
            opts.bins
        )));
    }
    let plan = Dct2dPlan::new(h, w)?;
    let (wy, wx) = match opts.window {
        Window::None => (vec![1.0; h], vec![1.0; w]),
        Window::Hann => (hann(h), hann(w)),
    };
    let window_power = wy.iter().map(|v| v * v).sum::<f64>() / h as f64
        * wx.iter().map(|v| v * v).sum::<f64>()
        / w as f64;

    let mut profile = RadialProfile::empty(opts.bins);
    let mut sums = vec![0.0; opts.bins];
    for c in 0..img.channels() {
        let plane = img.channel(c);
        let mean = plane.iter().sum::<f64>() / plane.len() as f64;
        let data = (0..h * w)
            .map(|i| (plane[i] - mean) * wy[i / w] * wx[i % w])
            .collect();
        let spec = plan.forward(&Image::from_parts_unchecked(
            h,
            w,
            1,
            data,
            NominalRange::Unit,
        ))?;
        let coeffs = spec.coeffs();
        for u in 0..h {
            for v in 0..w {
                if u == 0 && v == 0 {
                    continue;
                }
                let rho = normalized_radius(u, v, h, w);
                let bin = ((rho * opts.bins as f64) as usize).min(opts.bins - 1);
                let c = coeffs[u * w + v];
                sums[bin] += c * c / window_power;
                profile.counts[bin] += 1;
            }
        }
    }
    for i in 0..opts.bins {
        if profile.counts[i] > 0 {
            profile.values[i] = sums[i] / profile.counts[i] as f64;
        }
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub amplitude: f64,
    pub fit_range: (f64, f64),
    /// RMS error of the fitted line in natural-log units.
    pub residual: f64,
}

/// Least-squares fit of `ln value = ln amplitude - alpha ln rho` over the
/// populated, positive bins whose centres fall inside `[r_lo, r_hi]`.
pub fn fit_power_law(profile: &RadialProfile, r_lo: f64, r_hi: f64) -> Result<PowerLawFit> {
    if !(r_lo > 0.0 && r_lo < r_hi) {
        return Err(Error::invalid(format!(
            "fit range must satisfy 0 < r_lo < r_hi, got ({r_lo}, {r_hi})"
        )));
    }
    let pts: Vec<(f64, f64)> = profile
        .centers()
        .into_iter()
        .zip(profile.values.iter().zip(&profile.counts))
        .filter(|(c, (v, n))| *c >= r_lo && *c <= r_hi && **n > 0 && **v > 0.0)
        .map(|(c, (v, _))| (c.ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::invalid(format!(
            "only {} usable bins in [{r_lo}, {r_hi}], need 4",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        alpha: -slope,
        amplitude: intercept.exp(),
        fit_range: (r_lo, r_hi),
        residual,
    })
}

/// Per-bin SNR against white noise of std-dev `noise_sigma`, whose
/// orthonormal-DCT power is `noise_sigma^2` at every frequency.
pub fn snr_curve(signal_psd: &RadialProfile, noise_sigma: f64) -> Result<RadialProfile> {
    if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be positive, got {noise_sigma}"
        )));
    }
    snr_curve_from_variance(signal_psd, noise_sigma * noise_sigma)
}

/// [`snr_curve`] parameterized by the noise variance directly.
pub fn snr_curve_from_variance(
    signal_psd: &RadialProfile,
    noise_variance: f64,
) -> Result<RadialProfile> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    Ok(RadialProfile {
        bin_edges: signal_psd.bin_edges.clone(),
        values: signal_psd
            .values
            .iter()
            .map(|v| v / noise_variance)
            .collect(),
        counts: signal_psd.counts.clone(),
    })
}

/// Ideal DCT-domain split at index radius `cutoff`: `low` keeps
/// coefficients with `sqrt(u^2 + v^2) < cutoff`, `high` keeps the rest.
pub fn band_split(img: &Image, cutoff: f64) -> Result<(Image, Image)> {
    if !(cutoff >= 0.0) {
        return Err(Error::invalid(format!(
            "cutoff must be non-negative, got {cutoff}"
        )));
    }
    let (h, w) = img.dims();
    let plan = Dct2dPlan::new(h, w)?;
    let spec = plan.forward(img)?;
    let mut low = spec.coeffs().to_vec();
    let mut high = spec.coeffs().to_vec();
    for (i, (l, hi)) in low.iter_mut().zip(high.iter_mut()).enumerate() {
        let p = i % (h * w);
        if coefficient_radius(p / w, p % w) < cutoff {
            *hi = 0.0;
        } else {
            *l = 0.0;
        }
    }
    let to_img = |coeffs: Vec<f64>| -> Result<Image> {
        plan.inverse(&Spectrum::new(h, w, img.channels(), coeffs, img.range())?)
    };
    Ok((to_img(low)?, to_img(high)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGap {
    /// Mean of `10 log10(reference / candidate)` over the usable bins.
    pub mean_db: f64,
    /// `(bin centre, dB)` per bin in the band; `+inf` where the candidate is zero.
    pub per_bin: Vec<(f64, f64)>,
    /// Bins dropped from the mean because the candidate had no energy.
    pub excluded: usize,
}

/// Band-averaged dB deficit of `candidate` relative to `reference` over bins
/// whose centres lie in `[band.0, band.1]`.
pub fn spectral_gap(
    reference: &RadialProfile,
    candidate: &RadialProfile,
    band: (f64, f64),
) -> Result<SpectralGap> {
    if !reference.same_binning(candidate) {
        return Err(Error::invalid("profiles use different binning"));
    }
    if !(band.0 <= band.1) {
        return Err(Error::invalid(format!("empty band {band:?}")));
    }
    let mut per_bin = Vec::new();
    let mut excluded = 0;
    for (i, c) in reference.centers().into_iter().enumerate() {
        if c < band.0 || c > band.1 || reference.counts[i] == 0 || candidate.counts[i] == 0 {
            continue;
        }
        let (r, k) = (reference.values[i], candidate.values[i]);
        let db = if k > 0.0 {
            10.0 * (r / k).log10()
        } else {
            excluded += 1;
            f64::INFINITY
        };
        per_bin.push((c, db));
    }
    if excluded > 0 {
        warn!("spectral gap: {excluded} bin(s) with zero candidate power excluded");
    }
    let finite: Vec<f64> = per_bin
        .iter()
        .map(|p| p.1)
        .filter(|d| d.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::invalid(format!(
            "no usable bins inside band [{}, {}]",
            band.0, band.1
        )));
    }
    Ok(SpectralGap {
        mean_db: finite.iter().sum::<f64>() / finite.len() as f64,
        per_bin,
        excluded,
    })
}

/// Random field whose DCT power follows `rho^-alpha` (DC set to zero).
pub fn power_law_field<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    channels: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Image> {
    let plan = Dct2dPlan::new(height, width)?;
    let mut coeffs = Vec::with_capacity(height * width * channels);
    for _ in 0..channels {
        for u in 0..height {
            for v in 0..width {
                let g: f64 = StandardNormal.sample(rng);
                let amp = if u == 0 && v == 0 {
                    0.0
                } else {
                    normalized_radius(u, v, height, width).powf(-alpha / 2.0)
                };
                coeffs.push(g * amp);
            }
        }
    }
    plan.inverse(&Spectrum::new(
        height,
        width,
        channels,
        coeffs,
        NominalRange::Unit,
    )?)
}
