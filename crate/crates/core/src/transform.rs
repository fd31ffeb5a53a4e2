//! Orthonormal 2D DCT-II / DCT-III, applied channel-wise.
//!
//! The fast path runs separable 1D transforms, each computed from a single
//! complex FFT of the even/odd reordered signal (Makhoul's construction), so
//! arbitrary lengths are handled exactly. [`dct2_forward_naive`] evaluates
//! the defining sums directly and exists as an oracle for the fast path.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{check_shape, Image, NominalRange};

/// Largest side accepted by the O(N^2) reference transform.
pub const NAIVE_MAX_SIDE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Orthonormal,
}

/// DCT-II coefficients of an [`Image`], same shape and planar layout.
///
/// `coeffs[c * h * w + u * w + v]` is the coefficient at vertical frequency
/// index `u`, horizontal index `v` of channel `c`; `(0, 0)` is DC.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    channels: usize,
    coeffs: Vec<f64>,
    norm: Normalization,
    range: NominalRange,
}

impl Spectrum {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        coeffs: Vec<f64>,
        range: NominalRange,
    ) -> Result<Self> {
        check_shape(height, width, channels)?;
        if coeffs.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "expected {} coefficients for {height}x{width}x{channels}, got {}",
                height * width * channels,
                coeffs.len()
            )));
        }
        Ok(Spectrum {
            height,
            width,
            channels,
            coeffs,
            norm: Normalization::Orthonormal,
            range,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn norm(&self) -> Normalization {
        self.norm
    }

    pub fn range(&self) -> NominalRange {
        self.range
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, u: usize, v: usize, c: usize) -> f64 {
        self.coeffs[c * self.height * self.width + u * self.width + v]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Spectrum) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Planned orthonormal 1D DCT-II/DCT-III of a fixed length.
struct Dct1d {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    // exp(-i*pi*k / 2N) scaled by the orthonormal factor of index k
    twiddles: Vec<Complex64>,
}

impl Dct1d {
    fn new(len: usize, planner: &mut FftPlanner<f64>) -> Self {
        let n = len as f64;
        let twiddles = (0..len)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                Complex64::from_polar(scale, -PI * k as f64 / (2.0 * n))
            })
            .collect();
        Dct1d {
            len,
            fft: planner.plan_fft_forward(len),
            ifft: planner.plan_fft_inverse(len),
            twiddles,
        }
    }

    fn forward(&self, data: &mut [f64], buf: &mut [Complex64]) {
        let n = self.len;
        if n == 1 {
            return;
        }
        let half = n.div_ceil(2);
        for k in 0..half {
            buf[k] = Complex64::new(data[2 * k], 0.0);
        }
        for k in 0..n / 2 {
            buf[n - 1 - k] = Complex64::new(data[2 * k + 1], 0.0);
        }
        self.fft.process(buf);
        for k in 0..n {
            data[k] = (buf[k] * self.twiddles[k]).re;
        }
    }

    fn inverse(&self, data: &mut [f64], buf: &mut [Complex64]) {
        let n = self.len;
        if n == 1 {
            return;
        }
        // Undo the orthonormal scale to get the plain DCT-II values y[k], then
        // rebuild the FFT of the reordered signal: V[k] = w^-k (y[k] - i y[N-k]).
        for k in 0..n {
            let tw = self.twiddles[k];
            let scale = tw.norm();
            let y_k = data[k] / scale;
            let y_nk = if k == 0 {
                0.0
            } else {
                data[n - k] / self.twiddles[n - k].norm()
            };
            buf[k] = (tw / scale).conj() * Complex64::new(y_k, -y_nk);
        }
        self.ifft.process(buf);
        let inv_n = 1.0 / n as f64;
        let half = n.div_ceil(2);
        for k in 0..half {
            data[2 * k] = buf[k].re * inv_n;
        }
        for k in 0..n / 2 {
            data[2 * k + 1] = buf[n - 1 - k].re * inv_n;
        }
    }
}

/// Reusable plan for 2D transforms of one raster size.
pub struct Dct2dPlan {
    height: usize,
    width: usize,
    rows: Dct1d,
    cols: Dct1d,
}

impl std::fmt::Debug for Dct2dPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2dPlan")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Dct2dPlan {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "transform dimensions must be non-zero, got {height}x{width}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Dct2dPlan {
            height,
            width,
            rows: Dct1d::new(width, &mut planner),
            cols: Dct1d::new(height, &mut planner),
        })
    }

    fn run_plane(&self, plane: &mut [f64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let mut buf = vec![Complex64::new(0.0, 0.0); h.max(w)];
        for row in plane.chunks_exact_mut(w) {
            if inverse {
                self.rows.inverse(row, &mut buf[..w]);
            } else {
                self.rows.forward(row, &mut buf[..w]);
            }
        }
        let mut column = vec![0.0; h];
        for x in 0..w {
            for y in 0..h {
                column[y] = plane[y * w + x];
            }
            if inverse {
                self.cols.inverse(&mut column, &mut buf[..h]);
            } else {
                self.cols.forward(&mut column, &mut buf[..h]);
            }
            for y in 0..h {
                plane[y * w + x] = column[y];
            }
        }
    }

    fn check(&self, height: usize, width: usize) -> Result<()> {
        if (height, width) != (self.height, self.width) {
            return Err(Error::invalid(format!(
                "plan is for {}x{}, got {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn forward(&self, img: &Image) -> Result<Spectrum> {
        self.check(img.height(), img.width())?;
        let mut coeffs = img.data().to_vec();
        for plane in coeffs.chunks_exact_mut(img.plane_len()) {
            self.run_plane(plane, false);
        }
        Ok(Spectrum {
            height: img.height(),
            width: img.width(),
            channels: img.channels(),
            coeffs,
            norm: Normalization::Orthonormal,
            range: img.range(),
        })
    }

    pub fn inverse(&self, spec: &Spectrum) -> Result<Image> {
        self.check(spec.height, spec.width)?;
        let mut data = spec.coeffs.clone();
        for plane in data.chunks_exact_mut(spec.height * spec.width) {
            self.run_plane(plane, true);
        }
        Ok(Image::from_parts_unchecked(
            spec.height,
            spec.width,
            spec.channels,
            data,
            spec.range,
        ))
    }
}

/// Orthonormal 2D DCT-II of every channel.
pub fn dct2_forward(img: &Image) -> Result<Spectrum> {
    Dct2dPlan::new(img.height(), img.width())?.forward(img)
}

/// Orthonormal 2D DCT-III (the inverse of [`dct2_forward`]). No clamping.
pub fn dct2_inverse(spec: &Spectrum) -> Result<Image> {
    Dct2dPlan::new(spec.height, spec.width)?.inverse(spec)
}

/// Direct evaluation of the orthonormal DCT-II sums, O(HW(H+W)).
pub fn dct2_forward_naive(img: &Image) -> Result<Spectrum> {
    let (h, w) = img.dims();
    if h > NAIVE_MAX_SIDE || w > NAIVE_MAX_SIDE {
        return Err(Error::invalid(format!(
            "naive DCT limited to {NAIVE_MAX_SIDE} per side, got {h}x{w}"
        )));
    }
    let basis = |n: usize| -> Vec<f64> {
        // basis[k * n + i] = s_k cos(pi (2i + 1) k / 2n)
        let nf = n as f64;
        let mut b = Vec::with_capacity(n * n);
        for k in 0..n {
            let s = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            for i in 0..n {
                b.push(s * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos());
            }
        }
        b
    };
    let row_basis = basis(w);
    let col_basis = basis(h);
    let mut coeffs = Vec::with_capacity(img.data().len());
    let mut tmp = vec![0.0; h * w];
    for c in 0..img.channels() {
        let plane = img.channel(c);
        for y in 0..h {
            for v in 0..w {
                tmp[y * w + v] = (0..w)
                    .map(|x| plane[y * w + x] * row_basis[v * w + x])
                    .sum();
            }
        }
        for u in 0..h {
            for v in 0..w {
                coeffs.push((0..h).map(|y| tmp[y * w + v] * col_basis[u * h + y]).sum());
            }
        }
    }
    Spectrum::new(h, w, img.channels(), coeffs, img.range())
}
