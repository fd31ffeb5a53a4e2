//! Synthetic degradations: anti-aliasing blur, downsampling and noise.
//!
//! Every kernel produced here is separable and symmetric, so convolution
//! runs as two 1D passes. Image borders are extended by mirroring with the
//! edge sample repeated (`... c b a | a b c ... x y z | z y x ...`), which is
//! the same extension the DCT-II implies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Gaussian widths of the blind-SR test kernel grid (1.7 to 6.5, step 0.6).
pub const BLIND_SR_KERNEL_SIGMAS: [f64; 9] = [1.7, 2.3, 2.9, 3.5, 4.1, 4.7, 5.3, 5.9, 6.5];

/// Training/test kernel pair used in the kernel-overfitting experiment.
pub const GAP_TRAIN_SIGMA: f64 = 4.1;
pub const GAP_TEST_SIGMA: f64 = 7.4;

/// Keys cubic convolution coefficient.
pub const BICUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Identity,
    Gaussian,
    BicubicPrefilter,
}

/// A normalized, symmetric, separable 2D blur kernel with odd side length.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    kind: KernelKind,
    sigma: Option<f64>,
    taps_1d: Vec<f64>,
}

impl BlurKernel {
    pub fn identity() -> Self {
        BlurKernel {
            kind: KernelKind::Identity,
            sigma: None,
            taps_1d: vec![1.0],
        }
    }

    /// Bicubic (a = -0.5) anti-aliasing kernel stretched by `scale`.
    pub fn bicubic_prefilter(scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("bicubic prefilter scale must be >= 1"));
        }
        let t = scale as f64;
        let half = 2 * scale as isize - 1;
        let mut raw: Vec<f64> = (-half..=half).map(|k| cubic(k as f64 / t)).collect();
        while raw.len() > 1 && raw[0] == 0.0 {
            raw.pop();
            raw.remove(0);
        }
        Ok(BlurKernel {
            kind: KernelKind::BicubicPrefilter,
            sigma: None,
            taps_1d: normalized(raw),
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn side(&self) -> usize {
        self.taps_1d.len()
    }

    pub fn taps_1d(&self) -> &[f64] {
        &self.taps_1d
    }

    /// Row-major 2D taps (outer product of the 1D factor).
    pub fn taps(&self) -> Vec<f64> {
        let k = &self.taps_1d;
        k.iter()
            .flat_map(|a| k.iter().map(move |b| a * b))
            .collect()
    }

    /// Discrete-time Fourier transform of the 2D taps at `(wy, wx)` rad/sample.
    /// Real because the taps are symmetric.
    pub fn frequency_response(&self, wy: f64, wx: f64) -> f64 {
        let h = |w: f64| -> f64 {
            let r = (self.side() / 2) as isize;
            self.taps_1d
                .iter()
                .enumerate()
                .map(|(i, t)| t * (w * (i as isize - r) as f64).cos())
                .sum()
        };
        h(wy) * h(wx)
    }
}

fn normalized(mut taps: Vec<f64>) -> Vec<f64> {
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    taps
}

/// Sampled 2D Gaussian of std-dev `sigma`, side `2 ceil(3 sigma) + 1`.
pub fn gaussian_kernel(sigma: f64) -> Result<BlurKernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let raw = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    Ok(BlurKernel {
        kind: KernelKind::Gaussian,
        sigma: Some(sigma),
        taps_1d: normalized(raw),
    })
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Mirror an out-of-range index back into `0..n` (edge sample repeated).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Filters `src` (length `n`, elements `stride` apart) with a centred odd kernel.
fn filter_line(src: &[f64], n: usize, stride: usize, taps: &[f64], out: &mut [f64]) {
    let r = (taps.len() / 2) as isize;
    for i in 0..n {
        let mut acc = 0.0;
        for (k, t) in taps.iter().enumerate() {
            let j = reflect_index(i as isize + k as isize - r, n);
            acc += t * src[j * stride];
        }
        out[i] = acc;
    }
}

/// Same-size, per-channel convolution with mirrored borders.
pub fn convolve(img: &Image, kernel: &BlurKernel) -> Result<Image> {
    let (h, w) = img.dims();
    let side = kernel.side();
    if side >= 2 * h || side >= 2 * w {
        return Err(Error::invalid(format!(
            "kernel side {side} too large for {h}x{w} image"
        )));
    }
    if kernel.kind == KernelKind::Identity {
        return Ok(img.clone());
    }
    let taps = kernel.taps_1d();
    let mut out = Vec::with_capacity(img.data().len());
    let mut tmp = vec![0.0; h * w];
    let mut col = vec![0.0; h];
    for c in 0..img.channels() {
        let plane = img.channel(c);
        for y in 0..h {
            filter_line(&plane[y * w..], w, 1, taps, &mut tmp[y * w..(y + 1) * w]);
        }
        let start = out.len();
        out.resize(start + h * w, 0.0);
        for x in 0..w {
            filter_line(&tmp[x..], h, w, taps, &mut col);
            for y in 0..h {
                out[start + y * w + x] = col[y];
            }
        }
    }
    Ok(img.with_data(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DownsampleKind {
    /// Keep every `T`-th sample starting at offset 0.
    Decimate,
    /// Bicubic resampling with the kernel stretched by `T` (antialiased).
    Bicubic,
}

/// Per-output-sample `(source index, weight)` lists for bicubic reduction.
fn bicubic_weights(n: usize, n_out: usize, scale: usize) -> Vec<Vec<(usize, f64)>> {
    let t = scale as f64;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * t - 0.5;
            let lo = (center - 2.0 * t).floor() as isize;
            let hi = (center + 2.0 * t).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .filter_map(|j| {
                    let wgt = cubic((center - j as f64) / t);
                    (wgt != 0.0).then(|| (reflect_index(j, n), wgt))
                })
                .collect();
            let s: f64 = taps.iter().map(|(_, w)| w).sum();
            for (_, wgt) in &mut taps {
                *wgt /= s;
            }
            taps
        })
        .collect()
}

/// Reduces both axes by the integer factor `scale`; output is
/// `floor(H / scale) x floor(W / scale)`.
pub fn downsample(img: &Image, scale: usize, kind: DownsampleKind) -> Result<Image> {
    if scale == 0 {
        return Err(Error::invalid("downsampling factor must be >= 1"));
    }
    let (h, w) = img.dims();
    let (ho, wo) = (h / scale, w / scale);
    if ho == 0 || wo == 0 {
        return Err(Error::invalid(format!(
            "downsampling {h}x{w} by {scale} leaves an empty image"
        )));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let mut out = Vec::with_capacity(ho * wo * img.channels());
    match kind {
        DownsampleKind::Decimate => {
            for c in 0..img.channels() {
                let plane = img.channel(c);
                for y in 0..ho {
                    for x in 0..wo {
                        out.push(plane[y * scale * w + x * scale]);
                    }
                }
            }
        }
        DownsampleKind::Bicubic => {
            let wy = bicubic_weights(h, ho, scale);
            let wx = bicubic_weights(w, wo, scale);
            let mut rows = vec![0.0; h * wo];
            for c in 0..img.channels() {
                let plane = img.channel(c);
                for y in 0..h {
                    for (x, taps) in wx.iter().enumerate() {
                        rows[y * wo + x] = taps.iter().map(|&(j, k)| k * plane[y * w + j]).sum();
                    }
                }
                for taps in &wy {
                    for x in 0..wo {
                        out.push(taps.iter().map(|&(j, k)| k * rows[j * wo + x]).sum());
                    }
                }
            }
        }
    }
    Image::new(ho, wo, img.channels(), out, img.range())
}

/// Noise model. Sigmas, gain and read noise are in byte units (`[0, 255]`)
/// regardless of the image's nominal range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum NoiseModel {
    #[default]
    None,
    AwgnFixed {
        sigma: f64,
    },
    /// One sigma per image, uniform on `[lo, hi]`.
    AwgnBlind {
        lo: f64,
        hi: f64,
    },
    /// `gain * Poisson(x / gain) + N(0, read^2)`.
    PoissonGaussian {
        gain: f64,
        read: f64,
    },
}

/// Noise range of the blind denoising recipe.
pub const BLIND_NOISE_RANGE: (f64, f64) = (0.0, 55.0);

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::None => true,
            NoiseModel::AwgnFixed { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseModel::AwgnBlind { lo, hi } => lo >= 0.0 && lo <= hi && hi.is_finite(),
            NoiseModel::PoissonGaussian { gain, read } => {
                gain > 0.0 && gain.is_finite() && read >= 0.0 && read.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise model {self}")))
        }
    }

    /// Draws the per-image sigma for the blind model; one `f64` draw.
    pub fn draw_blind_sigma<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => write!(f, "none"),
            NoiseModel::AwgnFixed { sigma } => write!(f, "awgn:{sigma}"),
            NoiseModel::AwgnBlind { lo, hi } => write!(f, "awgn-blind:{lo},{hi}"),
            NoiseModel::PoissonGaussian { gain, read } => write!(f, "pg:{gain},{read}"),
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("cannot parse {what} from {s:?}")))
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::invalid(format!("{what} expects two comma-separated values")))?;
    Ok((parse_f64(a, what)?, parse_f64(b, what)?))
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let model = match head {
            "none" => NoiseModel::None,
            "awgn" => NoiseModel::AwgnFixed {
                sigma: parse_f64(args, "awgn sigma")?,
            },
            "awgn-blind" => {
                let (lo, hi) = parse_pair(args, "awgn-blind range")?;
                NoiseModel::AwgnBlind { lo, hi }
            }
            "pg" => {
                let (gain, read) = parse_pair(args, "pg gain,read")?;
                NoiseModel::PoissonGaussian { gain, read }
            }
            other => return Err(Error::invalid(format!("unknown noise model {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl TryFrom<String> for NoiseModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NoiseModel> for String {
    fn from(m: NoiseModel) -> String {
        m.to_string()
    }
}

/// An image after degradation, with the noise level actually used.
#[derive(Debug, Clone)]
pub struct Degraded {
    pub image: Image,
    /// Gaussian sigma applied, in byte units (AWGN models only).
    pub noise_sigma: Option<f64>,
}

fn add_gaussian<R: Rng + ?Sized>(data: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    for v in data {
        *v += normal.sample(rng);
    }
}

/// Adds noise per `model`. The output is not clamped.
pub fn add_noise<R: Rng + ?Sized>(
    img: &Image,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<Degraded> {
    model.validate()?;
    let to_img = img.range().from_byte_scale();
    let mut data = img.data().to_vec();
    let noise_sigma = match *model {
        NoiseModel::None => None,
        NoiseModel::AwgnFixed { sigma } => {
            add_gaussian(&mut data, sigma * to_img, rng);
            Some(sigma)
        }
        NoiseModel::AwgnBlind { lo, hi } => {
            let sigma = NoiseModel::draw_blind_sigma(lo, hi, rng);
            add_gaussian(&mut data, sigma * to_img, rng);
            Some(sigma)
        }
        NoiseModel::PoissonGaussian { gain, read } => {
            if let Some(v) = data.iter().find(|v| **v < 0.0) {
                return Err(Error::invalid(format!(
                    "poisson-gaussian noise needs non-negative samples, found {v}"
                )));
            }
            for v in data.iter_mut() {
                let photons = *v / to_img / gain;
                let counts = if photons > 0.0 {
                    Poisson::new(photons)
                        .map_err(|e| Error::invalid(format!("poisson rate {photons}: {e}")))?
                        .sample(rng)
                } else {
                    0.0
                };
                *v = gain * counts * to_img;
            }
            add_gaussian(&mut data, read * to_img, rng);
            None
        }
    };
    Ok(Degraded {
        image: img.with_data(data),
        noise_sigma,
    })
}

/// Config-level kernel description; parses `identity`, `bicubic`, `gaussian:SIGMA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    Identity,
    Gaussian { sigma: f64 },
    Bicubic,
}

impl KernelSpec {
    pub fn sigma(&self) -> Option<f64> {
        match self {
            KernelSpec::Gaussian { sigma } => Some(*sigma),
            _ => None,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Identity => write!(f, "identity"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            KernelSpec::Bicubic => write!(f, "bicubic"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "identity" => Ok(KernelSpec::Identity),
            None if s == "bicubic" => Ok(KernelSpec::Bicubic),
            Some(("gaussian", sigma)) => {
                let sigma = parse_f64(sigma, "gaussian sigma")?;
                gaussian_kernel(sigma)?;
                Ok(KernelSpec::Gaussian { sigma })
            }
            _ => Err(Error::invalid(format!("unknown kernel {s:?}"))),
        }
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationConfig {
    pub kernel: KernelSpec,
    pub scale: usize,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl DegradationConfig {
    pub fn identity() -> Self {
        DegradationConfig {
            kernel: KernelSpec::Identity,
            scale: 1,
            noise: NoiseModel::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::invalid("scale must be >= 1"));
        }
        self.noise.validate()
    }
}

/// Blur, downsample, then add noise.
///
/// Gaussian and identity kernels are applied by [`convolve`] followed by
/// decimation. The bicubic kernel is the antialiasing filter of bicubic
/// resampling, so it is applied inside [`downsample`] instead.
pub fn degrade_sr<R: Rng + ?Sized>(
    hr: &Image,
    cfg: &DegradationConfig,
    rng: &mut R,
) -> Result<Degraded> {
    cfg.validate()?;
    let lr = match cfg.kernel {
        KernelSpec::Bicubic => downsample(hr, cfg.scale, DownsampleKind::Bicubic)?,
        KernelSpec::Identity => downsample(hr, cfg.scale, DownsampleKind::Decimate)?,
        KernelSpec::Gaussian { sigma } => {
            let blurred = convolve(hr, &gaussian_kernel(sigma)?)?;
            downsample(&blurred, cfg.scale, DownsampleKind::Decimate)?
        }
    };
    add_noise(&lr, &cfg.noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::NominalRange;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, 1, NominalRange::Unit, |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn gaussian_kernel_shape_and_normalization() {
        for sigma in BLIND_SR_KERNEL_SIGMAS
            .iter()
            .chain(&[0.3, GAP_TRAIN_SIGMA, GAP_TEST_SIGMA])
        {
            let k = gaussian_kernel(*sigma).unwrap();
            let side = k.side();
            assert_eq!(side, 2 * (3.0 * sigma).ceil() as usize + 1);
            let taps = k.taps();
            assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            for y in 0..side {
                for x in 0..side {
                    let t = taps[y * side + x];
                    assert_eq!(t, taps[(side - 1 - y) * side + x]);
                    assert_eq!(t, taps[y * side + side - 1 - x]);
                }
            }
        }
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn gaussian_frequency_response() {
        // sampled Gaussian ~ exp(-w^2 sigma^2 / 2); relative check wherever the
        // analytic response is not negligible against truncation error
        for sigma in [0.8, 1.0, 1.7, 2.3, 4.1, 7.4] {
            let k = gaussian_kernel(sigma).unwrap();
            for i in 0..=32 {
                let w = std::f64::consts::FRAC_PI_2 * i as f64 / 32.0;
                for angle in [0.0f64, 0.4, std::f64::consts::FRAC_PI_4] {
                    let (wy, wx) = (w * angle.sin(), w * angle.cos());
                    let analytic = (-w * w * sigma * sigma / 2.0).exp();
                    let measured = k.frequency_response(wy, wx);
                    if analytic >= 0.05 {
                        let rel = (measured - analytic).abs() / analytic;
                        assert!(rel <= 0.02, "sigma {sigma} w {w}: rel {rel}");
                    } else {
                        assert!((measured - analytic).abs() <= 2e-3);
                    }
                }
            }
        }
    }

    #[test]
    fn bicubic_prefilter_is_valid_kernel() {
        for t in [1, 2, 3, 4, 8] {
            let k = BlurKernel::bicubic_prefilter(t).unwrap();
            assert_eq!(k.side() % 2, 1);
            assert!((k.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(BlurKernel::bicubic_prefilter(1).unwrap().taps_1d(), &[1.0]);
    }

    #[test]
    fn identity_convolution() {
        let img = noise_image(9, 7, 1);
        assert_eq!(convolve(&img, &BlurKernel::identity()).unwrap(), img);
    }

    #[test]
    fn constant_survives_convolution() {
        let img = Image::filled(20, 15, 3, 0.6, NominalRange::Unit).unwrap();
        let out = convolve(&img, &gaussian_kernel(2.0).unwrap()).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn impulse_reproduces_taps() {
        let k = gaussian_kernel(1.5).unwrap();
        let side = k.side();
        let (h, w) = (31, 29);
        let img = Image::from_fn(h, w, 1, NominalRange::Unit, |y, x, _| {
            if (y, x) == (15, 14) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let out = convolve(&img, &k).unwrap();
        let taps = k.taps();
        let r = side / 2;
        for dy in 0..side {
            for dx in 0..side {
                let v = out.get(15 + dy - r, 14 + dx - r, 0);
                assert!((v - taps[dy * side + dx]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mean_preserved_on_interior_dominated_image() {
        let img = noise_image(128, 128, 4);
        let out = convolve(&img, &gaussian_kernel(2.3).unwrap()).unwrap();
        assert!((out.mean() - img.mean()).abs() <= 1e-4);
    }

    #[test]
    fn oversized_kernel_rejected() {
        let img = noise_image(4, 40, 5);
        assert!(convolve(&img, &gaussian_kernel(1.5).unwrap()).is_err());
    }

    #[test]
    fn reflect_index_mirrors_with_edge() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-3, 1), 0);
    }

    #[test]
    fn downsample_identity_and_constant() {
        let img = noise_image(10, 6, 6);
        for kind in [DownsampleKind::Decimate, DownsampleKind::Bicubic] {
            assert_eq!(downsample(&img, 1, kind).unwrap(), img);
            let c = Image::filled(17, 13, 3, 0.25, NominalRange::Unit).unwrap();
            for t in [2, 3, 4, 8] {
                let out = downsample(&c, t, kind).unwrap();
                assert_eq!(out.dims(), (17 / t, 13 / t));
                assert!(out.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
            }
        }
        assert!(downsample(&img, 7, DownsampleKind::Decimate).is_err());
        assert!(downsample(&img, 0, DownsampleKind::Decimate).is_err());
    }

    #[test]
    fn decimate_takes_top_left_samples() {
        let img =
            Image::from_fn(4, 6, 1, NominalRange::Byte, |y, x, _| (y * 10 + x) as f64).unwrap();
        let out = downsample(&img, 2, DownsampleKind::Decimate).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0, 4.0, 20.0, 22.0, 24.0]);
    }

    #[test]
    fn bicubic_reproduces_ramps_away_from_borders() {
        // cubic convolution reproduces linear signals exactly
        let n = 64;
        let img = Image::from_fn(1, n, 1, NominalRange::Byte, |_, x, _| x as f64).unwrap();
        let img = Image::from_fn(8, n, 1, NominalRange::Byte, |_, x, _| img.get(0, x, 0)).unwrap();
        let out = downsample(&img, 4, DownsampleKind::Bicubic).unwrap();
        for i in 2..(n / 4 - 2) {
            let expect = (i as f64 + 0.5) * 4.0 - 0.5;
            assert!((out.get(1, i, 0) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_model_strings() {
        for s in ["none", "awgn:25", "awgn-blind:0,55", "pg:0.5,2"] {
            let m: NoiseModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("awgn:-1".parse::<NoiseModel>().is_err());
        assert!("awgn-blind:9,3".parse::<NoiseModel>().is_err());
        assert!("pg:0,1".parse::<NoiseModel>().is_err());
        assert!("laplace:1".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn kernel_spec_strings() {
        for s in ["identity", "bicubic", "gaussian:4.1"] {
            assert_eq!(s.parse::<KernelSpec>().unwrap().to_string(), s);
        }
        assert!("gaussian:0".parse::<KernelSpec>().is_err());
        assert!("box:3".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn no_noise_is_identity() {
        let img = noise_image(5, 5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = add_noise(&img, &NoiseModel::None, &mut rng).unwrap();
        assert_eq!(out.image, img);
        assert_eq!(out.noise_sigma, None);
    }

    #[test]
    fn noise_scales_with_nominal_range() {
        let unit = Image::filled(200, 200, 1, 0.0, NominalRange::Unit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = add_noise(&unit, &NoiseModel::AwgnFixed { sigma: 25.5 }, &mut rng).unwrap();
        let std = (out.image.energy() / 40000.0).sqrt();
        assert!((std - 0.1).abs() < 0.003, "std {std}");
    }

    #[test]
    fn poisson_rejects_negative_input() {
        let img = Image::new(1, 2, 1, vec![0.5, -0.01], NominalRange::Unit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = NoiseModel::PoissonGaussian {
            gain: 1.0,
            read: 1.0,
        };
        assert!(matches!(
            add_noise(&img, &m, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn blind_sigma_reported_in_range() {
        let img = noise_image(8, 8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let out =
                add_noise(&img, &NoiseModel::AwgnBlind { lo: 0.0, hi: 55.0 }, &mut rng).unwrap();
            let s = out.noise_sigma.unwrap();
            assert!((0.0..=55.0).contains(&s));
        }
    }

    #[test]
    fn degrade_identity_and_output_shape() {
        let img = noise_image(37, 50, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = degrade_sr(&img, &DegradationConfig::identity(), &mut rng).unwrap();
        assert_eq!(out.image, img);
        for kernel in [KernelSpec::Bicubic, KernelSpec::Gaussian { sigma: 1.7 }] {
            let cfg = DegradationConfig {
                kernel,
                scale: 4,
                noise: NoiseModel::AwgnFixed { sigma: 5.0 },
            };
            let out = degrade_sr(&img, &cfg, &mut rng).unwrap();
            assert_eq!(out.image.dims(), (37 / 4, 50 / 4));
        }
    }

    #[test]
    fn blind_sr_kernel_grid() {
        for (i, s) in BLIND_SR_KERNEL_SIGMAS.iter().enumerate() {
            assert!((s - (1.7 + 0.6 * i as f64)).abs() < 1e-12);
            assert!(gaussian_kernel(*s).is_ok());
        }
    }
}
