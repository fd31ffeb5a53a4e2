//! Image files: 8/16-bit PNG, 8-bit PGM/PPM, and a raw float format.
//!
//! Integer formats load into the unit range (`v / 255` or `v / 65535`) and
//! are clamped to the nominal range on save. The raw format (`.sfr`) stores
//! the planar `f64` samples and the nominal range verbatim:
//!
//! ```text
//! SFMRAW1\n
//! <height> <width> <channels> <unit|byte>\n
//! <height * width * channels little-endian f64, planar>
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, NominalRange};

const RAW_MAGIC: &[u8] = b"SFMRAW1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Png8,
    Png16,
    Pgm,
    Ppm,
    /// Lossless `f64` raster (`.sfr`).
    Raw,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png8 | ImageFormat::Png16 => "png",
            ImageFormat::Pgm => "pgm",
            ImageFormat::Ppm => "ppm",
            ImageFormat::Raw => "sfr",
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "png8" => ImageFormat::Png8,
            "png16" => ImageFormat::Png16,
            "pgm" => ImageFormat::Pgm,
            "ppm" => ImageFormat::Ppm,
            "raw" => ImageFormat::Raw,
            other => return Err(Error::invalid(format!("unknown image format {other:?}"))),
        })
    }
}

/// File extensions treated as images when scanning a directory.
pub const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "ppm", "pnm", "sfr"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image_path(&path) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

fn decode_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn encode_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Encode {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn planar_from_interleaved(
    h: usize,
    w: usize,
    c: usize,
    samples: impl Iterator<Item = f64>,
) -> Vec<f64> {
    let mut data = vec![0.0; h * w * c];
    for (i, s) in samples.enumerate() {
        data[(i % c) * h * w + i / c] = s;
    }
    data
}

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(RAW_MAGIC) {
        return decode_raw(path, &bytes);
    }
    let reader = image::ImageReader::new(std::io::Cursor::new(&bytes))
        .with_guessed_format()
        .map_err(|e| decode_err(path, e.to_string()))?;
    let decoded = reader
        .decode()
        .map_err(|e| decode_err(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let color = decoded.color();
    let deep = color.bytes_per_pixel() / color.channel_count() > 1;
    let data = match (color.has_color(), deep) {
        (false, false) => {
            let buf = decoded.to_luma8();
            planar_from_interleaved(
                h,
                w,
                1,
                buf.into_raw().into_iter().map(|v| v as f64 / 255.0),
            )
        }
        (false, true) => {
            let buf = decoded.to_luma16();
            planar_from_interleaved(
                h,
                w,
                1,
                buf.into_raw().into_iter().map(|v| v as f64 / 65535.0),
            )
        }
        (true, false) => {
            let buf = decoded.to_rgb8();
            planar_from_interleaved(
                h,
                w,
                3,
                buf.into_raw().into_iter().map(|v| v as f64 / 255.0),
            )
        }
        (true, true) => {
            let buf = decoded.to_rgb16();
            planar_from_interleaved(
                h,
                w,
                3,
                buf.into_raw().into_iter().map(|v| v as f64 / 65535.0),
            )
        }
    };
    let channels = if color.has_color() { 3 } else { 1 };
    Image::new(h, w, channels, data, NominalRange::Unit)
        .map_err(|e| decode_err(path, e.to_string()))
}

fn decode_raw(path: &Path, bytes: &[u8]) -> Result<Image> {
    let rest = &bytes[RAW_MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| decode_err(path, "truncated raw header"))?;
    let header =
        std::str::from_utf8(&rest[..nl]).map_err(|_| decode_err(path, "bad raw header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [h, w, c, range] = fields.as_slice() else {
        return Err(decode_err(path, format!("bad raw header {header:?}")));
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| decode_err(path, format!("bad dimension {s:?}")))
    };
    let (h, w, c) = (parse(h)?, parse(w)?, parse(c)?);
    let range = match *range {
        "unit" => NominalRange::Unit,
        "byte" => NominalRange::Byte,
        other => return Err(decode_err(path, format!("bad range {other:?}"))),
    };
    let payload = &rest[nl + 1..];
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| decode_err(path, "raw dimensions overflow"))?;
    if payload.len() != n * 8 {
        return Err(decode_err(
            path,
            format!("expected {} payload bytes, found {}", n * 8, payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Image::new(h, w, c, data, range).map_err(|e| decode_err(path, e.to_string()))
}

/// What saving had to do to fit the target format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaveReport {
    /// Samples outside the nominal range that were clamped.
    pub clamped: usize,
}

fn quantize(img: &Image, levels: f64) -> (Vec<f64>, usize) {
    let max = img.range().max();
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut clamped = 0;
    let mut out = Vec::with_capacity(h * w * c);
    for p in 0..h * w {
        for ch in 0..c {
            let v = img.data()[ch * h * w + p];
            let t = v.clamp(0.0, max);
            if t != v {
                clamped += 1;
            }
            out.push((t / max * levels).round());
        }
    }
    (out, clamped)
}

fn encode_raw(img: &Image) -> Vec<u8> {
    let range = match img.range() {
        NominalRange::Unit => "unit",
        NominalRange::Byte => "byte",
    };
    let mut bytes = RAW_MAGIC.to_vec();
    bytes.extend_from_slice(
        format!(
            "{} {} {} {range}\n",
            img.height(),
            img.width(),
            img.channels()
        )
        .as_bytes(),
    );
    for v in img.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Encodes `img` in `format` and writes it to `path`.
pub fn save_image(img: &Image, path: &Path, format: ImageFormat) -> Result<SaveReport> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let gray = img.channels() == 1;
    if format == ImageFormat::Raw {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&encode_raw(img))
            .map_err(|e| Error::io(path, e))?;
        return Ok(SaveReport::default());
    }
    match format {
        ImageFormat::Pgm if !gray => {
            return Err(encode_err(path, "pgm needs a single-channel image"))
        }
        ImageFormat::Ppm if gray => return Err(encode_err(path, "ppm needs a 3-channel image")),
        _ => {}
    }
    let deep = format == ImageFormat::Png16;
    let (samples, clamped) = quantize(img, if deep { 65535.0 } else { 255.0 });
    let dynamic = match (gray, deep) {
        (true, false) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, samples.iter().map(|v| *v as u8).collect())
                .expect("buffer size"),
        ),
        (false, false) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, samples.iter().map(|v| *v as u8).collect())
                .expect("buffer size"),
        ),
        (true, true) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(
                w,
                h,
                samples.iter().map(|v| *v as u16).collect(),
            )
            .expect("buffer size"),
        ),
        (false, true) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, samples.iter().map(|v| *v as u16).collect())
                .expect("buffer size"),
        ),
    };
    let target = match format {
        ImageFormat::Png8 | ImageFormat::Png16 => image::ImageFormat::Png,
        _ => image::ImageFormat::Pnm,
    };
    dynamic
        .save_with_format(path, target)
        .map_err(|e| encode_err(path, e.to_string()))?;
    Ok(SaveReport { clamped })
}
