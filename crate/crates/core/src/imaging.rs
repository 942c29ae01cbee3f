//! Grayscale image decoding, resizing, augmentation, and synthetic fixtures.
//!
//! Every downstream stage consumes a uniform 8-bit raster. Decoding accepts
//! PGM (P2 ASCII and P5 binary) and PNG; color and 16-bit inputs are reduced
//! to 8-bit grayscale here so the rest of the pipeline never sees anything
//! else.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifiers::Label;
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// An 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "image dimensions must be positive".into(),
            ));
        }
        let expected = width
            .checked_mul(height)
            .ok_or(Error::DimensionOverflow { width, height })?;
        if pixels.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Intensities as a real matrix (rows = scanlines).
    pub fn to_matrix(&self) -> RealMatrix {
        RealMatrix::from_vec(
            self.height,
            self.width,
            self.pixels.iter().map(|&p| f64::from(p)).collect(),
        )
    }
}

/// Decodes a PGM (P2/P5) or PNG file, reducing to 8-bit grayscale.
///
/// The container is sniffed from the file's magic bytes, not its extension.
/// RGB samples collapse to luma with the BT.601 weights
/// `0.299 R + 0.587 G + 0.114 B`, rounded; 16-bit samples divide by 257.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match bytes.as_slice() {
        [b'P', b'2', ..] | [b'P', b'5', ..] => decode_pgm(&bytes),
        [0x89, b'P', b'N', b'G', ..] => decode_png(&bytes),
        _ => Err(Error::UnsupportedFormat(format!(
            "{} is not a PGM or PNG file",
            path.display()
        ))),
    }
}

/// BT.601 luma, rounded to the nearest integer.
fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// 16-bit sample to 8-bit by integer division (65535 maps to 255).
fn narrow16(v: u16) -> u8 {
    (v / 257) as u8
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::DynamicImage;

    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::UnsupportedFormat(format!("PNG decode failed: {e}")))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(img) => img.pixels().map(|p| narrow16(p.0[0])).collect(),
        DynamicImage::ImageLumaA16(img) => img.pixels().map(|p| narrow16(p.0[0])).collect(),
        DynamicImage::ImageRgb8(img) => img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(img) => {
            img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageRgb16(img) => img
            .pixels()
            .map(|p| luma(narrow16(p.0[0]), narrow16(p.0[1]), narrow16(p.0[2])))
            .collect(),
        DynamicImage::ImageRgba16(img) => img
            .pixels()
            .map(|p| luma(narrow16(p.0[0]), narrow16(p.0[1]), narrow16(p.0[2])))
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {:?} is not supported",
                other.color()
            )))
        }
    };
    GrayImage::new(width, height, pixels)
}

/// Incremental PGM token reader over the header section.
struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmHeader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::UnsupportedFormat("truncated PGM header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<u64> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat("malformed PGM header field".into()))
    }
}

fn scale_to_u8(v: u64, maxval: u64) -> u8 {
    if maxval == 255 {
        v as u8
    } else {
        (v * 255 / maxval) as u8
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = PgmHeader::new(bytes);
    let magic = header.token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(Error::UnsupportedFormat("not a P2/P5 PGM".into())),
    };
    let width = header.number()? as usize;
    let height = header.number()? as usize;
    let maxval = header.number()?;
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedFormat("zero PGM dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval} out of range"
        )));
    }
    let count = width
        .checked_mul(height)
        .ok_or(Error::DimensionOverflow { width, height })?;

    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from raster data.
        let data = &bytes[header.pos + 1..];
        let wide = maxval > 255;
        let sample_len = if wide { 2 } else { 1 };
        if data.len() < count * sample_len {
            return Err(Error::UnsupportedFormat("truncated PGM raster".into()));
        }
        for i in 0..count {
            let v = if wide {
                u64::from(u16::from_be_bytes([data[2 * i], data[2 * i + 1]]))
            } else {
                u64::from(data[i])
            };
            if v > maxval {
                return Err(Error::UnsupportedFormat(format!(
                    "PGM sample {v} exceeds maxval {maxval}"
                )));
            }
            pixels.push(scale_to_u8(v, maxval));
        }
    } else {
        for _ in 0..count {
            let v = header.number()?;
            if v > maxval {
                return Err(Error::UnsupportedFormat(format!(
                    "PGM sample {v} exceeds maxval {maxval}"
                )));
            }
            pixels.push(scale_to_u8(v, maxval));
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Writes an 8-bit raster as binary PGM (P5, maxval 255).
pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(img.pixels.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height).expect("vec write");
    out.extend_from_slice(&img.pixels);
    fs::write(path, out).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Bilinear resize with half-pixel-centered sampling.
///
/// Output values round to the nearest integer, so they stay inside the
/// input's min/max range.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParameter("zero target dimension".into()));
    }
    let scale_x = img.width as f64 / out_w as f64;
    let scale_y = img.height as f64 / out_h as f64;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(img.height - 1);
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(img.width - 1);
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = sx - x0 as f64;
            let top = f64::from(img.get(x0, y0)) * (1.0 - fx) + f64::from(img.get(x1, y0)) * fx;
            let bottom = f64::from(img.get(x0, y1)) * (1.0 - fx) + f64::from(img.get(x1, y1)) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, pixels)
}

/// Side of the raster every pipeline entry point standardizes to.
pub const STANDARD_SIZE: usize = 200;

/// Resizes to the pipeline's standard 200x200 raster.
pub fn standardize(img: &GrayImage) -> GrayImage {
    resize_bilinear(img, STANDARD_SIZE, STANDARD_SIZE).expect("nonzero standard size")
}

/// Lossless pixel permutations used for dataset augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augment {
    FlipH,
    FlipV,
    /// Quarter turn clockwise.
    Rot90,
    Rot180,
    /// Quarter turn counter-clockwise.
    Rot270,
}

impl Augment {
    pub const ALL: [Augment; 5] = [
        Augment::FlipH,
        Augment::FlipV,
        Augment::Rot90,
        Augment::Rot180,
        Augment::Rot270,
    ];

    /// The operation that undoes `self`.
    pub fn inverse(self) -> Augment {
        match self {
            Augment::Rot90 => Augment::Rot270,
            Augment::Rot270 => Augment::Rot90,
            other => other,
        }
    }
}

/// Applies an exact pixel permutation; no interpolation.
pub fn augment(img: &GrayImage, op: Augment) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let (out_w, out_h) = match op {
        Augment::Rot90 | Augment::Rot270 => (h, w),
        _ => (w, h),
    };
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = match op {
                Augment::FlipH => (w - 1 - x, y),
                Augment::FlipV => (x, h - 1 - y),
                // The first input row becomes the last output column.
                Augment::Rot90 => (y, h - 1 - x),
                Augment::Rot180 => (w - 1 - x, h - 1 - y),
                Augment::Rot270 => (w - 1 - y, x),
            };
            pixels.push(img.get(sx, sy));
        }
    }
    GrayImage::new(out_w, out_h, pixels).expect("permutation preserves pixel count")
}

fn fixture_rng(class: Label, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match class {
        Label::Benign => 1,
        Label::Malignant => 2,
    });
    rng
}

/// Generates a deterministic synthetic MRI-like slice for the given class.
///
/// Benign fixtures carry one smooth low-contrast blob; malignant fixtures a
/// bright multi-lobed region with speckle. The classes are far apart in the
/// texture features, which is all the generator promises — the images stand
/// in for data that cannot be bundled.
pub fn generate_fixture(class: Label, seed: u64) -> GrayImage {
    let mut rng = fixture_rng(class, seed);
    let n = STANDARD_SIZE;
    let mut field = vec![0.0f64; n * n];

    match class {
        Label::Benign => {
            // One compact smooth blob; the dark background dominates the
            // intensity histogram.
            let background = rng.random_range(18.0..28.0);
            let cx = rng.random_range(85.0..115.0);
            let cy = rng.random_range(85.0..115.0);
            let sigma = rng.random_range(9.0..14.0);
            let amp = rng.random_range(60.0..90.0);
            // Gentle low-frequency ripple keeps the raster non-constant
            // without adding fine texture.
            let phase_x = rng.random_range(0.0..std::f64::consts::TAU);
            let phase_y = rng.random_range(0.0..std::f64::consts::TAU);
            for y in 0..n {
                for x in 0..n {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    let blob = amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                    let ripple = 3.0
                        * (x as f64 / 43.0 + phase_x).sin()
                        * (y as f64 / 37.0 + phase_y).sin();
                    field[y * n + x] = background + blob + ripple;
                }
            }
        }
        Label::Malignant => {
            // A wide irregular mass: several bright lobes over a broad
            // mid-intensity halo, speckled where tissue dominates. The
            // halo spreads intensity across the whole gray range.
            let background = rng.random_range(10.0..20.0);
            let hub_x = rng.random_range(85.0..115.0);
            let hub_y = rng.random_range(85.0..115.0);
            let halo_sigma = rng.random_range(38.0..50.0);
            let halo_amp = rng.random_range(55.0..75.0);
            let lobes = rng.random_range(5..9usize);
            let mut centers = Vec::with_capacity(lobes);
            for _ in 0..lobes {
                let cx = hub_x + rng.random_range(-40.0..40.0);
                let cy = hub_y + rng.random_range(-40.0..40.0);
                let sigma = rng.random_range(8.0..20.0);
                let amp = rng.random_range(120.0..210.0);
                centers.push((cx, cy, sigma, amp));
            }
            for y in 0..n {
                for x in 0..n {
                    let hx = x as f64 - hub_x;
                    let hy = y as f64 - hub_y;
                    let mut v = background
                        + halo_amp * (-(hx * hx + hy * hy) / (2.0 * halo_sigma * halo_sigma)).exp();
                    for &(cx, cy, sigma, amp) in &centers {
                        let dx = x as f64 - cx;
                        let dy = y as f64 - cy;
                        v += amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                    }
                    // Speckle only where tumor tissue dominates.
                    if v > 45.0 {
                        v *= rng.random_range(0.6..1.4);
                    }
                    field[y * n + x] = v;
                }
            }
        }
    }

    let pixels = field
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(n, n, pixels).expect("fixture has standard dimensions")
}
