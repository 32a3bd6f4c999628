//! Binary PGM (P5, maxval 255) images and pixel corruption.

use std::io::{Read, Write};

use schatten_core::rng::{derive_seed, keys, seeded, standard_normal};
use schatten_core::sparse::sample_mask;
use schatten_core::{DenseMatrix, SparseObservations};

use crate::error::{McError, Result};

pub const MAX_VALUE: u8 = 255;

/// 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(McError::Format(format!("image dimensions {width}x{height} must be positive")));
        }
        if pixels.len() != width * height {
            return Err(McError::Format(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
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

    /// `height × width` matrix of pixel values.
    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.height, self.width, |i, j| self.pixels[i * self.width + j] as f64)
    }

    /// Rounds and clamps matrix entries to `[0, 255]`.
    pub fn from_matrix(x: &DenseMatrix) -> Result<Self> {
        let pixels = x.as_slice().iter().map(|&v| clamp_pixel(v).round() as u8).collect();
        GrayImage::new(x.cols(), x.rows(), pixels)
    }
}

pub fn clamp_pixel(v: f64) -> f64 {
    v.clamp(0.0, MAX_VALUE as f64)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| McError::Format(format!("PGM header: missing or invalid {what}")))
    }
}

/// Reads a binary P5 image with maxval 255; `#` comments are allowed
/// anywhere in the header.
pub fn read_pgm<R: Read>(mut reader: R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| McError::Format(format!("reading PGM: {e}")))?;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(McError::Format(format!("unsupported PGM magic {magic:?} (only binary P5 is read)")));
    }
    let mut h = Header { bytes: &bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != MAX_VALUE as usize {
        return Err(McError::Format(format!("PGM maxval {maxval} is not 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(McError::Format("PGM header not terminated by whitespace".into())),
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| McError::Format("PGM dimensions overflow".into()))?;
    let have = bytes.len() - h.pos;
    if have < need {
        return Err(McError::Format(format!(
            "truncated PGM payload: expected {need} bytes, found {have}"
        )));
    }
    GrayImage::new(width, height, bytes[h.pos..h.pos + need].to_vec())
}

pub fn write_pgm<W: Write>(img: &GrayImage, mut writer: W) -> std::io::Result<()> {
    write!(writer, "P5\n{} {}\n{}\n", img.width, img.height, MAX_VALUE)?;
    writer.write_all(&img.pixels)?;
    writer.flush()
}

/// Outcome of [`corrupt_image`].
#[derive(Debug, Clone)]
pub struct Corruption {
    /// Intact pixels, the completion input.
    pub observations: SparseObservations,
    /// Row-major; `true` where the pixel is observed.
    pub mask: Vec<bool>,
    /// The image as shown to a viewer: corrupted pixels replaced by
    /// `N(127.5, noise_sigma²)` noise, rounded and clamped.
    pub noisy: GrayImage,
}

/// Replaces `⌈fraction · pixels⌉` uniformly chosen pixels by Gaussian noise.
/// The corrupted positions are treated as missing: only the remaining pixels
/// enter the observation set.
pub fn corrupt_image(img: &GrayImage, fraction: f64, noise_sigma: f64, seed: u64) -> Result<Corruption> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(McError::Input(format!("corruption fraction must lie in [0, 1), got {fraction}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(McError::Input(format!("noise sigma must be non-negative, got {noise_sigma}")));
    }
    let (h, w) = (img.height, img.width);
    let kept = sample_mask(h, w, 1.0 - fraction, derive_seed(seed, keys::CORRUPT))?;
    if kept.is_empty() {
        return Err(McError::Input("corruption leaves no observed pixels".into()));
    }
    let mut mask = vec![false; h * w];
    for &(i, j) in &kept {
        mask[i * w + j] = true;
    }
    let entries = kept.iter().map(|&(i, j)| (i, j, img.pixels[i * w + j] as f64)).collect();
    let observations = SparseObservations::new(h, w, entries)?;
    let mut rng = seeded(derive_seed(seed, keys::NOISE));
    let noisy_pixels = img
        .pixels
        .iter()
        .zip(&mask)
        .map(|(&p, &keep)| {
            if keep {
                p
            } else {
                clamp_pixel(127.5 + noise_sigma * standard_normal(&mut rng)).round() as u8
            }
        })
        .collect();
    Ok(Corruption {
        observations,
        mask,
        noisy: GrayImage::new(w, h, noisy_pixels)?,
    })
}
