//! Square 8-bit grayscale rasters, binary tamper maps, PGM I/O and PSNR.
//!
//! Coordinates follow one convention everywhere in the crate: row-major
//! storage, top-left origin, `x` is the column and `y` the row, both 0-based.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image side must be at least 1")]
    EmptySide,
    #[error("expected {expected} pixels for side {side}, got {actual}")]
    LengthMismatch {
        side: usize,
        expected: usize,
        actual: usize,
    },
    #[error("image sides differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    side: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("side", &self.side)
            .field("pixels", &format_args!("[{} bytes]", self.pixels.len()))
            .finish()
    }
}

impl GrayImage {
    pub fn new(side: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_len(side, pixels.len())?;
        Ok(Self { side, pixels })
    }

    /// Image with every pixel set to `value`.
    pub fn filled(side: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(side, vec![value; side * side])
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        if side == 0 {
            return Err(ImageError::EmptySide);
        }
        let mut pixels = Vec::with_capacity(side * side);
        for y in 0..side {
            for x in 0..side {
                pixels.push(f(x, y));
            }
        }
        Ok(Self { side, pixels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.side + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.side + x] = value;
    }

    pub fn lsb(&self, x: usize, y: usize) -> u8 {
        self.get(x, y) & 1
    }

    /// The 7 most significant bits of the pixel, as a value in `0..128`.
    pub fn msb7(&self, x: usize, y: usize) -> u8 {
        self.get(x, y) >> 1
    }

    /// Bit plane `plane` (0 = LSB) as a row-major vector of 0/1 values.
    pub fn bit_plane(&self, plane: u8) -> Vec<u8> {
        assert!(plane < 8, "bit plane index {plane} out of range");
        self.pixels.iter().map(|p| (p >> plane) & 1).collect()
    }

    pub fn ensure_same_side(&self, other_side: usize) -> Result<(), ImageError> {
        if self.side == other_side {
            Ok(())
        } else {
            Err(ImageError::DimensionMismatch(self.side, other_side))
        }
    }
}

pub(crate) fn check_len(side: usize, actual: usize) -> Result<(), ImageError> {
    if side == 0 {
        return Err(ImageError::EmptySide);
    }
    let expected = side * side;
    if actual != expected {
        return Err(ImageError::LengthMismatch {
            side,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Per-pixel tamper indicator; `true` marks a pixel flagged as tampered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperMap {
    side: usize,
    flags: Vec<bool>,
}

impl TamperMap {
    pub fn new(side: usize, flags: Vec<bool>) -> Result<Self, ImageError> {
        check_len(side, flags.len())?;
        Ok(Self { side, flags })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_tampered(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.side + x]
    }

    pub fn tampered_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_clean(&self) -> bool {
        !self.flags.iter().any(|&f| f)
    }

    /// Coordinates `(x, y)` of every flagged pixel in row-major order.
    pub fn tampered_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let side = self.side;
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| (i % side, i / side))
    }

    /// Renders the map as an image: 255 for tampered, 0 for clean.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            side: self.side,
            pixels: self
                .flags
                .iter()
                .map(|&f| if f { 255 } else { 0 })
                .collect(),
        }
    }
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    a.ensure_same_side(b.side)?;
    let sse: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| {
            let d = i64::from(p) - i64::from(q);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.pixels.len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}
