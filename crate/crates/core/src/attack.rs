//! Chosen-plaintext lookup-table forgery.
//!
//! The watermark bit of a pixel depends only on the key, its position and
//! its 7 MSBs, so 128 oracle queries with constant probes `0, 2, 4, ..., 254`
//! reveal the bit for every (position, MSB value) pair. With that table the
//! attacker can put a valid watermark on any image, no key required.

use std::error::Error as StdError;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::image::{GrayImage, ImageError};
use crate::scheme::{embed, SchemeError, SchemeKey, WatermarkPattern};

/// Number of 7-bit MSB classes, and therefore of oracle queries.
pub const PROBE_COUNT: usize = 128;

pub const LUT_MAGIC: &[u8; 8] = b"LSBFLUT1";
pub const LUT_HEADER_LEN: usize = LUT_MAGIC.len() + 4;

type BoxError = Box<dyn StdError + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("oracle query for probe {probe} failed")]
    Oracle {
        probe: usize,
        #[source]
        source: BoxError,
    },
    #[error("oracle query failed")]
    Query(#[source] BoxError),
    #[error("oracle answered with side {actual}, expected {expected}")]
    ResponseSize { expected: usize, actual: usize },
    #[error("probe {0} recorded twice")]
    DuplicateProbe(usize),
    #[error("probe index {0} out of range")]
    ProbeOutOfRange(usize),
    #[error("lookup table incomplete: {missing} probes never recorded")]
    IncompleteLut { missing: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("invalid lookup table file: {0}")]
    BadLutFile(String),
    #[error("rectangle {rect:?} does not fit in a {side}x{side} image")]
    EditOutOfBounds { rect: Rect, side: usize },
    #[error("fill has {actual} bytes, rectangle needs {expected}")]
    FillLength { expected: usize, actual: usize },
}

/// The keyholder's embedding function as seen by the attacker: submit an
/// image, get back its watermarked version. Responses must be deterministic.
pub trait Oracle {
    type Error: StdError + Send + Sync + 'static;

    fn submit(&self, img: &GrayImage) -> Result<GrayImage, Self::Error>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    type Error = O::Error;

    fn submit(&self, img: &GrayImage) -> Result<GrayImage, Self::Error> {
        (**self).submit(img)
    }
}

/// In-process oracle holding the secret key.
#[derive(Debug, Clone)]
pub struct LocalOracle {
    key: SchemeKey,
    watermark: WatermarkPattern,
}

impl LocalOracle {
    pub fn new(key: SchemeKey, watermark: WatermarkPattern) -> Self {
        Self { key, watermark }
    }
}

impl Oracle for LocalOracle {
    type Error = SchemeError;

    fn submit(&self, img: &GrayImage) -> Result<GrayImage, SchemeError> {
        embed(&self.key, img, &self.watermark)
    }
}

/// Wraps an oracle and counts queries.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    queries: AtomicUsize,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            queries: AtomicUsize::new(0),
        }
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    type Error = O::Error;

    fn submit(&self, img: &GrayImage) -> Result<GrayImage, O::Error> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.inner.submit(img)
    }
}

/// Probe `j`: every pixel set to `2j` (MSB class `j`, LSB 0).
pub fn probe_image(side: usize, j: usize) -> Result<GrayImage, AttackError> {
    if j >= PROBE_COUNT {
        return Err(AttackError::ProbeOutOfRange(j));
    }
    Ok(GrayImage::filled(side, (2 * j) as u8)?)
}

pub fn probe_images(side: usize) -> Result<Vec<GrayImage>, AttackError> {
    (0..PROBE_COUNT).map(|j| probe_image(side, j)).collect()
}

/// `LUT[x][y][v7]`: the watermark bit at `(x, y)` for a pixel whose 7 MSBs
/// equal `v7`. One `u128` per pixel, bit `v7` of it.
#[derive(Clone, PartialEq, Eq)]
pub struct ForgeryLut {
    side: usize,
    cells: Vec<u128>,
}

impl std::fmt::Debug for ForgeryLut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForgeryLut")
            .field("side", &self.side)
            .finish_non_exhaustive()
    }
}

impl ForgeryLut {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bit(&self, x: usize, y: usize, v7: u8) -> bool {
        debug_assert!(v7 < 128);
        (self.cells[y * self.side + x] >> v7) & 1 == 1
    }

    /// Table payload in bits, excluding the file header.
    pub fn payload_bits(&self) -> usize {
        self.cells.len() * 128
    }

    /// Serializes as magic, side (u32 LE), then one 16-byte little-endian
    /// block per pixel in row-major order; bit `v7` of a block sits at byte
    /// `v7 / 8`, bit `v7 % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LUT_HEADER_LEN + self.cells.len() * 16);
        out.extend_from_slice(LUT_MAGIC);
        out.extend_from_slice(&(self.side as u32).to_le_bytes());
        for cell in &self.cells {
            out.extend_from_slice(&cell.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AttackError> {
        let bad = |m: &str| AttackError::BadLutFile(m.to_owned());
        if bytes.len() < LUT_HEADER_LEN || &bytes[..LUT_MAGIC.len()] != LUT_MAGIC {
            return Err(bad("missing magic"));
        }
        let side_bytes: [u8; 4] = bytes[LUT_MAGIC.len()..LUT_HEADER_LEN].try_into().unwrap();
        let side = u32::from_le_bytes(side_bytes) as usize;
        if side == 0 {
            return Err(bad("side is zero"));
        }
        let payload = &bytes[LUT_HEADER_LEN..];
        let expected = side
            .checked_mul(side)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| bad("side too large"))?;
        if payload.len() != expected {
            return Err(AttackError::BadLutFile(format!(
                "payload is {} bytes, side {side} needs {expected}",
                payload.len()
            )));
        }
        let cells = payload
            .chunks_exact(16)
            .map(|c| u128::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { side, cells })
    }
}

/// Accumulates oracle responses into a [`ForgeryLut`], one probe at a time.
#[derive(Debug)]
pub struct LutBuilder {
    side: usize,
    cells: Vec<u128>,
    recorded: u128,
}

impl LutBuilder {
    pub fn new(side: usize) -> Result<Self, AttackError> {
        crate::image::check_len(side, side * side)?;
        Ok(Self {
            side,
            cells: vec![0; side * side],
            recorded: 0,
        })
    }

    /// Stores the LSB plane of the oracle's answer to probe `j`.
    pub fn record(&mut self, j: usize, response: &GrayImage) -> Result<(), AttackError> {
        if j >= PROBE_COUNT {
            return Err(AttackError::ProbeOutOfRange(j));
        }
        if response.side() != self.side {
            return Err(AttackError::ResponseSize {
                expected: self.side,
                actual: response.side(),
            });
        }
        if self.recorded >> j & 1 == 1 {
            return Err(AttackError::DuplicateProbe(j));
        }
        self.recorded |= 1 << j;
        for (cell, &p) in self.cells.iter_mut().zip(response.pixels()) {
            *cell |= u128::from(p & 1) << j;
        }
        Ok(())
    }

    pub fn missing(&self) -> usize {
        PROBE_COUNT - self.recorded.count_ones() as usize
    }

    pub fn finish(self) -> Result<ForgeryLut, AttackError> {
        match self.missing() {
            0 => Ok(ForgeryLut {
                side: self.side,
                cells: self.cells,
            }),
            missing => Err(AttackError::IncompleteLut { missing }),
        }
    }
}

fn query<O: Oracle>(oracle: &O, j: usize, probe: &GrayImage) -> Result<GrayImage, AttackError> {
    oracle.submit(probe).map_err(|e| AttackError::Oracle {
        probe: j,
        source: Box::new(e),
    })
}

/// Issues exactly 128 queries, one per probe, in order.
pub fn build_lut<O: Oracle>(oracle: &O, side: usize) -> Result<ForgeryLut, AttackError> {
    let mut builder = LutBuilder::new(side)?;
    for j in 0..PROBE_COUNT {
        let probe = probe_image(side, j)?;
        let response = query(oracle, j, &probe)?;
        builder.record(j, &response)?;
    }
    builder.finish()
}

/// Same table as [`build_lut`], with the 128 queries issued concurrently.
pub fn build_lut_parallel<O: Oracle + Sync>(
    oracle: &O,
    side: usize,
) -> Result<ForgeryLut, AttackError> {
    let mut builder = LutBuilder::new(side)?;
    let responses = (0..PROBE_COUNT)
        .into_par_iter()
        .map(|j| query(oracle, j, &probe_image(side, j)?))
        .collect::<Result<Vec<_>, _>>()?;
    for (j, response) in responses.iter().enumerate() {
        builder.record(j, response)?;
    }
    builder.finish()
}

/// Spends one extra query on `img` and counts pixels whose returned LSB
/// disagrees with the table. Zero for a correct table and a deterministic
/// oracle.
pub fn cross_validate<O: Oracle>(
    oracle: &O,
    lut: &ForgeryLut,
    img: &GrayImage,
) -> Result<usize, AttackError> {
    img.ensure_same_side(lut.side)?;
    let marked = oracle
        .submit(img)
        .map_err(|e| AttackError::Query(Box::new(e)))?;
    img.ensure_same_side(marked.side())?;
    let side = lut.side;
    Ok((0..side * side)
        .filter(|&i| {
            let (x, y) = (i % side, i / side);
            (marked.lsb(x, y) == 1) != lut.bit(x, y, img.msb7(x, y))
        })
        .count())
}

/// Rewrites every LSB from the table; no oracle access.
pub fn forge(lut: &ForgeryLut, img: &GrayImage) -> Result<GrayImage, AttackError> {
    img.ensure_same_side(lut.side)?;
    let mut out = img.clone();
    for (p, cell) in out.pixels_mut().iter_mut().zip(&lut.cells) {
        let bit = (cell >> (*p >> 1)) & 1;
        *p = (*p & 0xFE) | bit as u8;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x..self.x + self.w).contains(&x) && (self.y..self.y + self.h).contains(&y)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

impl std::str::FromStr for Rect {
    type Err = String;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad rectangle {s:?}: {e}"))?;
        match parts[..] {
            [x, y, w, h] => Ok(Rect { x, y, w, h }),
            _ => Err(format!("rectangle {s:?} must be x,y,w,h")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fill {
    Constant(u8),
    /// Uniform bytes from a seeded generator.
    Random {
        seed: u64,
    },
    /// Row-major `w * h` patch.
    Patch(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TamperEdit {
    None,
    Overwrite { rect: Rect, fill: Fill },
}

pub fn apply_edit(img: &GrayImage, edit: &TamperEdit) -> Result<GrayImage, AttackError> {
    let TamperEdit::Overwrite { rect, fill } = edit else {
        return Ok(img.clone());
    };
    let side = img.side();
    if rect.x + rect.w > side || rect.y + rect.h > side {
        return Err(AttackError::EditOutOfBounds { rect: *rect, side });
    }
    let patch = match fill {
        Fill::Constant(v) => vec![*v; rect.area()],
        Fill::Random { seed } => {
            let mut bytes = vec![0; rect.area()];
            ChaCha8Rng::seed_from_u64(*seed).fill_bytes(&mut bytes);
            bytes
        }
        Fill::Patch(bytes) => {
            if bytes.len() != rect.area() {
                return Err(AttackError::FillLength {
                    expected: rect.area(),
                    actual: bytes.len(),
                });
            }
            bytes.clone()
        }
    };
    let mut out = img.clone();
    for dy in 0..rect.h {
        for dx in 0..rect.w {
            out.set(rect.x + dx, rect.y + dy, patch[dy * rect.w + dx]);
        }
    }
    Ok(out)
}

/// Builds the table from the oracle, applies `edit` to `victim`, and forges
/// a valid watermark onto the result.
pub fn attack_end_to_end<O: Oracle>(
    oracle: &O,
    victim: &GrayImage,
    edit: &TamperEdit,
) -> Result<GrayImage, AttackError> {
    let lut = build_lut(oracle, victim.side())?;
    let tampered = apply_edit(victim, edit)?;
    forge(&lut, &tampered)
}
