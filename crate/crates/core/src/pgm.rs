//! PGM reader (binary P5 and ASCII P2) and P5 writer, 8-bit square images only.

use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a PGM file (expected magic P5 or P2)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("truncated raster: expected {expected} samples, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed ASCII raster: {0}")]
    MalformedRaster(String),
    #[error("image is {width}x{height}; only square images are supported")]
    NonSquare { width: usize, height: usize },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Binary,
    Ascii,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments running to end of line.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, PgmError> {
        let tok = self
            .token()
            .ok_or_else(|| PgmError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                PgmError::MalformedHeader(format!(
                    "{what} is not a number: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let encoding = match bytes.get(..2) {
        Some(b"P5") => Encoding::Binary,
        Some(b"P2") => Encoding::Ascii,
        _ => return Err(PgmError::BadMagic),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(PgmError::BadMagic);
    }

    let width = cur.header_number("width")? as usize;
    let height = cur.header_number("height")? as usize;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    if width != height {
        return Err(PgmError::NonSquare { width, height });
    }
    let expected = width * height;

    let pixels = match encoding {
        Encoding::Binary => {
            // Exactly one whitespace byte separates maxval from the raster.
            match cur.bytes.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => {
                    return Err(PgmError::MalformedHeader(
                        "missing separator after maxval".into(),
                    ))
                }
            }
            let raster = &cur.bytes[cur.pos..];
            if raster.len() < expected {
                return Err(PgmError::Truncated {
                    expected,
                    actual: raster.len(),
                });
            }
            raster[..expected].to_vec()
        }
        Encoding::Ascii => {
            let mut pixels = Vec::with_capacity(expected);
            while pixels.len() < expected {
                let Some(tok) = cur.token() else {
                    return Err(PgmError::Truncated {
                        expected,
                        actual: pixels.len(),
                    });
                };
                let value = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse::<u8>().ok())
                    .ok_or_else(|| {
                        PgmError::MalformedRaster(format!(
                            "bad sample {:?}",
                            String::from_utf8_lossy(tok)
                        ))
                    })?;
                pixels.push(value);
            }
            pixels
        }
    };

    Ok(GrayImage::new(width, pixels).expect("length checked against header"))
}

/// Encodes as binary P5 with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{0} {0}\n255\n", img.side());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
