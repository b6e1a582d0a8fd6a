//! Keyed LSB fragile watermarking with tamper localization.
//!
//! Embedding scrambles the host with `k` cat-map iterations, replaces every
//! LSB of the scrambled image with
//!
//! ```text
//! parity( (W(x,y) xor C(x,y)) || HMAC-SHA256(mac_key, (p & 0xFE) || x || y) )
//! ```
//!
//! evaluated at the scrambled coordinates, then unscrambles with the
//! remaining `T - k` iterations. Detection recomputes the same bit and
//! flags every position whose LSB disagrees.

use hmac::{Hmac, Mac};
use rayon::prelude::*;
use sha2::Sha256;
use thiserror::Error;

use crate::chaos::{
    arnold_period, logistic_bits, scramble, scramble_plane, ChaoticBits, LogisticParams,
};
use crate::image::{GrayImage, ImageError, TamperMap};

type HmacSha256 = Hmac<Sha256>;

pub const MAC_KEY_LEN: usize = 32;

/// Largest side whose coordinates fit the 16-bit fields of the MAC input.
pub const MAX_SIDE: usize = 1 << 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemeError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("scramble count k = {k} must lie in [1, {}] for side {side} (period {period})", period - 1)]
    KeyOutOfRange { k: u64, side: usize, period: u64 },
    #[error("coordinate ({x}, {y}) does not fit in 16 bits")]
    CoordinateOverflow { x: usize, y: usize },
    #[error("side {0} exceeds the supported maximum of {MAX_SIDE}")]
    ImageTooLarge(usize),
}

/// All secret material: cat-map iteration count, logistic parameters and
/// the HMAC key.
#[derive(Clone, PartialEq)]
pub struct SchemeKey {
    pub k: u64,
    pub logistic: LogisticParams,
    pub mac_key: [u8; MAC_KEY_LEN],
}

impl std::fmt::Debug for SchemeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemeKey")
            .field("k", &self.k)
            .field("logistic", &self.logistic)
            .field("mac_key", &"<redacted>")
            .finish()
    }
}

impl SchemeKey {
    pub fn new(k: u64, logistic: LogisticParams, mac_key: [u8; MAC_KEY_LEN]) -> Self {
        Self {
            k,
            logistic,
            mac_key,
        }
    }

    /// Checks that the key can scramble a lattice of side `side`, returning
    /// the cat-map period for that side.
    pub fn period_for(&self, side: usize) -> Result<u64, SchemeError> {
        if side > MAX_SIDE {
            return Err(SchemeError::ImageTooLarge(side));
        }
        if side == 0 {
            return Err(ImageError::EmptySide.into());
        }
        let period = arnold_period(side);
        if self.k == 0 || self.k >= period {
            return Err(SchemeError::KeyOutOfRange {
                k: self.k,
                side,
                period,
            });
        }
        Ok(period)
    }
}

/// The binary watermark W, same side as the host image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkPattern {
    side: usize,
    bits: Vec<bool>,
}

impl WatermarkPattern {
    pub fn new(side: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        crate::image::check_len(side, bits.len())?;
        Ok(Self { side, bits })
    }

    /// Thresholds a grayscale picture: pixels `>= 128` become 1.
    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            side: img.side(),
            bits: img.pixels().iter().map(|&p| p >= 128).collect(),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.side + x]
    }
}

/// The 5-byte HMAC message: `p & 0xFE`, then `x` and `y` as big-endian u16.
pub fn mac_input(p: u8, x: usize, y: usize) -> Result<[u8; 5], SchemeError> {
    let (Ok(xx), Ok(yy)) = (u16::try_from(x), u16::try_from(y)) else {
        return Err(SchemeError::CoordinateOverflow { x, y });
    };
    let [x_hi, x_lo] = xx.to_be_bytes();
    let [y_hi, y_lo] = yy.to_be_bytes();
    Ok([p & 0xFE, x_hi, x_lo, y_hi, y_lo])
}

/// Per-pixel watermark bit evaluator with the HMAC key schedule done once.
///
/// Embedding and detection both go through [`WatermarkBits::bit`];
/// [`WatermarkBits::embedding_bit`] and [`WatermarkBits::expected_bit`] are
/// named entry points for the two sides and add nothing of their own.
#[derive(Clone)]
pub struct WatermarkBits {
    mac: HmacSha256,
}

impl WatermarkBits {
    pub fn new(key: &SchemeKey) -> Self {
        Self {
            mac: HmacSha256::new_from_slice(&key.mac_key).expect("HMAC accepts any key length"),
        }
    }

    pub fn bit(&self, w: bool, c: bool, p: u8, x: usize, y: usize) -> Result<bool, SchemeError> {
        let msg = mac_input(p, x, y)?;
        let mut mac = self.mac.clone();
        mac.update(&msg);
        let digest = mac.finalize().into_bytes();
        let ones: u32 = digest.iter().map(|b| b.count_ones()).sum::<u32>() + u32::from(w ^ c);
        Ok(ones % 2 == 1)
    }

    /// The bit written into the LSB while embedding.
    pub fn embedding_bit(
        &self,
        w: bool,
        c: bool,
        p: u8,
        x: usize,
        y: usize,
    ) -> Result<bool, SchemeError> {
        self.bit(w, c, p, x, y)
    }

    /// The bit the detector expects to read back from the LSB.
    pub fn expected_bit(
        &self,
        w: bool,
        c: bool,
        p: u8,
        x: usize,
        y: usize,
    ) -> Result<bool, SchemeError> {
        self.bit(w, c, p, x, y)
    }
}

pub fn watermark_bit(
    key: &SchemeKey,
    w: bool,
    c: bool,
    p: u8,
    x: usize,
    y: usize,
) -> Result<bool, SchemeError> {
    WatermarkBits::new(key).bit(w, c, p, x, y)
}

/// Bits for every pixel of an already scrambled image, row-major.
fn scrambled_domain_bits<F>(
    bits: &WatermarkBits,
    eval: F,
    scrambled: &GrayImage,
    wm: &WatermarkPattern,
    chaos: &ChaoticBits,
) -> Vec<bool>
where
    F: Fn(&WatermarkBits, bool, bool, u8, usize, usize) -> Result<bool, SchemeError> + Sync,
{
    let side = scrambled.side();
    scrambled
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let (x, y) = (i % side, i / side);
            eval(bits, wm.get(x, y), chaos.get(x, y), p, x, y).expect("side bounded by MAX_SIDE")
        })
        .collect()
}

pub fn embed(
    key: &SchemeKey,
    img: &GrayImage,
    wm: &WatermarkPattern,
) -> Result<GrayImage, SchemeError> {
    let side = img.side();
    img.ensure_same_side(wm.side())?;
    let period = key.period_for(side)?;

    let chaos = logistic_bits(&key.logistic, side);
    let mut scrambled = scramble(img, key.k);
    let bits = WatermarkBits::new(key);
    let wc = scrambled_domain_bits(&bits, WatermarkBits::embedding_bit, &scrambled, wm, &chaos);
    for (p, b) in scrambled.pixels_mut().iter_mut().zip(wc) {
        *p = (*p & 0xFE) | u8::from(b);
    }
    Ok(scramble(&scrambled, period - key.k))
}

pub fn detect(
    key: &SchemeKey,
    img: &GrayImage,
    wm: &WatermarkPattern,
) -> Result<TamperMap, SchemeError> {
    let side = img.side();
    img.ensure_same_side(wm.side())?;
    let period = key.period_for(side)?;

    let chaos = logistic_bits(&key.logistic, side);
    let scrambled = scramble(img, key.k);
    let bits = WatermarkBits::new(key);
    let expected =
        scrambled_domain_bits(&bits, WatermarkBits::expected_bit, &scrambled, wm, &chaos);
    let diff: Vec<bool> = scrambled
        .pixels()
        .iter()
        .zip(expected)
        .map(|(&p, e)| (p & 1 == 1) != e)
        .collect();
    let flags = scramble_plane(&diff, side, period - key.k);
    Ok(TamperMap::new(side, flags)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::scramble_plane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sha2::Digest;

    /// HMAC-SHA256 from the raw hash, independent of the `hmac` crate.
    fn reference_hmac(key: &[u8; 32], msg: &[u8]) -> [u8; 32] {
        let mut k0 = [0u8; 64];
        k0[..32].copy_from_slice(key);
        let ipad: Vec<u8> = k0.iter().map(|b| b ^ 0x36).collect();
        let opad: Vec<u8> = k0.iter().map(|b| b ^ 0x5c).collect();
        let inner = Sha256::new()
            .chain_update(&ipad)
            .chain_update(msg)
            .finalize();
        Sha256::new()
            .chain_update(&opad)
            .chain_update(inner)
            .finalize()
            .into()
    }

    fn reference_bit(key: &SchemeKey, w: bool, c: bool, p: u8, x: u16, y: u16) -> bool {
        let mut msg = vec![p & 0xFE];
        msg.extend_from_slice(&x.to_be_bytes());
        msg.extend_from_slice(&y.to_be_bytes());
        let digest = reference_hmac(&key.mac_key, &msg);
        // Parity of the bit string (w ^ c) || digest.
        let mut bits = vec![w ^ c];
        for byte in digest {
            for i in (0..8).rev() {
                bits.push((byte >> i) & 1 == 1);
            }
        }
        bits.iter().filter(|&&b| b).count() % 2 == 1
    }

    fn test_key(seed: u64) -> SchemeKey {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = rng.gen_range(0.01..0.99);
        SchemeKey::new(5, LogisticParams::new(x0, 3.99, 1000).unwrap(), rng.gen())
    }

    fn random_image(side: usize, rng: &mut impl Rng) -> GrayImage {
        GrayImage::new(side, (0..side * side).map(|_| rng.gen()).collect()).unwrap()
    }

    fn random_pattern(side: usize, rng: &mut impl Rng) -> WatermarkPattern {
        WatermarkPattern::new(side, (0..side * side).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn mac_input_layout() {
        assert_eq!(mac_input(0xFF, 0, 0).unwrap(), [0xFE, 0, 0, 0, 0]);
        assert_eq!(mac_input(0x00, 1, 2).unwrap(), [0, 0, 1, 0, 2]);
        assert_eq!(
            mac_input(0xAB, 256, 65535).unwrap(),
            [0xAA, 0x01, 0x00, 0xFF, 0xFF]
        );
        assert_eq!(
            mac_input(0, 65536, 0),
            Err(SchemeError::CoordinateOverflow { x: 65536, y: 0 })
        );
    }

    #[test]
    fn hmac_known_answers() {
        // RFC 4231 test case 2.
        let mut mac = HmacSha256::new_from_slice(b"Jefe").unwrap();
        mac.update(b"what do ya want for nothing?");
        assert_eq!(
            hex::encode(mac.finalize().into_bytes()),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
        let key = [7u8; 32];
        let mut mac = HmacSha256::new_from_slice(&key).unwrap();
        mac.update(b"abc");
        assert_eq!(
            mac.finalize().into_bytes().as_slice(),
            &reference_hmac(&key, b"abc")
        );
    }

    #[test]
    fn zero_key_reference_bit() {
        let key = SchemeKey::new(1, LogisticParams::new(0.2, 4.0, 0).unwrap(), [0; 32]);
        let digest = reference_hmac(&[0; 32], &[0x80, 0, 0, 0, 0]);
        let parity = digest.iter().map(|b| b.count_ones()).sum::<u32>() % 2 == 1;
        assert_eq!(
            watermark_bit(&key, false, false, 0x80, 0, 0).unwrap(),
            parity
        );
        assert_eq!(reference_bit(&key, false, false, 0x80, 0, 0), parity);
    }

    #[test]
    fn bit_matches_reference_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..500 {
            let key = test_key(i);
            let (w, c, p, x, y) = (
                rng.gen(),
                rng.gen(),
                rng.gen(),
                rng.gen::<u16>(),
                rng.gen::<u16>(),
            );
            assert_eq!(
                watermark_bit(&key, w, c, p, x.into(), y.into()).unwrap(),
                reference_bit(&key, w, c, p, x, y)
            );
        }
    }

    #[test]
    fn lsb_is_masked_and_w_c_flip_the_bit() {
        let key = test_key(3);
        let bits = WatermarkBits::new(&key);
        for p in 0..=255u8 {
            for (w, c) in [(false, false), (false, true), (true, false), (true, true)] {
                let b = bits.bit(w, c, p, 3, 9).unwrap();
                assert_eq!(b, bits.bit(w, c, p ^ 1, 3, 9).unwrap());
                assert_eq!(!b, bits.bit(!w, c, p, 3, 9).unwrap());
                assert_eq!(!b, bits.bit(w, !c, p, 3, 9).unwrap());
            }
        }
    }

    #[test]
    fn key_range_is_checked() {
        let mut key = test_key(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(8, &mut rng);
        let wm = random_pattern(8, &mut rng);
        let period = arnold_period(8);
        for bad in [0, period, period + 3] {
            key.k = bad;
            assert_eq!(
                embed(&key, &img, &wm),
                Err(SchemeError::KeyOutOfRange {
                    k: bad,
                    side: 8,
                    period
                })
            );
        }
        key.k = period - 1;
        assert!(embed(&key, &img, &wm).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let key = test_key(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(16, &mut rng);
        let wm = random_pattern(8, &mut rng);
        assert_eq!(
            embed(&key, &img, &wm),
            Err(SchemeError::Image(ImageError::DimensionMismatch(16, 8)))
        );
        assert!(matches!(
            detect(&key, &img, &wm),
            Err(SchemeError::Image(_))
        ));
    }

    #[test]
    fn embed_matches_step_by_step_construction() {
        let key = test_key(9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let side = 24;
        let img = random_image(side, &mut rng);
        let wm = random_pattern(side, &mut rng);
        let period = arnold_period(side);

        // Spell out the pipeline with the reference bit and plain loops.
        let chaos = crate::chaos::logistic_sequence(&key.logistic, side * side);
        let mut s = scramble_plane(img.pixels(), side, key.k);
        for y in 0..side {
            for x in 0..side {
                let i = y * side + x;
                let b = reference_bit(&key, wm.get(x, y), chaos[i], s[i], x as u16, y as u16);
                s[i] = (s[i] & 0xFE) | u8::from(b);
            }
        }
        let expected = scramble_plane(&s, side, period - key.k);
        assert_eq!(
            embed(&key, &img, &wm).unwrap().pixels(),
            expected.as_slice()
        );
    }

    #[test]
    fn round_trip_and_single_lsb_flip() {
        let key = test_key(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let side = 32;
        let img = random_image(side, &mut rng);
        let wm = random_pattern(side, &mut rng);
        let marked = embed(&key, &img, &wm).unwrap();
        assert!(detect(&key, &marked, &wm).unwrap().is_clean());

        for _ in 0..20 {
            let (x, y) = (rng.gen_range(0..side), rng.gen_range(0..side));
            let mut t = marked.clone();
            t.set(x, y, t.get(x, y) ^ 1);
            let map = detect(&key, &t, &wm).unwrap();
            assert_eq!(map.tampered_pixels().collect::<Vec<_>>(), vec![(x, y)]);
        }
    }

    #[test]
    fn idempotent_and_minimal_change() {
        let key = test_key(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(20, &mut rng);
        let wm = random_pattern(20, &mut rng);
        let once = embed(&key, &img, &wm).unwrap();
        assert_eq!(embed(&key, &once, &wm).unwrap(), once);
        for (a, b) in img.pixels().iter().zip(once.pixels()) {
            assert_eq!(a >> 1, b >> 1);
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn wrong_mac_key_flags_about_half() {
        let key = test_key(6);
        let mut other = key.clone();
        other.mac_key[0] ^= 1;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(64, &mut rng);
        let wm = random_pattern(64, &mut rng);
        let marked = embed(&key, &img, &wm).unwrap();
        let frac = detect(&other, &marked, &wm).unwrap().tampered_count() as f64 / 4096.0;
        assert!((0.45..=0.55).contains(&frac), "flagged fraction {frac}");
    }

    #[test]
    fn watermark_from_image_thresholds_at_128() {
        let img = GrayImage::new(2, vec![0, 127, 128, 255]).unwrap();
        assert_eq!(
            WatermarkPattern::from_image(&img).bits(),
            &[false, false, true, true]
        );
    }
}
