#![allow(dead_code)]

use lsbmark::chaos::LogisticParams;
use lsbmark::{GrayImage, SchemeKey, WatermarkPattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random key whose scramble count is valid for `side`.
pub fn random_key(side: usize, rng: &mut impl Rng) -> SchemeKey {
    let period = lsbmark::chaos::arnold_period(side);
    let logistic = loop {
        if let Ok(p) =
            LogisticParams::new(rng.gen(), rng.gen_range(3.57..=4.0), rng.gen_range(0..2000))
        {
            break p;
        }
    };
    SchemeKey::new(rng.gen_range(1..period), logistic, rng.gen())
}

pub fn random_image(side: usize, rng: &mut impl Rng) -> GrayImage {
    GrayImage::new(side, (0..side * side).map(|_| rng.gen()).collect()).unwrap()
}

pub fn random_pattern(side: usize, rng: &mut impl Rng) -> WatermarkPattern {
    WatermarkPattern::new(side, (0..side * side).map(|_| rng.gen()).collect()).unwrap()
}

/// A smooth synthetic scene: gradient sky over a darker band.
pub fn scene(side: usize) -> GrayImage {
    GrayImage::from_fn(side, |x, y| {
        if y > side * 2 / 3 {
            (40 + (x * 60 / side)) as u8
        } else {
            (120 + (y * 100 / side) + (x % 7)) as u8
        }
    })
    .unwrap()
}
