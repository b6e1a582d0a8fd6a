//! Keyed LSB fragile watermarking with tamper localization, and the
//! chosen-plaintext lookup-table forgery that defeats it.
//!
//! - [`image`], [`pgm`]: square 8-bit grayscale rasters and their file format.
//! - [`chaos`]: Arnold cat map scrambling and logistic-map bit planes.
//! - [`scheme`]: key material, per-pixel watermark bits, [`embed`] and [`detect`].
//! - [`attack`]: probes, [`ForgeryLut`] construction from an [`Oracle`], [`forge`].
//! - [`keyfile`], [`service`]: key files and the embedding oracle over HTTP.

pub mod attack;
pub mod chaos;
pub mod image;
pub mod keyfile;
pub mod pgm;
pub mod scheme;
pub mod service;

pub use attack::{
    apply_edit, attack_end_to_end, build_lut, forge, probe_images, AttackError, ForgeryLut,
    LocalOracle, Oracle, Rect, TamperEdit,
};
pub use image::{psnr, GrayImage, TamperMap};
pub use pgm::{decode_pgm, encode_pgm};
pub use scheme::{detect, embed, SchemeKey, WatermarkPattern};
