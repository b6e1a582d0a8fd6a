//! Chaotic primitives: Arnold cat map position scrambling and logistic-map
//! bit planes.

mod arnold;
mod logistic;

pub use arnold::{arnold_period, arnold_point, scramble, scramble_plane, ArnoldMap};
pub use logistic::{
    logistic_bits, logistic_sequence, ChaoticBits, LogisticParams, DEFAULT_BURN_IN,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChaosError {
    #[error("coordinate ({x}, {y}) outside a {side}x{side} lattice")]
    CoordinateOutOfRange { x: usize, y: usize, side: usize },
    #[error("lattice side must be at least 1")]
    EmptySide,
    #[error("logistic x0 = {0} must lie strictly between 0 and 1")]
    InitialStateOutOfRange(f64),
    #[error("logistic r = {0} must lie in [3.57, 4.0]")]
    RateOutOfRange(f64),
    #[error("logistic x0 = {x0} is the fixed point of the map for r = {r}")]
    FixedPoint { x0: f64, r: f64 },
}
