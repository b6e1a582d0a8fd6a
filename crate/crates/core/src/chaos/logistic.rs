//! Logistic-map bit planes.
//!
//! The state update is `r * x * (1 - x)` in IEEE-754 doubles, evaluated
//! left to right without fused multiply-add, so embedder and detector
//! reproduce the same plane bit for bit on any platform.

use super::ChaosError;

pub const DEFAULT_BURN_IN: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    x0: f64,
    r: f64,
    burn_in: u64,
}

impl LogisticParams {
    pub fn new(x0: f64, r: f64, burn_in: u64) -> Result<Self, ChaosError> {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(ChaosError::InitialStateOutOfRange(x0));
        }
        if !(3.57..=4.0).contains(&r) {
            return Err(ChaosError::RateOutOfRange(r));
        }
        if x0 == 1.0 - 1.0 / r {
            return Err(ChaosError::FixedPoint { x0, r });
        }
        Ok(Self { x0, r, burn_in })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }
}

#[inline]
fn step(r: f64, x: f64) -> f64 {
    let rx = r * x;
    rx * (1.0 - x)
}

#[inline]
fn state_bit(x: f64) -> bool {
    x >= 0.5
}

/// `count` bits after the burn-in; bit is 1 iff the state is `>= 0.5`.
pub fn logistic_sequence(params: &LogisticParams, count: usize) -> Vec<bool> {
    let mut x = params.x0;
    for _ in 0..params.burn_in {
        x = step(params.r, x);
    }
    (0..count)
        .map(|_| {
            x = step(params.r, x);
            state_bit(x)
        })
        .collect()
}

/// The binary chaotic plane C, row-major, same side as the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaoticBits {
    side: usize,
    bits: Vec<bool>,
}

impl ChaoticBits {
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

pub fn logistic_bits(params: &LogisticParams, side: usize) -> ChaoticBits {
    ChaoticBits {
        side,
        bits: logistic_sequence(params, side * side),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact rational iteration as an independent evaluator: with x0 = 1/5
    /// and r = 4 the states are n/5^(2^i).
    fn exact_states(steps: usize) -> Vec<(u128, u128)> {
        let (mut num, mut den) = (1u128, 5u128);
        let mut out = Vec::new();
        for _ in 0..steps {
            // 4 * (n/d) * ((d - n)/d)
            num = 4 * num * (den - num);
            den *= den;
            out.push((num, den));
        }
        out
    }

    #[test]
    fn first_states_match_exact_iteration() {
        let exact = exact_states(3);
        let as_f64: Vec<f64> = exact.iter().map(|&(n, d)| n as f64 / d as f64).collect();
        assert_eq!(exact[0], (16, 25));
        assert!((as_f64[0] - 0.64).abs() < 1e-15);
        assert!((as_f64[1] - 0.9216).abs() < 1e-15);
        assert!((as_f64[2] - 0.289_013_76).abs() < 1e-15);

        let params = LogisticParams::new(0.2, 4.0, 0).unwrap();
        let bits = logistic_sequence(&params, 3);
        let expected: Vec<bool> = exact.iter().map(|&(n, d)| 2 * n >= d).collect();
        assert_eq!(bits, expected);
        assert_eq!(bits, vec![true, true, false]);
    }

    #[test]
    fn threshold_boundary() {
        assert!(state_bit(0.5));
        assert!(!state_bit(0.5 - f64::EPSILON / 2.0));
        assert!(state_bit(1.0));
        assert!(!state_bit(0.0));
    }

    #[test]
    fn deterministic() {
        let params = LogisticParams::new(0.3141, 3.99, 1000).unwrap();
        assert_eq!(logistic_bits(&params, 32), logistic_bits(&params, 32));
    }

    #[test]
    fn burn_in_shifts_the_sequence() {
        let with = LogisticParams::new(0.2, 3.9, 5).unwrap();
        let without = LogisticParams::new(0.2, 3.9, 0).unwrap();
        let long = logistic_sequence(&without, 20);
        assert_eq!(logistic_sequence(&with, 15), long[5..].to_vec());
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            LogisticParams::new(0.0, 4.0, 0),
            Err(ChaosError::InitialStateOutOfRange(_))
        ));
        assert!(matches!(
            LogisticParams::new(1.0, 4.0, 0),
            Err(ChaosError::InitialStateOutOfRange(_))
        ));
        assert!(matches!(
            LogisticParams::new(f64::NAN, 4.0, 0),
            Err(ChaosError::InitialStateOutOfRange(_))
        ));
        assert!(matches!(
            LogisticParams::new(0.4, 3.5, 0),
            Err(ChaosError::RateOutOfRange(_))
        ));
        assert!(matches!(
            LogisticParams::new(0.4, 4.01, 0),
            Err(ChaosError::RateOutOfRange(_))
        ));
        assert!(matches!(
            LogisticParams::new(0.75, 4.0, 0),
            Err(ChaosError::FixedPoint { .. })
        ));
        assert!(LogisticParams::new(0.4, 3.57, 0).is_ok());
    }

    #[test]
    fn ones_fraction_sanity_band() {
        let params = LogisticParams::new(0.123_456, 4.0, DEFAULT_BURN_IN).unwrap();
        let bits = logistic_bits(&params, 64);
        let ones = bits.bits().iter().filter(|&&b| b).count() as f64 / 4096.0;
        assert!((0.35..=0.65).contains(&ones), "ones fraction {ones}");
    }
}
