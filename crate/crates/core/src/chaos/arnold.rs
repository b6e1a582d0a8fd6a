//! Arnold cat map on the N x N lattice: (x, y) -> ((x + y) mod N, (x + 2y) mod N).

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use super::ChaosError;
use crate::image::GrayImage;

type Mat = [[u64; 2]; 2];

const CAT: Mat = [[1, 1], [1, 2]];

fn mat_mul(a: &Mat, b: &Mat, n: u64) -> Mat {
    let mut out = [[0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (a[i][0] * b[0][j] + a[i][1] * b[1][j]) % n;
        }
    }
    out
}

fn mat_pow(mut base: Mat, mut exp: u64, n: u64) -> Mat {
    let mut acc = [[1 % n, 0], [0, 1 % n]];
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mat_mul(&acc, &base, n);
        }
        base = mat_mul(&base, &base, n);
        exp >>= 1;
    }
    acc
}

/// One application of the cat map to `(x, y)` on a lattice of side `n`.
pub fn arnold_point(x: usize, y: usize, n: usize) -> Result<(usize, usize), ChaosError> {
    if n == 0 {
        return Err(ChaosError::EmptySide);
    }
    if x >= n || y >= n {
        return Err(ChaosError::CoordinateOutOfRange { x, y, side: n });
    }
    Ok(((x + y) % n, (x + 2 * y) % n))
}

fn periods() -> &'static RwLock<HashMap<usize, u64>> {
    static PERIODS: OnceLock<RwLock<HashMap<usize, u64>>> = OnceLock::new();
    PERIODS.get_or_init(Default::default)
}

/// Smallest `T >= 1` such that `T` applications of the map fix every point
/// of the `n x n` lattice. Results are memoized per side.
///
/// The map is linear, so it is the identity on the lattice exactly when its
/// matrix power is the identity mod `n`; the search walks matrix powers
/// instead of whole-lattice permutations. `T <= 3n` for every `n`.
pub fn arnold_period(n: usize) -> u64 {
    assert!(n >= 1, "lattice side must be at least 1");
    if let Some(&t) = periods().read().expect("period cache poisoned").get(&n) {
        return t;
    }
    let modulus = n as u64;
    let identity = [[1 % modulus, 0], [0, 1 % modulus]];
    let step = mat_pow(CAT, 1, modulus);
    let mut power = step;
    let mut t = 1u64;
    while power != identity {
        power = mat_mul(&power, &step, modulus);
        t += 1;
    }
    periods()
        .write()
        .expect("period cache poisoned")
        .insert(n, t);
    t
}

/// The `k`-fold cat map on a fixed lattice, precomputed as a matrix power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArnoldMap {
    side: usize,
    matrix: Mat,
}

impl ArnoldMap {
    pub fn new(side: usize, iterations: u64) -> Self {
        assert!(side >= 1, "lattice side must be at least 1");
        Self {
            side,
            matrix: mat_pow(CAT, iterations, side as u64),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Image of `(x, y)`; coordinates must already be in range.
    pub fn apply(&self, x: usize, y: usize) -> (usize, usize) {
        let n = self.side as u64;
        let (x, y) = (x as u64, y as u64);
        let m = &self.matrix;
        (
            ((m[0][0] * x + m[0][1] * y) % n) as usize,
            ((m[1][0] * x + m[1][1] * y) % n) as usize,
        )
    }
}

/// Moves the sample at `(x, y)` to the `k`-fold image of `(x, y)`.
pub fn scramble_plane<T: Copy>(plane: &[T], side: usize, k: u64) -> Vec<T> {
    assert_eq!(plane.len(), side * side, "plane is not {side}x{side}");
    let map = ArnoldMap::new(side, k);
    let mut out = plane.to_vec();
    for y in 0..side {
        for x in 0..side {
            let (tx, ty) = map.apply(x, y);
            out[ty * side + tx] = plane[y * side + x];
        }
    }
    out
}

pub fn scramble(img: &GrayImage, k: u64) -> GrayImage {
    let side = img.side();
    GrayImage::new(side, scramble_plane(img.pixels(), side, k)).expect("side preserved")
}
