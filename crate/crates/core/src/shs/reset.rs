use std::fmt;

use serde::{Deserialize, Serialize};

/// A 2x2 linear reset map applied to a row vector: `x' = x * A`.
///
/// Entries are stored as `u8` so that malformed tables can be represented and
/// reported by [`validate_model`](super::validate_model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResetMap(pub [[u8; 2]; 2]);

impl ResetMap {
    pub const IDENTITY: Self = Self([[1, 0], [0, 1]]);
    /// `(x0, x1) -> (0, x1)`: a fresh update arrives at the first stage.
    pub const FRESH: Self = Self([[0, 0], [0, 1]]);
    /// `(x0, x1) -> (x0, x0)`: the first stage's update reaches the second.
    pub const DELIVER: Self = Self([[1, 1], [0, 0]]);

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().flatten().all(|&e| e <= 1)
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        f64::from(self.0[row][col])
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let a = &self.0;
        [
            x[0] * f64::from(a[0][0]) + x[1] * f64::from(a[1][0]),
            x[0] * f64::from(a[0][1]) + x[1] * f64::from(a[1][1]),
        ]
    }

    /// Row-major bits `a00 a01 a10 a11`.
    pub fn bits(&self) -> [u8; 4] {
        let a = &self.0;
        [a[0][0], a[0][1], a[1][0], a[1][1]]
    }
}

impl fmt::Display for ResetMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.bits();
        write!(f, "[{a} {b}; {c} {d}]")
    }
}
