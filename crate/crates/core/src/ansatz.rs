//! The quadratic value-function ansatz
//!
//! ```text
//! u(x,q,w,t) = a0 + a1_1 x + a1_2 q + a1_3 w
//!            + a2_1 x² + a2_2 xq + a2_3 xw + a2_4 q² + a2_5 qw + a2_6 w²
//! ```
//!
//! Coefficients are stored in that order in a flat `[f64; 10]`.

use std::ops::{Index, IndexMut};

pub const A0: usize = 0;
pub const A1_1: usize = 1;
pub const A1_2: usize = 2;
pub const A1_3: usize = 3;
pub const A2_1: usize = 4;
pub const A2_2: usize = 5;
pub const A2_3: usize = 6;
pub const A2_4: usize = 7;
pub const A2_5: usize = 8;
pub const A2_6: usize = 9;

/// Column names used for CSV export, in storage order.
pub const NAMES: [&str; 10] = [
    "a0", "a1_1", "a1_2", "a1_3", "a2_1", "a2_2", "a2_3", "a2_4", "a2_5", "a2_6",
];

/// Ten ansatz coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ansatz(pub [f64; 10]);

impl Ansatz {
    pub const ZERO: Ansatz = Ansatz([0.0; 10]);

    /// The monomials `(1, x, q, w, x², xq, xw, q², qw, w²)` in storage order.
    pub fn monomials(x: f64, q: f64, w: f64) -> [f64; 10] {
        [1.0, x, q, w, x * x, x * q, x * w, q * q, q * w, w * w]
    }

    pub fn eval(&self, x: f64, q: f64, w: f64) -> f64 {
        let m = Self::monomials(x, q, w);
        self.0.iter().zip(m.iter()).map(|(a, m)| a * m).sum()
    }

    pub fn u_x(&self, x: f64, q: f64, w: f64) -> f64 {
        let a = &self.0;
        a[A1_1] + 2.0 * a[A2_1] * x + a[A2_2] * q + a[A2_3] * w
    }

    pub fn u_q(&self, x: f64, q: f64, w: f64) -> f64 {
        let a = &self.0;
        a[A1_2] + a[A2_2] * x + 2.0 * a[A2_4] * q + a[A2_5] * w
    }

    pub fn u_w(&self, x: f64, q: f64, w: f64) -> f64 {
        let a = &self.0;
        a[A1_3] + a[A2_3] * x + a[A2_5] * q + 2.0 * a[A2_6] * w
    }

    pub fn u_qq(&self) -> f64 {
        2.0 * self.0[A2_4]
    }

    pub fn u_ww(&self) -> f64 {
        2.0 * self.0[A2_6]
    }

    pub fn u_qw(&self) -> f64 {
        self.0[A2_5]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for Ansatz {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Ansatz {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
