//! Value function, its gradient and the optimal feedback trading rate,
//! evaluated lazily from a [`CoefficientPath`].

use crate::coefficients::CoefficientPath;
use crate::error::Result;

/// A point `(x, q, w, t)`: holdings, supply, price, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub x: f64,
    pub q: f64,
    pub w: f64,
    pub t: f64,
}

impl StateSample {
    pub fn new(x: f64, q: f64, w: f64, t: f64) -> Self {
        StateSample { x, q, w, t }
    }
}

pub fn value(coeffs: &CoefficientPath, s: &StateSample) -> Result<f64> {
    Ok(coeffs.eval(s.t)?.eval(s.x, s.q, s.w))
}

/// `∂u/∂x = a1_1 + 2 a2_1 x + a2_2 q + a2_3 w`.
pub fn u_x(coeffs: &CoefficientPath, s: &StateSample) -> Result<f64> {
    Ok(coeffs.eval(s.t)?.u_x(s.x, s.q, s.w))
}

/// `∂u/∂t` from the coefficient interpolant.
pub fn u_t(coeffs: &CoefficientPath, s: &StateSample) -> Result<f64> {
    Ok(coeffs.eval_with_rate(s.t)?.1.eval(s.x, s.q, s.w))
}

/// `v* = -(w + u_x) / c`.
pub fn optimal_control(coeffs: &CoefficientPath, c: f64, s: &StateSample) -> Result<f64> {
    Ok(-(s.w + u_x(coeffs, s)?) / c)
}

/// `H(p) = p² / 2c`.
pub fn hamiltonian(p: f64, c: f64) -> f64 {
    p * p / (2.0 * c)
}

/// `L(v) = c v² / 2`.
pub fn trading_cost(v: f64, c: f64) -> f64 {
    0.5 * c * v * v
}
