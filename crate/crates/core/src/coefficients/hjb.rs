//! Residual of the Hamilton–Jacobi equation for the solved ansatz.
//!
//! ```text
//! -u_t + (w + u_x)² / 2c - b^P u_w - b^S u_q
//!      - ½ (σ^P)² u_ww - ½ (σ^S)² u_qq - σ^P σ^S u_wq
//! ```
//!
//! `u_t` is the time derivative of the coefficient interpolant, whose nodal
//! slopes are the ODE right-hand sides; no finite differences are involved.

use super::{CoefficientPath, PricingRule};
use crate::error::Result;
use crate::model::ModelSpec;
use crate::value::StateSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub count: usize,
}

/// Pointwise residual at one state.
pub fn hjb_residual_at(
    spec: &ModelSpec,
    coeffs: &CoefficientPath,
    rule: &PricingRule,
    s: &StateSample,
) -> Result<f64> {
    let (a, rate) = coeffs.eval_with_rate(s.t)?;
    let u_t = rate.eval(s.x, s.q, s.w);
    let u_x = a.u_x(s.x, s.q, s.w);
    let u_q = a.u_q(s.x, s.q, s.w);
    let u_w = a.u_w(s.x, s.q, s.w);
    let b_s = spec.supply_drift.eval(s.t, s.q, s.w);
    let sig_s = spec.supply_vol.eval(s.t, s.q, s.w);
    let [p0, p1, p2] = rule.price_drift_at(s.t);
    let b_p = p0 + p1 * s.q + p2 * s.w;
    let [v0, v1, v2] = rule.price_vol_at(s.t)?;
    let sig_p = v0 + v1 * s.q + v2 * s.w;
    let h = (s.w + u_x).powi(2) / (2.0 * spec.c);
    Ok(-u_t + h
        - b_p * u_w
        - b_s * u_q
        - 0.5 * sig_p * sig_p * a.u_ww()
        - 0.5 * sig_s * sig_s * a.u_qq()
        - sig_p * sig_s * a.u_qw())
}

pub fn hjb_residual(
    spec: &ModelSpec,
    coeffs: &CoefficientPath,
    rule: &PricingRule,
    samples: &[StateSample],
) -> Result<HjbStats> {
    let mut max_abs = 0.0f64;
    let mut sum = 0.0;
    for s in samples {
        let r = hjb_residual_at(spec, coeffs, rule, s)?.abs();
        max_abs = max_abs.max(r);
        sum += r;
    }
    Ok(HjbStats {
        max_abs,
        mean_abs: if samples.is_empty() {
            0.0
        } else {
            sum / samples.len() as f64
        },
        count: samples.len(),
    })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// `n` Halton points (bases 2, 3, 5, 7) mapped to
/// `[-half_width, half_width]³ × [0, horizon]`.
pub fn halton_states(n: usize, half_width: f64, horizon: f64) -> Vec<StateSample> {
    (1..=n as u64)
        .map(|i| {
            let u = |b| 2.0 * half_width * radical_inverse(i, b) - half_width;
            StateSample {
                x: u(2),
                q: u(3),
                w: u(5),
                t: horizon * radical_inverse(i, 7),
            }
        })
        .collect()
}
