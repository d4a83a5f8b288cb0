//! Reference integration shared by the integration tests.
//!
//! The coefficient derivatives are obtained here by expanding the HJB
//! operator on quadratic polynomials in `(x, q, w)`, not from the library's
//! hand-written ODE right-hand sides, so the two routes check each other.

#![allow(dead_code)]

use mfgprice::ModelSpec;

/// Coefficients of `1, x, q, w, x², xq, xw, q², qw, w²`.
pub type Poly = [f64; 10];

const ONE: usize = 0;
const Q: usize = 2;
const W: usize = 3;

/// Exponents `(x, q, w)` of each monomial.
const POWERS: [[u8; 3]; 10] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [1, 1, 0],
    [1, 0, 1],
    [0, 2, 0],
    [0, 1, 1],
    [0, 0, 2],
];

fn index_of(p: [u8; 3]) -> usize {
    POWERS
        .iter()
        .position(|m| *m == p)
        .expect("product stays within degree two")
}

pub fn add(a: &Poly, b: &Poly) -> Poly {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn scale(a: &Poly, s: f64) -> Poly {
    a.map(|v| v * s)
}

pub fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [0.0; 10];
    for i in 0..10 {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..10 {
            if b[j] == 0.0 {
                continue;
            }
            let p = [
                POWERS[i][0] + POWERS[j][0],
                POWERS[i][1] + POWERS[j][1],
                POWERS[i][2] + POWERS[j][2],
            ];
            out[index_of(p)] += a[i] * b[j];
        }
    }
    out
}

/// Partial derivative along variable `var` (0 = x, 1 = q, 2 = w).
pub fn diff(a: &Poly, var: usize) -> Poly {
    let mut out = [0.0; 10];
    for i in 0..10 {
        let k = POWERS[i][var];
        if k > 0 && a[i] != 0.0 {
            let mut p = POWERS[i];
            p[var] -= 1;
            out[index_of(p)] += k as f64 * a[i];
        }
    }
    out
}

fn affine(k: [f64; 3]) -> Poly {
    let mut p = [0.0; 10];
    p[ONE] = k[0];
    p[Q] = k[1];
    p[W] = k[2];
    p
}

/// `u_t` from `-u_t + (w + u_x)²/(2c) - b^P u_w - b^S u_q
/// - ½(σ^P)² u_ww - ½(σ^S)² u_qq - σ^P σ^S u_wq = 0`.
pub fn time_derivative(spec: &ModelSpec, t: f64, u: &Poly) -> Poly {
    let c = spec.c;
    let bs = affine(spec.supply_drift.components(t));
    let ss = affine(spec.supply_vol.components(t));
    let bp = scale(&bs, -c);
    let (ux, uq, uw) = (diff(u, 0), diff(u, 1), diff(u, 2));
    let gain = (c + ux[Q]) / (1.0 + ux[W]);
    let sp = scale(&ss, -gain);
    let (uqq, uww, uqw) = (diff(&uq, 1)[ONE], diff(&uw, 2)[ONE], diff(&uq, 2)[ONE]);

    let mut w_plus_ux = ux;
    w_plus_ux[W] += 1.0;
    let mut ut = scale(&mul(&w_plus_ux, &w_plus_ux), 1.0 / (2.0 * c));
    ut = add(&ut, &scale(&mul(&bp, &uw), -1.0));
    ut = add(&ut, &scale(&mul(&bs, &uq), -1.0));
    ut = add(&ut, &scale(&mul(&sp, &sp), -0.5 * uww));
    ut = add(&ut, &scale(&mul(&ss, &ss), -0.5 * uqq));
    ut = add(&ut, &scale(&mul(&sp, &ss), -uqw));
    ut
}

pub fn terminal_poly(spec: &ModelSpec) -> Poly {
    let t = &spec.terminal;
    [
        t.c0, t.c1[0], t.c1[1], t.c1[2], t.c2[0], t.c2[1], t.c2[2], t.c2[3], t.c2[4], t.c2[5],
    ]
}

/// Backward explicit Euler from `T` to 0 with `n` steps.
pub fn euler(spec: &ModelSpec, n: usize) -> Poly {
    let h = spec.horizon / n as f64;
    let mut u = terminal_poly(spec);
    for i in (1..=n).rev() {
        let d = time_derivative(spec, i as f64 * h, &u);
        u = add(&u, &scale(&d, -h));
    }
    u
}

/// Euler at `T/n` and `T/(2n)`, combined to cancel the first-order error.
pub fn extrapolated_euler(spec: &ModelSpec, n: usize) -> Poly {
    let coarse = euler(spec, n);
    let fine = euler(spec, 2 * n);
    std::array::from_fn(|i| 2.0 * fine[i] - coarse[i])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Reference vectors at `t = 0` for `Ψ = (x - alpha)²`, produced once by
/// `extrapolated_euler(spec, 1_000_000)`.
pub const FROZEN_ALPHA_0: Poly = [
    -0.07350345559902265,
    0.24525296078086983,
    -0.04997911808794687,
    0.12262648039043596,
    0.33333333333341203,
    -0.24525296078086983,
    -0.6666666666666926,
    -0.26773379392713326,
    -0.12262648039043596,
    -0.16666666666666327,
];
pub const FROZEN_ALPHA_HALF: Poly = [
    -0.11279660265609547,
    -0.08808037255255209,
    0.07264736230249953,
    0.45595981372374705,
    0.33333333333341203,
    -0.24525296078086983,
    -0.6666666666666926,
    -0.26773379392713326,
    -0.12262648039043596,
    -0.16666666666666327,
];
