//! Numerical laboratory for linear-quadratic mean-field-game price formation
//! with a common noise in the supply.
//!
//! The pipeline is
//!
//! 1. [`model`]: a validated [`ModelSpec`] (trading-cost weight, horizon,
//!    affine supply dynamics, quadratic terminal cost, initial agents);
//! 2. [`coefficients`]: backward RK4 solution of the ten ODEs for the
//!    quadratic value-function ansatz, the feedback price coefficients and
//!    the initial price;
//! 3. [`value`]: the value function and the optimal trading rate;
//! 4. [`simulate`]: supply, price and agents under one shared Brownian
//!    motion, with market-clearing, martingale and transport diagnostics;
//! 5. [`experiment`]: config-driven runs that write CSV, SVG and a summary.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod model;
pub mod plot;
pub mod simulate;
pub mod value;
pub mod verify;

pub use ansatz::Ansatz;
pub use coefficients::{
    a21_closed_form, derive_pricing_rule, hjb_residual, solve_a22_a23, solve_coefficients,
    CoefficientPath, PricingRule,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    psi_to_terminal_conditions, validate, AffineCoeff, InitialDistribution, ModelSpec, Sampler,
    TerminalCost, TimeFn,
};
pub use value::StateSample;
