//! Common-noise simulation of supply, price and the agent population, and
//! the path-wise statistics that check market clearing, the martingale
//! property of `Π`, and the weak transport equation.
//!
//! One scalar Brownian motion drives everything. Supply and price follow
//! explicit Euler–Maruyama with coefficients frozen at the left end of each
//! step; agents follow explicit Euler on `dX = v* dt` along the same
//! realization.

mod agents;
mod noise;
mod stats;

use crate::ansatz::Ansatz;
use crate::coefficients::{gain, CoefficientPath, PricingRule};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub use agents::{
    simulate_agents, simulate_agents_on, AgentOptions, ParticleHistory, Particles, PathEnsemble,
};
pub use noise::NoisePath;
pub use stats::{
    clearing_residual, martingale_test, pearson, transport_weak_residual, ClearingReport,
    ClearingResidual, MartingaleStats, RegressionFit, TestFunction,
};

/// Abort a path when `|Q|` or `|ϖ|` exceeds this.
pub const PATH_GUARD: f64 = 1e12;

/// Everything needed to advance one step from time `t`.
#[derive(Debug, Clone, Copy)]
pub struct StepCoefficients {
    pub t: f64,
    pub a: Ansatz,
    pub supply_drift: [f64; 3],
    pub supply_vol: [f64; 3],
    pub price_drift: [f64; 3],
    pub price_vol: [f64; 3],
}

impl StepCoefficients {
    pub fn supply_drift_at(&self, q: f64, w: f64) -> f64 {
        affine(&self.supply_drift, q, w)
    }
    pub fn supply_vol_at(&self, q: f64, w: f64) -> f64 {
        affine(&self.supply_vol, q, w)
    }
    pub fn price_drift_at(&self, q: f64, w: f64) -> f64 {
        affine(&self.price_drift, q, w)
    }
    pub fn price_vol_at(&self, q: f64, w: f64) -> f64 {
        affine(&self.price_vol, q, w)
    }
}

fn affine(k: &[f64; 3], q: f64, w: f64) -> f64 {
    k[0] + k[1] * q + k[2] * w
}

/// Coefficients at every time of a uniform SDE grid, looked up once from the
/// coefficient interpolant and shared by all realizations.
#[derive(Debug, Clone)]
pub struct SdeTable {
    pub dt: f64,
    pub rows: Vec<StepCoefficients>,
}

impl SdeTable {
    pub fn build(spec: &ModelSpec, rule: &PricingRule, dt: f64, steps: usize) -> Result<Self> {
        let coeffs: &CoefficientPath = rule.coefficients();
        let rows = (0..=steps)
            .map(|n| {
                let t = if n == steps {
                    spec.horizon
                } else {
                    n as f64 * dt
                };
                let a = coeffs.eval(t)?;
                let k = gain(spec.c, &a, t)?;
                let supply_vol = spec.supply_vol.components(t);
                Ok(StepCoefficients {
                    t,
                    a,
                    supply_drift: spec.supply_drift.components(t),
                    supply_vol,
                    price_drift: rule.price_drift_at(t),
                    price_vol: supply_vol.map(|s| -s * k),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SdeTable { dt, rows })
    }

    pub fn for_noise(spec: &ModelSpec, rule: &PricingRule, noise: &NoisePath) -> Result<Self> {
        Self::build(spec, rule, noise.dt, noise.steps())
    }

    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}

/// Supply and price along one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyPrice {
    pub times: Vec<f64>,
    pub supply: Vec<f64>,
    pub price: Vec<f64>,
}

/// Euler–Maruyama for `(Q, ϖ)` from `(q̄, w̄)`.
pub fn simulate_supply_price(
    spec: &ModelSpec,
    rule: &PricingRule,
    noise: &NoisePath,
) -> Result<SupplyPrice> {
    let table = SdeTable::for_noise(spec, rule, noise)?;
    simulate_supply_price_on(&table, spec.q_bar, rule.w_bar, &noise.increments)
}

pub fn simulate_supply_price_on(
    table: &SdeTable,
    q_bar: f64,
    w_bar: f64,
    increments: &[f64],
) -> Result<SupplyPrice> {
    if increments.len() != table.steps() {
        return Err(Error::InvalidArgument(format!(
            "{} increments for a {}-step grid",
            increments.len(),
            table.steps()
        )));
    }
    let dt = table.dt;
    let n = table.steps();
    let mut supply = Vec::with_capacity(n + 1);
    let mut price = Vec::with_capacity(n + 1);
    let (mut q, mut w) = (q_bar, w_bar);
    supply.push(q);
    price.push(w);
    for (row, dw) in table.rows.iter().zip(increments) {
        let dq = row.supply_drift_at(q, w) * dt + row.supply_vol_at(q, w) * dw;
        let dp = row.price_drift_at(q, w) * dt + row.price_vol_at(q, w) * dw;
        q += dq;
        w += dp;
        if !(q.abs() <= PATH_GUARD && w.abs() <= PATH_GUARD) {
            return Err(Error::Overflow {
                what: "supply/price path".into(),
                time: row.t + dt,
            });
        }
        supply.push(q);
        price.push(w);
    }
    Ok(SupplyPrice {
        times: table.times(),
        supply,
        price,
    })
}
