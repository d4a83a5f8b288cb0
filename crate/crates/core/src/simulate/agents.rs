use super::{NoisePath, SdeTable, SupplyPrice};
use crate::ansatz::{A1_1, A2_1, A2_2, A2_3};
use crate::coefficients::PricingRule;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParticleHistory {
    /// Keep every particle at every step (needed by the transport check).
    Full,
    #[default]
    Endpoints,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentOptions {
    pub particles: usize,
    /// Shift the initial sample so its mean equals the distribution mean.
    pub centered: bool,
    pub history: ParticleHistory,
    pub exec: Execution,
}

impl AgentOptions {
    pub fn new(particles: usize) -> Self {
        AgentOptions {
            particles,
            centered: true,
            history: ParticleHistory::Endpoints,
            exec: Execution::default(),
        }
    }

    pub fn with_history(self, history: ParticleHistory) -> Self {
        AgentOptions { history, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Particles {
    /// `rows[n][i]` is agent `i` at step `n`.
    Full(Vec<Vec<f64>>),
    Endpoints {
        initial: Vec<f64>,
        terminal: Vec<f64>,
    },
}

impl Particles {
    pub fn initial(&self) -> &[f64] {
        match self {
            Particles::Full(rows) => &rows[0],
            Particles::Endpoints { initial, .. } => initial,
        }
    }

    pub fn terminal(&self) -> &[f64] {
        match self {
            Particles::Full(rows) => rows.last().expect("non-empty history"),
            Particles::Endpoints { terminal, .. } => terminal,
        }
    }

    pub fn history(&self) -> Option<&[Vec<f64>]> {
        match self {
            Particles::Full(rows) => Some(rows),
            Particles::Endpoints { .. } => None,
        }
    }
}

/// One common-noise realization of supply, price and the agent cloud.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub supply: Vec<f64>,
    pub price: Vec<f64>,
    /// `Π_t = a1_1 + 2 a2_1 X̄_t + a2_2 Q_t + a2_3 ϖ_t`.
    pub pi: Vec<f64>,
    pub mean_holdings: Vec<f64>,
    pub particles: Particles,
    pub noise: NoisePath,
}

impl PathEnsemble {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Moves `options.particles` agents along the supply/price realization `sp`
/// with the optimal feedback `v* = -(ϖ + u_x) / c`.
pub fn simulate_agents(
    spec: &ModelSpec,
    rule: &PricingRule,
    sp: SupplyPrice,
    noise: &NoisePath,
    options: AgentOptions,
) -> Result<PathEnsemble> {
    let table = SdeTable::for_noise(spec, rule, noise)?;
    simulate_agents_on(spec, &table, sp, noise, options)
}

pub fn simulate_agents_on(
    spec: &ModelSpec,
    table: &SdeTable,
    sp: SupplyPrice,
    noise: &NoisePath,
    options: AgentOptions,
) -> Result<PathEnsemble> {
    if options.particles < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two particles are required, got {}",
            options.particles
        )));
    }
    let steps = table.steps();
    if sp.supply.len() != steps + 1 || noise.steps() != steps {
        return Err(Error::InvalidArgument(
            "paths and noise do not share the grid".into(),
        ));
    }
    let dt = table.dt;
    let c = spec.c;
    let mut x = spec.agents.draw(options.particles, options.centered);
    let initial = x.clone();
    let mut rows = match options.history {
        ParticleHistory::Full => {
            let mut v = Vec::with_capacity(steps + 1);
            v.push(x.clone());
            Some(v)
        }
        ParticleHistory::Endpoints => None,
    };
    let mut mean_holdings = Vec::with_capacity(steps + 1);
    let mut pi = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let a = &table.rows[n].a;
        let (q, w) = (sp.supply[n], sp.price[n]);
        let xbar = mean(&x);
        mean_holdings.push(xbar);
        pi.push(a[A1_1] + 2.0 * a[A2_1] * xbar + a[A2_2] * q + a[A2_3] * w);
        if n == steps {
            break;
        }
        // v* is affine in x: v = intercept + slope * x
        let intercept = -(w + a[A1_1] + a[A2_2] * q + a[A2_3] * w) / c;
        let slope = -2.0 * a[A2_1] / c;
        options
            .exec
            .for_each_mut(&mut x, |xi| *xi += dt * (intercept + slope * *xi));
        if let Some(rows) = rows.as_mut() {
            rows.push(x.clone());
        }
    }
    let particles = match rows {
        Some(rows) => Particles::Full(rows),
        None => Particles::Endpoints {
            initial,
            terminal: x,
        },
    };
    Ok(PathEnsemble {
        times: sp.times,
        supply: sp.supply,
        price: sp.price,
        pi,
        mean_holdings,
        particles,
        noise: noise.clone(),
    })
}
