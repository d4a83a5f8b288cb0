//! TOML experiment configuration.
//!
//! The schema is documented in `docs/config.md`. Parsing goes through a raw
//! layer that keeps source spans, so every validation message names the line
//! of the offending key.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{
    validate, AffineCoeff, InitialDistribution, ModelSpec, Sampler, TerminalCost, TimeFn,
};

/// Mixed into the experiment seed to obtain the initial-holdings seed, so the
/// agent draw and the Brownian increments come from different streams.
const AGENT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Model at `alpha = 0`; each storage target shifts the terminal cost.
    pub model: ModelSpec,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub dt_ode: f64,
    pub dt_sde: f64,
    pub particles: usize,
    /// Paths for the martingale test; 0 skips it.
    pub martingale_paths: usize,
    pub output_dir: PathBuf,
    pub centered: bool,
    /// Seed of the initial holdings draw; derived from `seed` when unset.
    pub agent_seed: Option<u64>,
}

/// Keys that validation messages can point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Alphas,
    DtOde,
    DtSde,
    Particles,
    MartingalePaths,
    Model,
    C,
    Horizon,
    QBar,
    SupplyDrift,
    SupplyVol,
    Terminal,
    Agents,
}

impl ExperimentConfig {
    /// The storage-target study: `Ψ = (x - alpha)²` for
    /// `alpha ∈ {0, 0.1, 0.25, 0.5}`.
    pub fn fig1() -> Self {
        ExperimentConfig {
            model: ModelSpec::storage_target(0.0),
            alphas: vec![0.0, 0.1, 0.25, 0.5],
            seed: 42,
            dt_ode: 1e-3,
            dt_sde: 1e-3,
            particles: 10_000,
            martingale_paths: 2000,
            output_dir: PathBuf::from("out/fig1"),
            centered: true,
            agent_seed: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&src).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(src: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        let spans = raw.spans();
        let config = raw.build()?;
        let problems = config.problems();
        if problems.is_empty() {
            Ok(config)
        } else {
            let lines: Vec<String> = problems
                .into_iter()
                .map(|(key, msg)| {
                    let offset = spans.iter().find(|(k, _)| *k == key).map_or(0, |(_, s)| *s);
                    format!("line {}: {msg}", line_of(src, offset))
                })
                .collect();
            Err(Error::Config(lines.join("\n")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(
                problems.into_iter().map(|(_, m)| m).collect(),
            ))
        }
    }

    /// Sets the experiment seed; an unset agent seed follows it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn resolved_agent_seed(&self) -> u64 {
        self.agent_seed.unwrap_or(self.seed ^ AGENT_SEED_SALT)
    }

    /// The model for one storage target, with the agent seed resolved.
    pub fn model_for(&self, alpha: f64) -> ModelSpec {
        let mut spec = self.model.with_alpha(alpha);
        spec.agents.seed = self.resolved_agent_seed();
        spec
    }

    fn problems(&self) -> Vec<(Key, String)> {
        let mut out = Vec::new();
        if self.alphas.is_empty() {
            out.push((Key::Alphas, "alphas must not be empty".to_string()));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            out.push((Key::Alphas, "alphas must be finite".to_string()));
        }
        for (i, a) in self.alphas.iter().enumerate() {
            if self.alphas[..i].contains(a) {
                out.push((Key::Alphas, format!("alpha {a} is listed twice")));
            }
        }
        let horizon = self.model.horizon;
        if !(self.dt_ode > 0.0 && self.dt_ode.is_finite()) {
            out.push((Key::DtOde, "dt_ode must be positive".to_string()));
        } else if horizon > 0.0 && self.dt_ode > horizon / 10.0 {
            out.push((
                Key::DtOde,
                "dt_ode must give at least 10 steps over [0, T]".to_string(),
            ));
        }
        if !(self.dt_sde > 0.0 && self.dt_sde.is_finite()) {
            out.push((Key::DtSde, "dt_sde must be positive".to_string()));
        } else if horizon > 0.0 && self.dt_sde > horizon {
            out.push((Key::DtSde, "dt_sde must not exceed T".to_string()));
        }
        if self.particles < 2 {
            out.push((Key::Particles, "particles must be at least 2".to_string()));
        }
        if self.martingale_paths != 0 && self.martingale_paths < 100 {
            out.push((
                Key::MartingalePaths,
                "martingale_paths must be 0 (skip) or at least 100".to_string(),
            ));
        }
        for msg in validate(&self.model).violations {
            out.push((model_key(&msg), msg));
        }
        out
    }
}

fn model_key(msg: &str) -> Key {
    let prefixes = [
        ("c ", Key::C),
        ("T ", Key::Horizon),
        ("q_bar", Key::QBar),
        ("supply_drift", Key::SupplyDrift),
        ("supply_vol", Key::SupplyVol),
        ("terminal", Key::Terminal),
    ];
    prefixes
        .iter()
        .find(|(p, _)| msg.starts_with(p))
        .map_or(Key::Agents, |(_, k)| *k)
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Spanned<RawModel>,
    alphas: Spanned<Vec<f64>>,
    seed: Option<u64>,
    dt_ode: Option<Spanned<f64>>,
    dt_sde: Option<Spanned<f64>>,
    particles: Option<Spanned<usize>>,
    martingale_paths: Option<Spanned<usize>>,
    output_dir: Option<PathBuf>,
    centered: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    c: Spanned<f64>,
    horizon: Spanned<f64>,
    q_bar: Spanned<f64>,
    supply_drift: Option<Spanned<RawAffine>>,
    supply_vol: Option<Spanned<RawAffine>>,
    terminal: Spanned<RawTerminal>,
    agents: Spanned<RawAgents>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawAffine {
    k0: RawTimeFn,
    k1: RawTimeFn,
    k2: RawTimeFn,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTimeFn {
    Constant(f64),
    Tabulated { values: Vec<f64> },
}

impl Default for RawTimeFn {
    fn default() -> Self {
        RawTimeFn::Constant(0.0)
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawTerminal {
    c0: f64,
    c1: [f64; 3],
    c2: [f64; 6],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgents {
    mean: Option<f64>,
    sampler: Sampler,
    seed: Option<u64>,
}

impl RawConfig {
    fn spans(&self) -> Vec<(Key, usize)> {
        let model = &self.model;
        let inner = model.get_ref();
        let model_start = model.span().start;
        let opt = |s: Option<usize>| s.unwrap_or(model_start);
        vec![
            (Key::Alphas, self.alphas.span().start),
            (
                Key::DtOde,
                self.dt_ode.as_ref().map_or(0, |s| s.span().start),
            ),
            (
                Key::DtSde,
                self.dt_sde.as_ref().map_or(0, |s| s.span().start),
            ),
            (
                Key::Particles,
                self.particles.as_ref().map_or(0, |s| s.span().start),
            ),
            (
                Key::MartingalePaths,
                self.martingale_paths.as_ref().map_or(0, |s| s.span().start),
            ),
            (Key::Model, model_start),
            (Key::C, inner.c.span().start),
            (Key::Horizon, inner.horizon.span().start),
            (Key::QBar, inner.q_bar.span().start),
            (
                Key::SupplyDrift,
                opt(inner.supply_drift.as_ref().map(|s| s.span().start)),
            ),
            (
                Key::SupplyVol,
                opt(inner.supply_vol.as_ref().map(|s| s.span().start)),
            ),
            (Key::Terminal, inner.terminal.span().start),
            (Key::Agents, inner.agents.span().start),
        ]
    }

    fn build(self) -> Result<ExperimentConfig> {
        let defaults = ExperimentConfig::fig1();
        let model = self.model.into_inner();
        let horizon = *model.horizon.get_ref();
        let affine = |raw: Option<Spanned<RawAffine>>| {
            let raw = raw.map(Spanned::into_inner).unwrap_or_default();
            let f = |r: RawTimeFn| match r {
                RawTimeFn::Constant(v) => TimeFn::Constant(v),
                RawTimeFn::Tabulated { values } => TimeFn::Tabulated {
                    t_end: horizon,
                    values,
                },
            };
            AffineCoeff {
                k0: f(raw.k0),
                k1: f(raw.k1),
                k2: f(raw.k2),
            }
        };
        let terminal = model.terminal.into_inner();
        let agents = model.agents.into_inner();
        let mean = agents.mean.unwrap_or(match &agents.sampler {
            Sampler::Gaussian { mean, .. } => *mean,
            Sampler::Samples { values } if !values.is_empty() => {
                values.iter().sum::<f64>() / values.len() as f64
            }
            Sampler::Samples { .. } => 0.0,
        });
        Ok(ExperimentConfig {
            model: ModelSpec {
                c: model.c.into_inner(),
                horizon,
                supply_drift: affine(model.supply_drift),
                supply_vol: affine(model.supply_vol),
                terminal: TerminalCost {
                    c0: terminal.c0,
                    c1: terminal.c1,
                    c2: terminal.c2,
                },
                q_bar: model.q_bar.into_inner(),
                agents: InitialDistribution {
                    mean,
                    sampler: agents.sampler,
                    seed: agents.seed.unwrap_or(0),
                },
            },
            alphas: self.alphas.into_inner(),
            seed: self.seed.unwrap_or(defaults.seed),
            dt_ode: self.dt_ode.map_or(defaults.dt_ode, Spanned::into_inner),
            dt_sde: self.dt_sde.map_or(defaults.dt_sde, Spanned::into_inner),
            particles: self
                .particles
                .map_or(defaults.particles, Spanned::into_inner),
            martingale_paths: self
                .martingale_paths
                .map_or(defaults.martingale_paths, Spanned::into_inner),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            centered: self.centered.unwrap_or(true),
            agent_seed: agents.seed,
        })
    }
}
