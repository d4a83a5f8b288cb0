//! Config-driven experiments: one coefficient solve, pricing rule and
//! particle simulation per storage target, all driven by the same Brownian
//! path, rendered to CSV, SVG and a JSON summary.
//!
//! Rendering happens in memory so that determinism can be checked by
//! comparing bytes; [`write_artifacts`] then writes everything at the end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::coefficients::{derive_pricing_rule, solve_coefficients, CoefficientPath, PricingRule};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::exec::Execution;
use crate::io::fmt17;
use crate::plot::{line_chart, Series, PALETTE};
use crate::simulate::{
    clearing_residual, martingale_test, pearson, simulate_agents, simulate_supply_price,
    AgentOptions, ClearingResidual, MartingaleStats, NoisePath, PathEnsemble,
};

/// Everything computed for one storage target.
#[derive(Debug, Clone)]
pub struct AlphaRun {
    pub alpha: f64,
    pub coefficients: Arc<CoefficientPath>,
    pub rule: PricingRule,
    pub ensemble: PathEnsemble,
    pub clearing: ClearingResidual,
    /// Pearson correlation of supply and price along the path.
    pub correlation: f64,
    pub martingale: Option<MartingaleStats>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub runs: Vec<AlphaRun>,
}

/// Runs the full pipeline for every storage target in the config.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Experiment> {
    config.validate()?;
    let noise = NoisePath::generate(config.seed, config.model.horizon, config.dt_sde)?;
    let runs = config
        .alphas
        .iter()
        .map(|&alpha| run_alpha(config, alpha, &noise, exec))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        config: config.clone(),
        runs,
    })
}

fn run_alpha(
    config: &ExperimentConfig,
    alpha: f64,
    noise: &NoisePath,
    exec: Execution,
) -> Result<AlphaRun> {
    let spec = config.model_for(alpha);
    let coefficients = Arc::new(solve_coefficients(&spec, config.dt_ode)?);
    let rule = derive_pricing_rule(&spec, coefficients.clone())?;
    let sp = simulate_supply_price(&spec, &rule, noise)?;
    let options = AgentOptions {
        centered: config.centered,
        exec,
        ..AgentOptions::new(config.particles)
    };
    let ensemble = simulate_agents(&spec, &rule, sp, noise, options)?;
    let clearing = clearing_residual(&spec, &ensemble);
    let correlation = pearson(&ensemble.supply, &ensemble.price);
    let martingale = if config.martingale_paths > 0 {
        Some(martingale_test(
            &spec,
            &rule,
            config.martingale_paths,
            config.dt_sde,
            config.seed,
            exec,
        )?)
    } else {
        None
    };
    Ok(AlphaRun {
        alpha,
        coefficients,
        rule,
        ensemble,
        clearing,
        correlation,
        martingale,
    })
}

impl Experiment {
    /// Largest departure of `ϖ_t(alpha) - ϖ_t(alpha_0)` from
    /// `w̄(alpha) - w̄(alpha_0)`. The difference is constant in time only when
    /// the supply coefficients do not depend on the price, so `None`
    /// otherwise.
    pub fn offset_deviation(&self) -> Option<f64> {
        let m = &self.config.model;
        if !(m.supply_drift.k2.is_zero() && m.supply_vol.k2.is_zero()) {
            return None;
        }
        let base = self.runs.first()?;
        let mut worst = 0.0f64;
        for run in &self.runs[1..] {
            let offset = run.rule.w_bar - base.rule.w_bar;
            for (w, w0) in run.ensemble.price.iter().zip(&base.ensemble.price) {
                worst = worst.max((w - w0 - offset).abs());
            }
        }
        Some(worst)
    }

    /// True when `w̄` strictly increases with the storage target.
    pub fn price_increases_with_alpha(&self) -> bool {
        let mut pairs: Vec<(f64, f64)> =
            self.runs.iter().map(|r| (r.alpha, r.rule.w_bar)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.windows(2).all(|p| p[1].1 > p[0].1)
    }

    pub fn summary(&self) -> Summary {
        let c = &self.config;
        Summary {
            seed: c.seed,
            dt_ode: c.dt_ode,
            dt_sde: c.dt_sde,
            particles: c.particles,
            martingale_paths: c.martingale_paths,
            alphas: self
                .runs
                .iter()
                .map(|r| AlphaSummary {
                    alpha: r.alpha,
                    w_bar: r.rule.w_bar,
                    correlation: r.correlation,
                    sup_clearing_residual: r.clearing.sup,
                    initial_clearing_residual: r.clearing.per_time[0],
                    terminal_price: *r.ensemble.price.last().unwrap_or(&f64::NAN),
                    martingale: r.martingale.as_ref().map(|m| MartingaleSummary {
                        paths: m.paths,
                        mean_change: m.mean,
                        std_err: m.std_err,
                        t_stat: m.t_stat,
                        min_r2: m.min_r2,
                        max_slope_error: m.max_slope_error,
                    }),
                    coefficients_file: coefficients_file(r.alpha),
                    path_file: path_file(r.alpha, c.seed),
                })
                .collect(),
            offset_deviation: self.offset_deviation(),
            price_increases_with_alpha: self.price_increases_with_alpha(),
            correlations_negative: self.runs.iter().all(|r| r.correlation < 0.0),
        }
    }

    /// All output files, in the order they are written.
    pub fn artifacts(&self) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        for run in &self.runs {
            let mut buf = Vec::new();
            run.coefficients.write_csv(&mut buf)?;
            out.push(Artifact::new(coefficients_file(run.alpha), buf));
            out.push(Artifact::new(
                path_file(run.alpha, self.config.seed),
                path_csv(run),
            ));
        }
        out.push(Artifact::new(
            "paths_combined.csv".into(),
            self.combined_csv(),
        ));
        out.push(Artifact::new("fig1.svg".into(), self.overlay_svg()));
        for (i, run) in self.runs.iter().enumerate() {
            out.push(Artifact::new(
                format!("panel_alpha_{}.svg", run.alpha),
                panel_svg(run, PALETTE[i % PALETTE.len()]),
            ));
        }
        let mut summary =
            serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        summary.push('\n');
        out.push(Artifact::new("summary.json".into(), summary.into_bytes()));
        Ok(out)
    }

    /// Shared time column, supply, then one price column per storage target.
    fn combined_csv(&self) -> Vec<u8> {
        let mut s = String::from("t,Q");
        for run in &self.runs {
            let _ = write!(s, ",price_alpha_{}", run.alpha);
        }
        s.push('\n');
        if let Some(first) = self.runs.first() {
            for (n, t) in first.ensemble.times.iter().enumerate() {
                let _ = write!(s, "{},{}", fmt17(*t), fmt17(first.ensemble.supply[n]));
                for run in &self.runs {
                    let _ = write!(s, ",{}", fmt17(run.ensemble.price[n]));
                }
                s.push('\n');
            }
        }
        s.into_bytes()
    }

    fn overlay_svg(&self) -> Vec<u8> {
        let Some(first) = self.runs.first() else {
            return Vec::new();
        };
        let mut series = vec![Series {
            label: "supply Q".into(),
            xs: &first.ensemble.times,
            ys: &first.ensemble.supply,
            color: "black",
            dashed: true,
        }];
        for (i, run) in self.runs.iter().enumerate() {
            series.push(Series {
                label: format!("price, α = {}", run.alpha),
                xs: &run.ensemble.times,
                ys: &run.ensemble.price,
                color: PALETTE[i % PALETTE.len()],
                dashed: false,
            });
        }
        let title = format!("Supply and price, seed {}", self.config.seed);
        line_chart(&title, "t", &series).into_bytes()
    }
}

fn panel_svg(run: &AlphaRun, color: &str) -> Vec<u8> {
    let e = &run.ensemble;
    let series = [
        Series {
            label: "supply Q".into(),
            xs: &e.times,
            ys: &e.supply,
            color: "black",
            dashed: true,
        },
        Series {
            label: "price".into(),
            xs: &e.times,
            ys: &e.price,
            color,
            dashed: false,
        },
    ];
    line_chart(
        &format!("Supply and price, α = {}", run.alpha),
        "t",
        &series,
    )
    .into_bytes()
}

fn path_csv(run: &AlphaRun) -> Vec<u8> {
    let e = &run.ensemble;
    let mut s = String::from("t,Q,price,Pi,mean_holdings,clearing_residual\n");
    for n in 0..e.times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt17(e.times[n]),
            fmt17(e.supply[n]),
            fmt17(e.price[n]),
            fmt17(e.pi[n]),
            fmt17(e.mean_holdings[n]),
            fmt17(run.clearing.per_time[n]),
        );
    }
    s.into_bytes()
}

pub fn coefficients_file(alpha: f64) -> String {
    format!("coefficients_alpha_{alpha}.csv")
}

pub fn path_file(alpha: f64, seed: u64) -> String {
    format!("path_alpha_{alpha}_seed_{seed}.csv")
}

/// One output file held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: String, bytes: Vec<u8>) -> Self {
        Artifact { name, bytes }
    }
}

/// Writes the artifacts into `dir`, creating it if needed, and returns the
/// written paths.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes)?;
            Ok(path)
        })
        .collect()
}

/// Runs the storage-target preset with the given seed and writes its
/// artifacts to `output_dir`.
pub fn run_preset_fig1(seed: u64, output_dir: &Path, exec: Execution) -> Result<Experiment> {
    let mut config = ExperimentConfig::fig1().with_seed(seed);
    config.output_dir = output_dir.to_path_buf();
    run_and_write(&config, exec)
}

/// Loads a TOML config, runs it and writes its artifacts to the configured
/// output directory.
pub fn run_config(path: &Path, exec: Execution) -> Result<Experiment> {
    let config = ExperimentConfig::load(path)?;
    run_and_write(&config, exec)
}

pub fn run_and_write(config: &ExperimentConfig, exec: Execution) -> Result<Experiment> {
    let experiment = run_experiment(config, exec)?;
    write_artifacts(&config.output_dir, &experiment.artifacts()?)?;
    Ok(experiment)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub dt_ode: f64,
    pub dt_sde: f64,
    pub particles: usize,
    pub martingale_paths: usize,
    pub alphas: Vec<AlphaSummary>,
    /// `None` when the supply depends on the price.
    pub offset_deviation: Option<f64>,
    pub price_increases_with_alpha: bool,
    pub correlations_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub w_bar: f64,
    pub correlation: f64,
    pub sup_clearing_residual: f64,
    pub initial_clearing_residual: f64,
    pub terminal_price: f64,
    pub martingale: Option<MartingaleSummary>,
    pub coefficients_file: String,
    pub path_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleSummary {
    pub paths: usize,
    pub mean_change: f64,
    pub std_err: f64,
    pub t_stat: Option<f64>,
    pub min_r2: Option<f64>,
    pub max_slope_error: Option<f64>,
}
