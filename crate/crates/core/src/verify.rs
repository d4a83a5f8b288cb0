//! The acceptance suite run by `verify` and by `--strict`.
//!
//! Each check reports a measured value against a fixed threshold. Checks that
//! need a finer discretization reuse one Brownian path generated at a quarter
//! of the configured step and coarsened, so the step-halving ratios compare
//! approximations of the same realization.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ansatz::{Ansatz, A2_1};
use crate::coefficients::{
    a21_closed_form, derive_pricing_rule, halton_states, hjb_residual, rhs, solve_coefficients,
};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::exec::Execution;
use crate::experiment::{run_experiment, Experiment};
use crate::model::{psi_to_terminal_conditions, ModelSpec};
use crate::simulate::{
    clearing_residual, simulate_agents, simulate_supply_price, transport_weak_residual,
    AgentOptions, NoisePath, ParticleHistory, TestFunction,
};
use crate::value::{value, StateSample};

pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const CLOSED_FORM_RUNTIME: Duration = Duration::from_millis(100);
pub const ORACLE_TOL: f64 = 1e-8;
pub const ORACLE_STEP: f64 = 1e-6;
pub const HJB_TOL: f64 = 1e-6;
pub const HJB_MIN_ORDER: f64 = 3.5;
pub const INITIAL_CLEARING_TOL: f64 = 1e-12;
pub const CLEARING_TOL: f64 = 1e-2;
pub const CLEARING_RUNTIME: Duration = Duration::from_secs(10);
pub const ORDER_BAND: (f64, f64) = (0.8, 1.2);
pub const T_STAT_LIMIT: f64 = 4.0;
pub const MIN_R2: f64 = 0.999;
pub const EXACT_TRANSPORT_TOL: f64 = 1e-10;
pub const OFFSET_TOL: f64 = 1e-12;
pub const PRESET_RUNTIME: Duration = Duration::from_secs(30);

/// Particles kept with full history in the transport check.
pub const TRANSPORT_PARTICLES: usize = 1000;
/// Quasi-random states for the HJB residual and random states for the
/// terminal check.
pub const STATE_SAMPLES: usize = 100;
/// Steps used to fit the HJB residual order: `T/20, T/40, ..., T/320`.
pub const HJB_LADDER: [f64; 5] = [20.0, 40.0, 80.0, 160.0, 320.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    fn new(id: u32, name: &'static str, passed: bool, detail: String) -> Self {
        let outcome = if passed { Outcome::Pass } else { Outcome::Fail };
        Check {
            id,
            name,
            outcome,
            detail,
        }
    }

    fn skip(id: u32, name: &'static str, detail: String) -> Self {
        Check {
            id,
            name,
            outcome: Outcome::Skip,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.outcome != Outcome::Fail)
}

/// The checks as pretty-printed JSON. Details carry timings, so unlike the
/// experiment artifacts this report is not reproducible byte for byte.
pub fn report_json(checks: &[Check]) -> String {
    let mut s = serde_json::to_string_pretty(checks).expect("checks serialize");
    s.push('\n');
    s
}

/// Runs the experiment (timed) and then every check.
pub fn verify_config(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<(Experiment, Vec<Check>)> {
    let start = Instant::now();
    let experiment = run_experiment(config, exec)?;
    let elapsed = start.elapsed();
    let checks = run_checks(config, &experiment, elapsed, exec)?;
    Ok((experiment, checks))
}

/// Every acceptance check for an experiment that took `elapsed` to run.
pub fn run_checks(
    config: &ExperimentConfig,
    experiment: &Experiment,
    elapsed: Duration,
    exec: Execution,
) -> Result<Vec<Check>> {
    let spec = config.model_for(config.alphas[0]);
    Ok(vec![
        check_closed_form(&spec, config.dt_ode)?,
        check_oracle(config)?,
        check_hjb(&spec, config.dt_ode)?,
        check_terminal(config)?,
        check_initial_clearing(config, experiment),
        check_clearing(&spec, config, exec)?,
        check_martingale(experiment),
        check_transport(&spec, config, exec)?,
        check_qualitative(experiment, elapsed),
        check_determinism(config, experiment, exec)?,
    ])
}

fn check_closed_form(spec: &ModelSpec, step: f64) -> Result<Check> {
    let start = Instant::now();
    let path = solve_coefficients(spec, step)?;
    let elapsed = start.elapsed();
    let c21 = spec.terminal.c2[0];
    let mut err = 0.0f64;
    for (t, a) in path.times().iter().zip(path.values()) {
        err = err.max((a[A2_1] - a21_closed_form(spec.c, c21, spec.horizon, *t)?).abs());
    }
    Ok(Check::new(
        1,
        "closed-form a2_1",
        err < CLOSED_FORM_TOL && elapsed < CLOSED_FORM_RUNTIME,
        format!(
            "max error {err:.3e} (< {CLOSED_FORM_TOL:e}), solve time {:.1} ms (< {} ms)",
            ms(elapsed),
            CLOSED_FORM_RUNTIME.as_millis()
        ),
    ))
}

/// Backward explicit Euler from `T` to 0.
pub fn euler_reference(spec: &ModelSpec, step: f64) -> Ansatz {
    let n = (spec.horizon / step).round().max(1.0) as usize;
    let h = spec.horizon / n as f64;
    let mut a = psi_to_terminal_conditions(&spec.terminal);
    for i in (1..=n).rev() {
        let d = rhs(spec, i as f64 * h, &a);
        for k in 0..10 {
            a[k] -= h * d[k];
        }
    }
    a
}

/// First-order reference at `step`, with one Richardson step against
/// `step / 2` to remove its own leading error.
pub fn extrapolated_reference(spec: &ModelSpec, step: f64) -> Ansatz {
    let coarse = euler_reference(spec, step);
    let fine = euler_reference(spec, step / 2.0);
    let mut out = Ansatz::ZERO;
    for k in 0..10 {
        out[k] = 2.0 * fine[k] - coarse[k];
    }
    out
}

fn check_oracle(config: &ExperimentConfig) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut raw = 0.0f64;
    for &alpha in &config.alphas {
        let spec = config.model_for(alpha);
        let rk4 = *solve_coefficients(&spec, config.dt_ode)?.initial();
        let reference = extrapolated_reference(&spec, ORACLE_STEP);
        let plain = euler_reference(&spec, ORACLE_STEP);
        for k in 0..10 {
            worst = worst.max((rk4[k] - reference[k]).abs());
            raw = raw.max((rk4[k] - plain[k]).abs());
        }
    }
    Ok(Check::new(
        2,
        "reference agreement at t = 0",
        worst < ORACLE_TOL,
        format!(
            "max componentwise difference {worst:.3e} (< {ORACLE_TOL:e}) against the \
             extrapolated Euler reference; unextrapolated Euler differs by {raw:.3e}"
        ),
    ))
}

/// Least-squares slope of `log(err)` against `log(step)`.
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Observed orders between consecutive halvings.
pub fn halving_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

pub fn hjb_max_residual(spec: &ModelSpec, step: f64) -> Result<f64> {
    let coeffs = Arc::new(solve_coefficients(spec, step)?);
    let rule = derive_pricing_rule(spec, coeffs.clone())?;
    let states = halton_states(STATE_SAMPLES, 3.0, spec.horizon);
    Ok(hjb_residual(spec, &coeffs, &rule, &states)?.max_abs)
}

fn check_hjb(spec: &ModelSpec, step: f64) -> Result<Check> {
    let at_step = hjb_max_residual(spec, step)?;
    let steps: Vec<f64> = HJB_LADDER.iter().map(|d| spec.horizon / d).collect();
    let errors = steps
        .iter()
        .map(|h| hjb_max_residual(spec, *h))
        .collect::<Result<Vec<_>>>()?;
    let order = fitted_order(&steps, &errors);
    let pairs = halving_orders(&errors);
    Ok(Check::new(
        3,
        "HJB residual",
        at_step < HJB_TOL && order >= HJB_MIN_ORDER,
        format!(
            "max residual {at_step:.3e} (< {HJB_TOL:e}); fitted order {order:.2} (>= {HJB_MIN_ORDER}) \
             over steps T/20..T/320, pairwise {}",
            list(&pairs)
        ),
    ))
}

/// Uniform random states in `[-3, 3]³` at time `t`.
pub fn random_states(n: usize, t: f64, seed: u64) -> Vec<StateSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            StateSample::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                t,
            )
        })
        .collect()
}

fn check_terminal(config: &ExperimentConfig) -> Result<Check> {
    let mut worst = 0.0f64;
    for &alpha in &config.alphas {
        let spec = config.model_for(alpha);
        let path = solve_coefficients(&spec, config.dt_ode)?;
        for s in random_states(STATE_SAMPLES, spec.horizon, 0) {
            let psi = spec.terminal.eval(s.x, s.q, s.w);
            let ulp = f64::EPSILON * psi.abs().max(1.0);
            worst = worst.max((value(&path, &s)? - psi).abs() / ulp);
        }
    }
    Ok(Check::new(
        4,
        "terminal condition",
        worst <= 4.0,
        format!("max |u(T) - Ψ| = {worst:.1} ulp (<= 4) at {STATE_SAMPLES} states per target"),
    ))
}

fn check_initial_clearing(config: &ExperimentConfig, experiment: &Experiment) -> Check {
    let worst = experiment
        .runs
        .iter()
        .map(|r| r.clearing.per_time[0])
        .fold(0.0, f64::max);
    let detail = format!("max |Q_0 + (ϖ_0 + Π_0)/c| = {worst:.3e} (< {INITIAL_CLEARING_TOL:e})");
    if config.centered {
        Check::new(5, "clearing at t = 0", worst < INITIAL_CLEARING_TOL, detail)
    } else {
        Check::skip(
            5,
            "clearing at t = 0",
            format!("{detail}; particles are not centered"),
        )
    }
}

fn check_clearing(spec: &ModelSpec, config: &ExperimentConfig, exec: Execution) -> Result<Check> {
    let start = Instant::now();
    let coeffs = Arc::new(solve_coefficients(spec, config.dt_ode)?);
    let rule = derive_pricing_rule(spec, coeffs)?;
    let fine = NoisePath::generate(config.seed, spec.horizon, config.dt_sde / 4.0)?;
    let options = AgentOptions {
        centered: config.centered,
        exec,
        ..AgentOptions::new(config.particles)
    };
    let mut sups = Vec::new();
    for factor in [4, 2, 1] {
        let noise = fine.coarsen(factor)?;
        let sp = simulate_supply_price(spec, &rule, &noise)?;
        let ens = simulate_agents(spec, &rule, sp, &noise, options)?;
        sups.push(clearing_residual(spec, &ens).sup);
    }
    let elapsed = start.elapsed();
    let orders = halving_orders(&sups);
    let in_band = orders
        .iter()
        .all(|o| (ORDER_BAND.0..=ORDER_BAND.1).contains(o));
    Ok(Check::new(
        6,
        "path-wise clearing",
        sups[0] < CLEARING_TOL && in_band && elapsed < CLEARING_RUNTIME,
        format!(
            "sup residual {:.3e} at dt {} (< {CLEARING_TOL:e}); halving orders {} (in [{}, {}]); \
             {:.2} s (< {} s)",
            sups[0],
            config.dt_sde,
            list(&orders),
            ORDER_BAND.0,
            ORDER_BAND.1,
            elapsed.as_secs_f64(),
            CLEARING_RUNTIME.as_secs()
        ),
    ))
}

fn check_martingale(experiment: &Experiment) -> Check {
    let stats: Vec<_> = experiment
        .runs
        .iter()
        .filter_map(|r| r.martingale.as_ref())
        .collect();
    if stats.is_empty() {
        return Check::skip(7, "martingale property of Π", "martingale_paths = 0".into());
    }
    let t = stats
        .iter()
        .map(|s| s.t_stat.map_or(f64::NAN, f64::abs))
        .fold(0.0, f64::max);
    let r2 = stats
        .iter()
        .map(|s| s.min_r2.unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);
    Check::new(
        7,
        "martingale property of Π",
        t < T_STAT_LIMIT && r2 > MIN_R2,
        format!(
            "max |t| = {t:.3} (< {T_STAT_LIMIT}), min R² = {r2:.6} (> {MIN_R2}) over {} paths",
            stats[0].paths
        ),
    )
}

fn check_transport(spec: &ModelSpec, config: &ExperimentConfig, exec: Execution) -> Result<Check> {
    let coeffs = Arc::new(solve_coefficients(spec, config.dt_ode)?);
    let rule = derive_pricing_rule(spec, coeffs)?;
    let fine = NoisePath::generate(config.seed, spec.horizon, config.dt_sde / 4.0)?;
    let fns = TestFunction::standard_set();
    let options = AgentOptions {
        centered: config.centered,
        exec,
        ..AgentOptions::new(config.particles.min(TRANSPORT_PARTICLES))
    }
    .with_history(ParticleHistory::Full);
    let mut residuals: Vec<Vec<f64>> = Vec::new();
    for factor in [4, 2, 1] {
        let noise = fine.coarsen(factor)?;
        let sp = simulate_supply_price(spec, &rule, &noise)?;
        let ens = simulate_agents(spec, &rule, sp, &noise, options)?;
        residuals.push(transport_weak_residual(spec, &rule, &ens, &fns)?);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, tf) in fns.iter().enumerate() {
        let errs: Vec<f64> = residuals.iter().map(|r| r[i]).collect();
        if ["1", "x", "q", "w"].contains(&tf.name.as_str()) {
            let worst = errs.iter().copied().fold(0.0, f64::max);
            ok &= worst < EXACT_TRANSPORT_TOL;
            parts.push(format!("{}: {worst:.1e}", tf.name));
        } else {
            let orders = halving_orders(&errs);
            ok &= orders
                .iter()
                .all(|o| (ORDER_BAND.0..=ORDER_BAND.1).contains(o));
            parts.push(format!("{}: orders {}", tf.name, list(&orders)));
        }
    }
    Ok(Check::new(
        8,
        "transport weak residual",
        ok,
        format!(
            "{} (exact cases < {EXACT_TRANSPORT_TOL:e}, orders in [{}, {}])",
            parts.join(", "),
            ORDER_BAND.0,
            ORDER_BAND.1
        ),
    ))
}

fn check_qualitative(experiment: &Experiment, elapsed: Duration) -> Check {
    let corrs: Vec<f64> = experiment.runs.iter().map(|r| r.correlation).collect();
    let negative = corrs.iter().all(|c| *c < 0.0);
    let increasing = experiment.price_increases_with_alpha();
    let offset = experiment.offset_deviation();
    let offset_ok = offset.is_none_or(|d| d < OFFSET_TOL);
    let w_bars: Vec<f64> = experiment.runs.iter().map(|r| r.rule.w_bar).collect();
    Check::new(
        9,
        "storage-target study",
        negative && increasing && offset_ok && elapsed < PRESET_RUNTIME,
        format!(
            "corr(Q, ϖ) {}; w̄ {} ({}); offset deviation {} (< {OFFSET_TOL:e}); run {:.2} s (< {} s)",
            list(&corrs),
            list(&w_bars),
            if increasing { "increasing" } else { "not increasing" },
            offset.map_or("n/a".into(), |d| format!("{d:.3e}")),
            elapsed.as_secs_f64(),
            PRESET_RUNTIME.as_secs()
        ),
    )
}

fn check_determinism(
    config: &ExperimentConfig,
    experiment: &Experiment,
    exec: Execution,
) -> Result<Check> {
    let other = match exec {
        Execution::Parallel => Execution::Sequential,
        Execution::Sequential => Execution::Parallel,
    };
    let first = experiment.artifacts()?;
    let second = run_experiment(config, other)?.artifacts()?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.name.as_str())
        .collect();
    let same = differing.is_empty() && first.len() == second.len();
    Ok(Check::new(
        10,
        "determinism",
        same,
        if same {
            format!(
                "{} artifacts byte-identical between sequential and parallel runs",
                first.len()
            )
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    ))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", items.join(", "))
}
