use serde::Serialize;

use super::{simulate_supply_price_on, NoisePath, PathEnsemble, SdeTable};
use crate::ansatz::{Ansatz, A1_1, A2_1, A2_2, A2_3};
use crate::coefficients::PricingRule;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ModelSpec;

/// `r(t) = |Q_t + (ϖ_t + Π_t) / c|` along one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingResidual {
    pub per_time: Vec<f64>,
    pub sup: f64,
}

pub fn clearing_residual(spec: &ModelSpec, ensemble: &PathEnsemble) -> ClearingResidual {
    let per_time: Vec<f64> = ensemble
        .supply
        .iter()
        .zip(&ensemble.price)
        .zip(&ensemble.pi)
        .map(|((q, w), pi)| (q + (w + pi) / spec.c).abs())
        .collect();
    let sup = per_time.iter().copied().fold(0.0, f64::max);
    ClearingResidual { per_time, sup }
}

/// Least-squares fit of `ΔΠ_n ≈ slope · g_n ΔW_n` through the origin, where
/// `g = a2_2 σ^S + a2_3 σ^P` is the predicted diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub r2: f64,
}

fn fit_through_origin(y: &[f64], z: &[f64]) -> Option<RegressionFit> {
    let szz: f64 = z.iter().map(|v| v * v).sum();
    if szz == 0.0 {
        return None;
    }
    let slope = y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / szz;
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(z).map(|(a, b)| (a - slope * b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - ybar).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Some(RegressionFit { slope, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleStats {
    pub paths: usize,
    /// Mean of `Π_T - Π_0` over the realizations.
    pub mean: f64,
    pub std_err: f64,
    /// `mean / std_err`; `None` when every realization gives the same value.
    pub t_stat: Option<f64>,
    pub max_abs_change: f64,
    /// Worst diffusion-regression fit over all realizations, `None` without noise.
    pub min_r2: Option<f64>,
    pub max_slope_error: Option<f64>,
    /// Fits of the first ten realizations.
    pub pinned_fits: Vec<Option<RegressionFit>>,
}

struct PathOutcome {
    change: f64,
    fit: Option<RegressionFit>,
}

fn one_martingale_path(
    spec: &ModelSpec,
    table: &SdeTable,
    w_bar: f64,
    noise: &NoisePath,
) -> Result<PathOutcome> {
    let sp = simulate_supply_price_on(table, spec.q_bar, w_bar, &noise.increments)?;
    let steps = table.steps();
    let c = spec.c;
    let mut xbar = spec.agents.mean;
    let mut pi = Vec::with_capacity(steps + 1);
    let mut predicted = Vec::with_capacity(steps);
    for n in 0..=steps {
        let row = &table.rows[n];
        let a = &row.a;
        let (q, w) = (sp.supply[n], sp.price[n]);
        let p = a[A1_1] + 2.0 * a[A2_1] * xbar + a[A2_2] * q + a[A2_3] * w;
        pi.push(p);
        if n == steps {
            break;
        }
        let g = a[A2_2] * row.supply_vol_at(q, w) + a[A2_3] * row.price_vol_at(q, w);
        predicted.push(g * noise.increments[n]);
        // the population-average control is -(ϖ + Π) / c
        xbar -= table.dt * (w + p) / c;
    }
    let increments: Vec<f64> = pi.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PathOutcome {
        change: pi[steps] - pi[0],
        fit: fit_through_origin(&increments, &predicted),
    })
}

/// Simulates `paths` independent realizations (seeds `seed ^ index`) and
/// tests `Π_T - Π_0` for zero mean, together with a per-path regression of
/// the `Π` increments on the predicted diffusion term.
pub fn martingale_test(
    spec: &ModelSpec,
    rule: &PricingRule,
    paths: usize,
    dt: f64,
    seed: u64,
    exec: Execution,
) -> Result<MartingaleStats> {
    if paths < 100 {
        return Err(Error::InvalidArgument(format!(
            "martingale test needs at least 100 paths, got {paths}"
        )));
    }
    let probe = NoisePath::member(seed, 0, spec.horizon, dt)?;
    let table = SdeTable::for_noise(spec, rule, &probe)?;
    let outcomes = exec
        .map(paths, |m| {
            let noise = NoisePath::member(seed, m as u64, spec.horizon, dt)?;
            one_martingale_path(spec, &table, rule.w_bar, &noise)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let m = paths as f64;
    let mean = outcomes.iter().map(|o| o.change).sum::<f64>() / m;
    let var = outcomes
        .iter()
        .map(|o| (o.change - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    let std_err = (var / m).sqrt();
    let fits: Vec<Option<RegressionFit>> = outcomes.iter().map(|o| o.fit).collect();
    let (min_r2, max_slope_error) = if fits.iter().all(Option::is_some) {
        let f = fits.iter().flatten();
        (
            Some(f.clone().map(|f| f.r2).fold(f64::INFINITY, f64::min)),
            Some(f.map(|f| (f.slope - 1.0).abs()).fold(0.0, f64::max)),
        )
    } else {
        (None, None)
    };
    Ok(MartingaleStats {
        paths,
        mean,
        std_err,
        t_stat: (std_err > 0.0).then(|| mean / std_err),
        max_abs_change: outcomes.iter().map(|o| o.change.abs()).fold(0.0, f64::max),
        min_r2,
        max_slope_error,
        pinned_fits: fits.into_iter().take(10).collect(),
    })
}

/// A quadratic test function of `(x, q, w)`, coefficients in ansatz order.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub poly: Ansatz,
}

impl TestFunction {
    fn monomial(name: &str, index: usize) -> Self {
        let mut poly = Ansatz::ZERO;
        poly[index] = 1.0;
        TestFunction {
            name: name.into(),
            poly,
        }
    }

    /// `1, x, q, w, x², xq, xw`.
    pub fn standard_set() -> Vec<TestFunction> {
        use crate::ansatz::*;
        vec![
            Self::monomial("1", A0),
            Self::monomial("x", A1_1),
            Self::monomial("q", A1_2),
            Self::monomial("w", A1_3),
            Self::monomial("x^2", A2_1),
            Self::monomial("xq", A2_2),
            Self::monomial("xw", A2_3),
        ]
    }

    pub fn by_name(name: &str) -> Option<TestFunction> {
        Self::standard_set().into_iter().find(|f| f.name == name)
    }
}

/// Largest discrepancy over time in the weak form of the transport
/// equation, one entry per test function.
///
/// Both sides are evaluated on the particle cloud with left-point sums in
/// time:
///
/// ```text
/// ∫ψ dμ_t - ∫ψ dμ_0  vs  Σ ∫(Dψ·b + ½ tr(σσᵀ D²ψ)) dμ Δt + Σ ∫Dψ·σ dμ ΔW
/// ```
pub fn transport_weak_residual(
    spec: &ModelSpec,
    rule: &PricingRule,
    ensemble: &PathEnsemble,
    test_functions: &[TestFunction],
) -> Result<Vec<f64>> {
    let history = ensemble.particles.history().ok_or_else(|| {
        Error::InvalidArgument("transport residual needs the full particle history".into())
    })?;
    let table = SdeTable::for_noise(spec, rule, &ensemble.noise)?;
    let dt = table.dt;
    let c = spec.c;
    let n_particles = history[0].len() as f64;
    let avg =
        |f: &dyn Fn(f64) -> f64, xs: &[f64]| xs.iter().map(|x| f(*x)).sum::<f64>() / n_particles;

    Ok(test_functions
        .iter()
        .map(|tf| {
            let psi = &tf.poly;
            let (q0, w0) = (ensemble.supply[0], ensemble.price[0]);
            let start = avg(&|x| psi.eval(x, q0, w0), &history[0]);
            let mut rhs = 0.0;
            let mut worst = 0.0f64;
            for n in 0..table.steps() {
                let row = &table.rows[n];
                let (q, w) = (ensemble.supply[n], ensemble.price[n]);
                let (bs, bp) = (row.supply_drift_at(q, w), row.price_drift_at(q, w));
                let (ss, sp) = (row.supply_vol_at(q, w), row.price_vol_at(q, w));
                let a = &row.a;
                let trace =
                    ss * ss * psi.u_qq() + 2.0 * ss * sp * psi.u_qw() + sp * sp * psi.u_ww();
                let drift = avg(
                    &|x| {
                        let v = -(w + a.u_x(x, q, w)) / c;
                        psi.u_x(x, q, w) * v + psi.u_q(x, q, w) * bs + psi.u_w(x, q, w) * bp
                    },
                    &history[n],
                ) + 0.5 * trace;
                let diffusion = avg(
                    &|x| psi.u_q(x, q, w) * ss + psi.u_w(x, q, w) * sp,
                    &history[n],
                );
                rhs += drift * dt + diffusion * ensemble.noise.increments[n];
                let (q1, w1) = (ensemble.supply[n + 1], ensemble.price[n + 1]);
                let lhs = avg(&|x| psi.eval(x, q1, w1), &history[n + 1]) - start;
                worst = worst.max((lhs - rhs).abs());
            }
            worst
        })
        .collect())
}

/// Pearson correlation of two equally long series; 0 when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Verification statistics for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingReport {
    pub clearing: ClearingResidual,
    pub martingale: Option<MartingaleStats>,
    pub transport: Vec<(String, f64)>,
    pub correlation: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{derive_pricing_rule, solve_coefficients};
    use crate::model::AffineCoeff;
    use crate::simulate::{simulate_agents_on, AgentOptions, ParticleHistory};
    use std::sync::Arc;

    fn rule_for(spec: &ModelSpec) -> PricingRule {
        let path = Arc::new(solve_coefficients(spec, 1e-3).unwrap());
        derive_pricing_rule(spec, path).unwrap()
    }

    fn ensemble(spec: &ModelSpec, rule: &PricingRule, noise: &NoisePath, n: usize) -> PathEnsemble {
        let table = SdeTable::for_noise(spec, rule, noise).unwrap();
        let sp =
            simulate_supply_price_on(&table, spec.q_bar, rule.w_bar, &noise.increments).unwrap();
        let opts = AgentOptions::new(n).with_history(ParticleHistory::Full);
        simulate_agents_on(spec, &table, sp, noise, opts).unwrap()
    }

    #[test]
    fn pearson_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &[8.0, 6.0, 4.0, 2.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[1.0; 4]), 0.0);
    }

    #[test]
    fn regression_recovers_scale() {
        let z = [0.1, -0.3, 0.2, 0.05];
        let y: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let fit = fit_through_origin(&y, &z).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15 && (fit.r2 - 1.0).abs() < 1e-15);
        assert!(fit_through_origin(&y, &[0.0; 4]).is_none());
    }

    #[test]
    fn clearing_holds_at_time_zero() {
        let spec = ModelSpec::storage_target(0.5);
        let rule = rule_for(&spec);
        let noise = NoisePath::generate(42, 1.0, 1e-3).unwrap();
        let ens = ensemble(&spec, &rule, &noise, 1000);
        let r = clearing_residual(&spec, &ens);
        assert!(r.per_time[0] < 1e-12, "{}", r.per_time[0]);
        assert!(r.sup < 1e-2, "{}", r.sup);
    }

    #[test]
    fn deterministic_clearing_is_first_order() {
        let mut spec = ModelSpec::storage_target(0.25);
        spec.supply_vol = AffineCoeff::zero();
        let rule = rule_for(&spec);
        let sup = |spec: &ModelSpec, rule: &PricingRule, dt: f64| {
            let noise = NoisePath::generate(42, 1.0, dt).unwrap();
            clearing_residual(spec, &ensemble(spec, rule, &noise, 100)).sup
        };
        assert!(sup(&spec, &rule, 1e-3) < 1e-4);
        // off the supply fixed point the residual is a genuine O(dt) error
        spec.q_bar = 0.4;
        let rule = rule_for(&spec);
        let ratio = sup(&spec, &rule, 1e-3) / sup(&spec, &rule, 5e-4);
        assert!((1.8..2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn martingale_without_noise_is_constant() {
        let mut spec = ModelSpec::storage_target(0.25);
        spec.supply_vol = AffineCoeff::zero();
        let rule = rule_for(&spec);
        let stats = martingale_test(&spec, &rule, 100, 1e-3, 42, Execution::Parallel).unwrap();
        assert!(stats.max_abs_change < 1e-3, "{stats:?}");
        assert_eq!(stats.min_r2, None);
        assert!(martingale_test(&spec, &rule, 99, 1e-3, 42, Execution::Parallel).is_err());
    }

    #[test]
    fn transport_exact_and_trivial_cases() {
        let spec = ModelSpec::storage_target(0.1);
        let rule = rule_for(&spec);
        let noise = NoisePath::generate(3, 1.0, 1e-3).unwrap();
        let ens = ensemble(&spec, &rule, &noise, 500);
        let fns: Vec<TestFunction> = ["1", "x", "q", "w"]
            .iter()
            .map(|n| TestFunction::by_name(n).unwrap())
            .collect();
        let r = transport_weak_residual(&spec, &rule, &ens, &fns).unwrap();
        assert_eq!(r[0], 0.0);
        for v in &r[1..] {
            assert!(*v < 1e-12, "{r:?}");
        }
        let xx =
            transport_weak_residual(&spec, &rule, &ens, &[TestFunction::by_name("x^2").unwrap()])
                .unwrap();
        assert!(xx[0] > 1e-6 && xx[0] < 1e-1, "{xx:?}");
    }

    #[test]
    fn transport_needs_history() {
        let spec = ModelSpec::storage_target(0.0);
        let rule = rule_for(&spec);
        let noise = NoisePath::generate(3, 1.0, 1e-2).unwrap();
        let table = SdeTable::for_noise(&spec, &rule, &noise).unwrap();
        let sp = simulate_supply_price_on(&table, 1.0, rule.w_bar, &noise.increments).unwrap();
        let ens = simulate_agents_on(&spec, &table, sp, &noise, AgentOptions::new(10)).unwrap();
        assert!(
            transport_weak_residual(&spec, &rule, &ens, &TestFunction::standard_set()).is_err()
        );
    }
}
