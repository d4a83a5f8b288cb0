//! Path-wise error of the Euler–Maruyama supply/price paths against a fine
//! reference on the same Brownian path.

mod common;

use std::sync::Arc;

use mfgprice::simulate::{simulate_supply_price, NoisePath, SupplyPrice};
use mfgprice::verify::fitted_order;
use mfgprice::{derive_pricing_rule, solve_coefficients, AffineCoeff, ModelSpec, PricingRule};

const FINE_DT: f64 = 1e-5;

/// `(t, Q, ϖ)` of the seed-42 reference run at `Δt = 1e-5`.
const REFERENCE: [(f64, f64, f64); 4] = [
    (0.25, 1.2016764068023642, -3.4495797223777602),
    (0.5, 2.5145590370365096, -6.005334094792304),
    (0.75, 1.774197083118908, -5.586209217079295),
    (1.0, 1.8858807301873162, -5.790699832306998),
];

fn rule_for(spec: &ModelSpec) -> PricingRule {
    derive_pricing_rule(spec, Arc::new(solve_coefficients(spec, 1e-3).unwrap())).unwrap()
}

fn run(spec: &ModelSpec, rule: &PricingRule, noise: &NoisePath) -> SupplyPrice {
    simulate_supply_price(spec, rule, noise).unwrap()
}

/// Sup-norm distance between a coarse run and the reference on the coarse nodes.
fn sup_error(coarse: &SupplyPrice, fine: &SupplyPrice, factor: usize) -> f64 {
    let mut worst = 0.0f64;
    for (n, (q, w)) in coarse.supply.iter().zip(&coarse.price).enumerate() {
        worst = worst
            .max((q - fine.supply[n * factor]).abs())
            .max((w - fine.price[n * factor]).abs());
    }
    worst
}

/// Mean sup error over `seeds` Brownian paths at `Δt = FINE_DT · factor`.
fn mean_errors(spec: &ModelSpec, factors: &[usize], seeds: u64) -> Vec<f64> {
    let rule = rule_for(spec);
    let mut sums = vec![0.0; factors.len()];
    for seed in 0..seeds {
        let fine = NoisePath::generate(seed, 1.0, FINE_DT).unwrap();
        let reference = run(spec, &rule, &fine);
        for (sum, &f) in sums.iter_mut().zip(factors) {
            *sum += sup_error(&run(spec, &rule, &fine.coarsen(f).unwrap()), &reference, f);
        }
    }
    sums.iter().map(|s| s / seeds as f64).collect()
}

#[test]
fn reference_run_reproduces_the_frozen_path() {
    let spec = ModelSpec::storage_target(0.0);
    let sp = run(
        &spec,
        &rule_for(&spec),
        &NoisePath::generate(42, 1.0, FINE_DT).unwrap(),
    );
    for (t, q, w) in REFERENCE {
        let n = (t / FINE_DT).round() as usize;
        assert!(
            (sp.supply[n] - q).abs() < 1e-12 && (sp.price[n] - w).abs() < 1e-12,
            "t = {t}"
        );
    }
}

#[test]
#[ignore = "Euler–Maruyama converges at strong order 1/2 under the supply noise Q dW; \
            the measured sup error at dt = 1e-3 is about 0.16"]
fn euler_path_is_within_one_percent_of_the_reference() {
    let spec = ModelSpec::storage_target(0.0);
    let rule = rule_for(&spec);
    let fine = NoisePath::generate(42, 1.0, FINE_DT).unwrap();
    let reference = run(&spec, &rule, &fine);
    let coarse = run(&spec, &rule, &fine.coarsen(100).unwrap());
    let err = sup_error(&coarse, &reference, 100);
    assert!(err < 1e-2, "sup error {err}");
}

#[test]
fn multiplicative_supply_noise_gives_strong_order_one_half() {
    let spec = ModelSpec::storage_target(0.0);
    let factors = [400, 100, 25];
    let errs = mean_errors(&spec, &factors, 16);
    let steps: Vec<f64> = factors.iter().map(|f| *f as f64 * FINE_DT).collect();
    let order = fitted_order(&steps, &errs);
    assert!(
        (0.35..=0.65).contains(&order),
        "order {order}, errors {errs:?}"
    );
}

#[test]
fn additive_supply_noise_gives_strong_order_one() {
    let mut spec = ModelSpec::storage_target(0.0);
    spec.supply_vol = AffineCoeff::constant(1.0, 0.0, 0.0);
    let factors = [400, 100, 25];
    let errs = mean_errors(&spec, &factors, 16);
    let steps: Vec<f64> = factors.iter().map(|f| *f as f64 * FINE_DT).collect();
    let order = fitted_order(&steps, &errs);
    assert!(
        (0.8..=1.2).contains(&order),
        "order {order}, errors {errs:?}"
    );
    assert!(errs[1] < 1e-2, "sup error at dt = 1e-3: {}", errs[1]);
}
