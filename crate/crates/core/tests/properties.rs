//! Randomized invariants of the coefficient solve and the common-noise
//! simulation.

use std::sync::Arc;

use mfgprice::config::ExperimentConfig;
use mfgprice::experiment::run_experiment;
use mfgprice::simulate::{
    clearing_residual, pearson, simulate_agents, simulate_supply_price, AgentOptions, NoisePath,
};
use mfgprice::{
    derive_pricing_rule, psi_to_terminal_conditions, solve_coefficients, Execution, ModelSpec,
    PricingRule, TerminalCost,
};
use proptest::prelude::*;

fn rule_for(spec: &ModelSpec, step: f64) -> PricingRule {
    let coeffs = Arc::new(solve_coefficients(spec, step).unwrap());
    derive_pricing_rule(spec, coeffs).unwrap()
}

fn quick(seed: u64, alphas: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        alphas,
        dt_ode: 1e-2,
        dt_sde: 1e-2,
        particles: 64,
        martingale_paths: 0,
        ..ExperimentConfig::fig1().with_seed(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_gives_bitwise_identical_paths(seed in any::<u64>()) {
        let spec = ModelSpec::storage_target(0.25);
        let rule = rule_for(&spec, 1e-2);
        let run = || {
            let noise = NoisePath::generate(seed, 1.0, 1e-2).unwrap();
            let sp = simulate_supply_price(&spec, &rule, &noise).unwrap();
            simulate_agents(&spec, &rule, sp, &noise, AgentOptions::new(50)).unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.supply, b.supply);
        prop_assert_eq!(a.price, b.price);
        prop_assert_eq!(a.pi, b.pi);
        prop_assert_eq!(a.particles, b.particles);
    }

    #[test]
    fn price_offset_across_targets_is_constant(
        seed in any::<u64>(),
        a1 in -1.0f64..1.0,
        a2 in -1.0f64..1.0,
    ) {
        prop_assume!(a1 != a2);
        let exp = run_experiment(&quick(seed, vec![a1, a2]), Execution::Sequential).unwrap();
        prop_assert!(exp.offset_deviation().unwrap() < 1e-12);
    }

    #[test]
    fn initial_price_increases_with_the_target(a1 in -2.0f64..2.0, gap in 1e-3f64..1.0) {
        let w = |alpha: f64| rule_for(&ModelSpec::storage_target(alpha), 1e-2).w_bar;
        prop_assert!(w(a1 + gap) > w(a1));
    }

    #[test]
    fn supply_and_price_move_in_opposite_directions(seed in any::<u64>()) {
        let spec = ModelSpec::storage_target(0.1);
        let rule = rule_for(&spec, 1e-2);
        let noise = NoisePath::generate(seed, 1.0, 1e-3).unwrap();
        let sp = simulate_supply_price(&spec, &rule, &noise).unwrap();
        prop_assert!(pearson(&sp.supply, &sp.price) < 0.0);
    }

    #[test]
    fn clearing_holds_at_start_for_any_centered_sample(
        seed in any::<u64>(),
        n in 2usize..500,
        alpha in -1.0f64..1.0,
    ) {
        let mut spec = ModelSpec::storage_target(alpha);
        spec.agents.seed = seed;
        let rule = rule_for(&spec, 1e-2);
        let noise = NoisePath::generate(seed, 1.0, 1e-2).unwrap();
        let sp = simulate_supply_price(&spec, &rule, &noise).unwrap();
        let ens = simulate_agents(&spec, &rule, sp, &noise, AgentOptions::new(n)).unwrap();
        prop_assert!(clearing_residual(&spec, &ens).per_time[0] < 1e-12);
    }

    #[test]
    fn solved_path_ends_exactly_at_the_terminal_data(
        c0 in -2.0f64..2.0,
        c1 in prop::array::uniform3(-2.0f64..2.0),
        c21 in 0.0f64..2.0,
        rest in prop::array::uniform5(-0.5f64..0.5),
    ) {
        let mut spec = ModelSpec::storage_target(0.0);
        spec.terminal = TerminalCost { c0, c1, c2: [c21, rest[0], rest[1], rest[2], rest[3], rest[4]] };
        if let Ok(path) = solve_coefficients(&spec, 1e-2) {
            prop_assert_eq!(*path.terminal(), psi_to_terminal_conditions(&spec.terminal));
        }
    }
}

#[test]
fn artifacts_do_not_depend_on_the_thread_count() {
    let cfg = ExperimentConfig {
        particles: 20_000,
        martingale_paths: 200,
        ..quick(42, vec![0.0, 0.5])
    };
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            run_experiment(&cfg, Execution::Parallel)
                .unwrap()
                .artifacts()
                .unwrap()
        })
    };
    let one = render(1);
    assert_eq!(one, render(3));
    assert_eq!(
        one,
        run_experiment(&cfg, Execution::Sequential)
            .unwrap()
            .artifacts()
            .unwrap()
    );
}
