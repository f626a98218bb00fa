use hetnet_core::blocking::{
    blocking_2d, erlang_b, erlang_b_direct, kaufman_roberts_with, mc2d_state_probs, LossSystem,
    MultiClassLossSystem,
};
use hetnet_core::coverage::{
    cov_ccu_csa, cov_ccu_ssa, cov_ceu_ssa_integral, cov_ceu_ssa_series, CoverageInputs,
    SeriesOptions,
};
use hetnet_core::geometry::RegionThreshold;
use hetnet_core::interference::PathLossModel;
use hetnet_core::load::{activity_factor, cell_area_pdf};
use hetnet_core::quad::{integrate_to_infinity, QuadOptions};
use hetnet_core::report::quantize;
use hetnet_core::{ScenarioConfig, SpectrumPolicy};
use proptest::prelude::*;

const LAMBDA_B: f64 = 5e-6;

fn inputs(beta: f64, zeta: f64, region: f64, lambda_f_eff: f64) -> CoverageInputs {
    CoverageInputs {
        beta,
        lambda_b: LAMBDA_B,
        lambda_f_eff,
        zeta,
        path_loss: PathLossModel::new(4.0).unwrap(),
        region: RegionThreshold::new(region).unwrap(),
        fap_rel: 0.01,
    }
}

fn activity_by_quadrature(offered: f64) -> f64 {
    integrate_to_infinity(
        |a| (offered * a * LAMBDA_B).min(1.0) * cell_area_pdf(a, LAMBDA_B),
        0.0,
        QuadOptions::with_rel_tol(1e-12),
    )
    .unwrap()
    .value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn activity_is_monotone_and_bounded(x in 0.0f64..20.0, dx in 1e-6f64..5.0) {
        let a = activity_factor(x);
        let b = activity_factor(x + dx);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn state_probabilities_sum_to_one(
        cap in 5.0f64..60.0,
        d0 in 0.1f64..3.0,
        d1 in 0.1f64..3.0,
        l0 in 0.1f64..40.0,
        l1 in 0.1f64..40.0,
    ) {
        let sys = MultiClassLossSystem::new(cap, [d0, d1], [l0, l1]).unwrap();
        let p = mc2d_state_probs(&sys).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-10);
        prop_assert!(p.probs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn larger_demand_is_blocked_more(
        cap in 5.0f64..60.0,
        d in 0.1f64..3.0,
        extra in 0.0f64..3.0,
        l0 in 0.1f64..40.0,
        l1 in 0.1f64..40.0,
    ) {
        let sys = MultiClassLossSystem::new(cap, [d, d + extra], [l0, l1]).unwrap();
        let (bc, be) = blocking_2d(&sys).unwrap();
        prop_assert!(be >= bc - 1e-14);
    }

    #[test]
    fn kaufman_roberts_is_exact_for_integer_demands(
        cap in 6u32..80,
        d0 in 1u32..6,
        d1 in 1u32..6,
        l0 in 0.1f64..30.0,
        l1 in 0.1f64..30.0,
    ) {
        let sys = MultiClassLossSystem::new(cap as f64, [d0 as f64, d1 as f64], [l0, l1]).unwrap();
        let (ec, ee) = blocking_2d(&sys).unwrap();
        let (kc, ke) = kaufman_roberts_with(&sys, 1.0).unwrap();
        prop_assert!((ec - kc).abs() < 1e-11);
        prop_assert!((ee - ke).abs() < 1e-11);
    }

    #[test]
    fn erlang_forms_agree(servers in 1u32..=200, rho in 0.01f64..400.0) {
        let sys = LossSystem::new(servers, rho).unwrap();
        let b = erlang_b(&sys);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((b - erlang_b_direct(&sys)).abs() < 1e-12);
    }

    #[test]
    fn center_coverage_decreases_with_threshold(
        beta in 0.01f64..100.0,
        factor in 1.01f64..10.0,
        zeta in 0.0f64..1.0,
        region in 0.2f64..1.0,
    ) {
        let lo = cov_ccu_ssa(&inputs(beta, zeta, region, 1e-5)).unwrap();
        let hi = cov_ccu_ssa(&inputs(beta * factor, zeta, region, 1e-5)).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi <= lo);
    }

    #[test]
    fn coverage_decreases_with_activity(beta in 0.01f64..100.0, z in 0.0f64..0.9, dz in 0.01f64..0.1) {
        let a = inputs(beta, z, 0.707, 0.0);
        let b = inputs(beta, z + dz, 0.707, 0.0);
        prop_assert!(cov_ccu_csa(&b).unwrap() <= cov_ccu_csa(&a).unwrap());
        let opts = SeriesOptions::default();
        let ea = cov_ceu_ssa_series(&a, &opts).unwrap().value;
        let eb = cov_ceu_ssa_series(&b, &opts).unwrap().value;
        prop_assert!(eb <= ea + 1e-12);
        prop_assert!((0.0..=1.0).contains(&ea));
    }

    #[test]
    fn quantized_numbers_round_trip_through_text(x in prop::num::f64::NORMAL) {
        let q = quantize(x);
        prop_assert_eq!(quantize(q), q);
        let text = format!("{q:e}");
        prop_assert_eq!(text.parse::<f64>().unwrap(), q);
    }

    #[test]
    fn scenario_json_round_trips(
        lm in 1e-5f64..1e-3,
        p_m in 0.05f64..0.95,
        channels in 5u32..200,
        shared in any::<bool>(),
    ) {
        let cfg = ScenarioConfig {
            lambda_m: lm,
            channels,
            policy: if shared { SpectrumPolicy::Csa } else { SpectrumPolicy::Ssa { p_m } },
            ..Default::default()
        };
        let back = ScenarioConfig::from_json_str(&cfg.to_json_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn activity_matches_quadrature() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x = rng.random_range(0.01..10.0);
        let closed = activity_factor(x);
        let numeric = activity_by_quadrature(x);
        assert!(
            (closed - numeric).abs() < 1e-9,
            "x={x}: {closed} vs {numeric}"
        );
    }
}

#[test]
fn edge_series_matches_integral_across_regions() {
    for region in [0.3, 0.5, 0.707, 0.9] {
        for beta in [0.05, 1.0, 20.0] {
            for zeta in [0.0, 0.4, 1.0] {
                let inp = inputs(beta, zeta, region, 2e-6);
                let s = cov_ceu_ssa_series(&inp, &SeriesOptions::default())
                    .unwrap()
                    .value;
                let i = cov_ceu_ssa_integral(&inp).unwrap();
                assert!(
                    (s - i).abs() < 1e-7,
                    "R={region} beta={beta} zeta={zeta}: {s} vs {i}"
                );
            }
        }
    }
}
