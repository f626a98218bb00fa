use hetnet_core::geometry::{cdf_serving_distance_ccu, cdf_serving_distance_ceu, RegionThreshold};
use hetnet_core::load::solve_fixed_point;
use hetnet_core::montecarlo::{
    ks_statistic, sample_serving_distances, simulate_outage, simulate_temporal, OutageSetup,
    TemporalOptions,
};
use hetnet_core::report::{
    read_sweep_csv, run_scenario, run_sweep, save_sweep_csv, sweep_csv_string, Metric, SweepSpec,
    SweepVariable,
};
use hetnet_core::{ScenarioConfig, SpectrumPolicy};

fn lambda_m_spec() -> SweepSpec {
    SweepSpec::new(SweepVariable::LambdaM, vec![0.5e-4, 1e-4, 2e-4, 4e-4])
}

#[test]
fn sweep_csv_round_trips_and_reruns_identically() {
    let cfg = ScenarioConfig::default();
    let table = run_sweep(&cfg, &lambda_m_spec()).unwrap();
    let text = sweep_csv_string(&table).unwrap();
    assert!(text.starts_with("lambda_m_per_min_m2,status,"));
    let back = read_sweep_csv(text.as_bytes()).unwrap();
    assert_eq!(back, table);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    save_sweep_csv(&table, &a).unwrap();
    save_sweep_csv(&run_sweep(&cfg, &lambda_m_spec()).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn failing_sweep_point_keeps_other_rows() {
    let cfg = ScenarioConfig::default();
    let spec = SweepSpec::new(SweepVariable::Pm, vec![0.2, 0.5, 1.5]);
    let table = run_sweep(&cfg, &spec).unwrap();
    assert!(table.rows[0].is_ok() && table.rows[1].is_ok());
    assert!(!table.rows[2].is_ok());
    assert!(table.rows[2].values.iter().all(Option::is_none));
    let text = sweep_csv_string(&table).unwrap();
    assert_eq!(read_sweep_csv(text.as_bytes()).unwrap(), table);
}

#[test]
fn shared_edge_quantities_depend_on_femto_density() {
    let cfg = ScenarioConfig {
        policy: SpectrumPolicy::Csa,
        ..Default::default()
    };
    let spec = SweepSpec::new(SweepVariable::LambdaF, vec![5e-5, 2.5e-4, 5e-4]);
    let table = run_sweep(&cfg, &spec).unwrap();
    let ceu: Vec<f64> = table
        .column(Metric::CovCeu)
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert!(ceu.windows(2).all(|w| w[1] < w[0]), "{ceu:?}");
}

#[test]
fn activity_grows_with_traffic() {
    for policy in [
        SpectrumPolicy::Ssa { p_m: 0.4 },
        SpectrumPolicy::Csa,
        SpectrumPolicy::Osa { p_o: 0.2 },
    ] {
        let cfg = ScenarioConfig {
            policy,
            ..Default::default()
        };
        let table = run_sweep(&cfg, &lambda_m_spec()).unwrap();
        for m in [Metric::ZetaCenter, Metric::ZetaEdge] {
            let col: Vec<f64> = table.column(m).into_iter().map(Option::unwrap).collect();
            assert!(
                col.windows(2).all(|w| w[1] > w[0]),
                "{} {col:?}",
                policy.label()
            );
        }
    }
}

#[test]
fn report_serializes_with_input_echo() {
    let report = run_scenario(&ScenarioConfig::default()).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["config"]["lambda_b_per_m2"].is_number());
    assert!(json["energy"]["eta"].as_f64().unwrap() > 0.0);
    let b = &report.blocking;
    assert!(b.b_network >= b.b_ccu.min(b.b_ceu) && b.b_network <= b.b_ccu.max(b.b_ceu));
}

#[test]
fn serving_distance_laws_match_simulation() {
    let lambda_b = 5e-6;
    let region = RegionThreshold::new(0.707).unwrap();
    let (center, edge) = sample_serving_distances(region, lambda_b, 20_000, 5).unwrap();
    let frac = center.len() as f64 / (center.len() + edge.len()) as f64;
    assert!((frac - 0.5).abs() < 0.015, "{frac}");
    let dc = ks_statistic(&center, |r| cdf_serving_distance_ccu(r, lambda_b, region));
    let de = ks_statistic(&edge, |r| {
        cdf_serving_distance_ceu(r, lambda_b, region).unwrap()
    });
    // 1% critical value 1.63/sqrt(n)
    assert!(dc < 1.63 / (center.len() as f64).sqrt(), "center KS {dc}");
    assert!(de < 1.63 / (edge.len() as f64).sqrt(), "edge KS {de}");
}

#[test]
fn outage_simulation_is_deterministic_per_seed() {
    let cfg = ScenarioConfig::default();
    let setup = OutageSetup::for_scenario(&cfg, 0.3, 0.3).unwrap();
    let a = simulate_outage(&setup, &[0.5, 1.0], 5000, 9).unwrap();
    let b = simulate_outage(&setup, &[0.5, 1.0], 5000, 9).unwrap();
    let c = simulate_outage(&setup, &[0.5, 1.0], 5000, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.ccu[0].mean, c.ccu[0].mean);
}

#[test]
fn temporal_simulation_pairs_with_load_model() {
    let opts = TemporalOptions::default();
    for lm in [0.5e-4, 1e-4, 2e-4] {
        let cfg = ScenarioConfig {
            lambda_m: lm,
            ..Default::default()
        };
        let sol = solve_fixed_point(&cfg).unwrap();
        let rep = hetnet_core::blocking::network_blocking(&cfg, &sol).unwrap();
        let sim = simulate_temporal(&cfg, &sol, &opts, 21).unwrap();
        for (name, est, target) in [
            ("zeta_center", &sim.zeta_center, sol.zeta_center),
            ("zeta_edge", &sim.zeta_edge, sol.zeta_edge),
        ] {
            assert!(
                est.z_score(target) < 3.0,
                "lambda_m={lm} {name}: {} vs {target}",
                est.mean
            );
        }
        for (name, est, target) in [
            ("b_ccu", &sim.b_ccu, rep.b_ccu),
            ("b_ceu", &sim.b_ceu, rep.b_ceu),
        ] {
            assert!(
                est.z_score(target) < 3.0 || (est.mean - target).abs() < 1e-3,
                "lambda_m={lm} {name}: {} vs {target}",
                est.mean
            );
        }
    }
}

#[test]
fn analytic_activity_is_conservative_near_saturation() {
    let cfg = ScenarioConfig {
        lambda_m: 4e-4,
        ..Default::default()
    };
    let sol = solve_fixed_point(&cfg).unwrap();
    let sim = simulate_temporal(&cfg, &sol, &TemporalOptions::default(), 21).unwrap();
    assert!(sol.zeta_edge >= sim.zeta_edge.mean - 3.0 * sim.zeta_edge.stderr);
    assert!(sol.zeta_center >= sim.zeta_center.mean - 3.0 * sim.zeta_center.stderr);
}
