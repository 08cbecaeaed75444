use nmqj::acceptance::{ensemble_run, reference_engine};
use nmqj::engine::{EngineConfig, Simulation};
use nmqj::models::{LadderStart, ModelKind, ModelParams, ModelSpec};
use proptest::prelude::*;

#[test]
fn lambda_populations_within_five_sigma_pointwise() {
    let run = ensemble_run(ModelSpec::lambda(), reference_engine(0)).unwrap();
    let n = 1e5;
    for (k, t) in run.series.times.iter().enumerate() {
        for level in 0..3 {
            let exact = run.analytic.population(k, level);
            let mc = run.series.population(k, level);
            let bound = 5.0 * (exact * (1.0 - exact) / n).sqrt();
            // Both are exactly zero/one where the level cannot be reached yet.
            assert!((mc - exact).abs() <= bound.max(1e-12), "level {level} at t={t}: {mc} vs {exact}");
        }
    }
}

#[test]
fn jaynes_cummings_keeps_two_states() {
    let run = ensemble_run(ModelSpec::jaynes_cummings(), reference_engine(3)).unwrap();
    assert!(run.series.counts.iter().skip(1).all(|c| c.iter().filter(|&&n| n > 0).count() == 2));
    assert_eq!(run.diagnostics.max_n_eff, 2);
}

#[test]
fn ladder_mixed_start_reverses_into_two_targets() {
    let run = ensemble_run(ModelSpec::ladder(LadderStart::Mixed), reference_engine(0)).unwrap();
    let mut targets = std::collections::BTreeMap::<u64, std::collections::BTreeSet<u64>>::new();
    for line in run.events_ndjson.lines() {
        let e: serde_json::Value = serde_json::from_str(line).unwrap();
        if e["direction"] == "reverse" {
            targets.entry(e["source"].as_u64().unwrap()).or_default().insert(e["target"].as_u64().unwrap());
        }
    }
    // The doubly-jumped |c⟩ hands members back both to |b⟩ and to the no-jump state.
    assert!(targets.values().any(|t| t.len() == 2), "{targets:?}");
}

fn any_model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        Just(ModelSpec::jaynes_cummings()),
        Just(ModelSpec::lambda()),
        Just(ModelSpec::vee()),
        Just(ModelSpec::ladder(LadderStart::Mixed)),
        Just(ModelSpec::ladder(LadderStart::Excited)),
        (-6.0..6.0f64, -6.0..6.0f64, 0.5..5.0f64).prop_map(|(d1, d2, a)| {
            let p = ModelParams { detunings: Some(vec![d1, d2]), coupling: Some(a), ..Default::default() };
            ModelSpec::build(ModelKind::Vee, &p).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_step_conserves_members_and_trace(model in any_model(), seed in any::<u64>(), n in 1u64..5_000) {
        let cfg = EngineConfig { ensemble_size: n, t_max: 3.0, rng_seed: seed, ..EngineConfig::default() };
        let mut sim = Simulation::new(&model, cfg).unwrap();
        while !sim.done() {
            let out = sim.advance().unwrap();
            prop_assert_eq!(out.counts_after.iter().sum::<u64>(), n);
            let reg = sim.registry();
            let rho = reg.density_matrix();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(rho.matrix().hermiticity_error() < 1e-12);
            for e in reg.entries() {
                prop_assert!((e.state.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn seeded_runs_repeat(model in any_model(), seed in any::<u64>()) {
        let cfg = EngineConfig { ensemble_size: 500, t_max: 2.0, rng_seed: seed, ..EngineConfig::default() };
        let a = ensemble_run(model.clone(), cfg.clone()).unwrap();
        let b = ensemble_run(model, cfg).unwrap();
        prop_assert_eq!(a.csv, b.csv);
        prop_assert_eq!(a.events_ndjson, b.events_ndjson);
    }
}
