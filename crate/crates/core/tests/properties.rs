use hyperadiabatic::evolution::EvolutionConfig;
use hyperadiabatic::hamiltonian::{build, ModelSpec};
use hyperadiabatic::metrics::{path_typical_error, Averaging, TypicalErrorConfig};

fn typical(spec: ModelSpec, t: f64, cfg: TypicalErrorConfig) -> f64 {
    let path = build(&spec).unwrap();
    let (v, drift) = path_typical_error(&path, &EvolutionConfig::default(), t, &cfg).unwrap();
    assert!(drift < 1e-9);
    v
}

#[test]
fn halving_the_sample_count_changes_little() {
    for t in [100.0, 1000.0] {
        for spec in [ModelSpec::two_level(0.0), ModelSpec::two_level(1e-2)] {
            let full = typical(spec.clone(), t, TypicalErrorConfig::default());
            let half = typical(
                spec.clone(),
                t,
                TypicalErrorConfig {
                    samples: 32,
                    ..Default::default()
                },
            );
            assert!(
                (half / full - 1.0).abs() < 0.01,
                "{spec:?} T = {t}: {half} vs {full}"
            );
        }
    }
}

#[test]
fn window_width_does_not_matter_at_large_t() {
    for averaging in [Averaging::Rms, Averaging::Mean] {
        for t in [1e3, 3e3] {
            let narrow = typical(
                ModelSpec::two_level(0.0),
                t,
                TypicalErrorConfig {
                    tau0: 0.5,
                    averaging,
                    ..Default::default()
                },
            );
            let wide = typical(
                ModelSpec::two_level(0.0),
                t,
                TypicalErrorConfig {
                    tau0: 2.0,
                    averaging,
                    ..Default::default()
                },
            );
            assert!(
                (narrow / wide - 1.0).abs() < 0.02,
                "{averaging} T = {t}: {narrow} vs {wide}"
            );
        }
    }
}

#[test]
fn error_is_invariant_under_energy_shift() {
    let path = build(&ModelSpec::three_level_case1(1e-2)).unwrap();
    let cfg = TypicalErrorConfig::default();
    let evo = EvolutionConfig::default();
    let (a, _) = path_typical_error(&path, &evo, 200.0, &cfg).unwrap();
    let (b, _) = path_typical_error(&path.shifted(7.5), &evo, 200.0, &cfg).unwrap();
    assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
}
