use std::fs;

use hyperadiabatic::hamiltonian::ModelSpec;
use hyperadiabatic::sweep::{
    cache_key, cache_path, load_or_run, run_sweep, CacheStatus, SweepConfig,
};

fn small() -> SweepConfig {
    SweepConfig::new(ModelSpec::two_level(1e-2)).with_grid(20.0, 80.0, 4)
}

#[test]
fn store_then_load_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let (first, status) = load_or_run(&cfg, Some(dir.path())).unwrap();
    assert_eq!(status, CacheStatus::Miss);
    let (second, status) = load_or_run(&cfg, Some(dir.path())).unwrap();
    assert_eq!(status, CacheStatus::Hit);
    assert_eq!(first, second);
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.eps_bar_t.map(f64::to_bits), b.eps_bar_t.map(f64::to_bits));
    }
    assert_eq!(first, run_sweep(&cfg).unwrap());
}

#[test]
fn stale_schema_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    load_or_run(&cfg, Some(dir.path())).unwrap();
    let file = cache_path(dir.path(), &cfg);
    let text = fs::read_to_string(&file).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["schema_version"] = serde_json::json!(0);
    v["records"] = serde_json::json!([]);
    fs::write(&file, v.to_string()).unwrap();
    let (records, status) = load_or_run(&cfg, Some(dir.path())).unwrap();
    assert_eq!(status, CacheStatus::Miss);
    assert_eq!(records.len(), small().grid.points().len());

    fs::write(&file, "not json").unwrap();
    let (_, status) = load_or_run(&cfg, Some(dir.path())).unwrap();
    assert_eq!(status, CacheStatus::Miss);
}

#[test]
fn key_tracks_every_numerical_setting() {
    let base = small();
    let mut variants = vec![
        SweepConfig {
            rtol: 1e-11,
            ..base.clone()
        },
        SweepConfig {
            window: Some((0.0, 0.9)),
            ..base.clone()
        },
        base.clone().with_grid(20.0, 80.0, 5),
        SweepConfig::new(ModelSpec::two_level(1e-2).with_order(2)).with_grid(20.0, 80.0, 4),
    ];
    let mut t = base.clone();
    t.typical.samples = 32;
    variants.push(t);
    let mut keys: Vec<String> = variants.iter().map(cache_key).collect();
    keys.push(cache_key(&base));
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
}
