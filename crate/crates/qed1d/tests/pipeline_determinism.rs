//! End-to-end output contracts: identical configs give bit-identical CSV
//! files, and a cache-warm run reproduces a cold run exactly.

use std::fs;
use std::path::{Path, PathBuf};

use qed1d::scenarios::{run, RunOptions, ScenarioConfig};

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config() -> ScenarioConfig {
    let mut config = ScenarioConfig::default();
    config.name = "determinism-probe".into();
    config.geometry.padding_lam = 1.0;
    config.refinement.budget = 16;
    config.propagation.t_final = 0.5;
    config.propagation.dt = 1e-3;
    config.outputs.field_times = vec![0.25];
    config.outputs.emit_plots = false;
    config.validate().unwrap();
    config
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(!files.is_empty(), "run produced no CSV files in {dir:?}");
    files
}

#[test]
fn identical_configs_give_bit_identical_csv_outputs() {
    let config = small_config();
    let out_a = tmp("det-a");
    let out_b = tmp("det-b");
    run(
        &config,
        &RunOptions { out_dir: Some(out_a.clone()), cache_dir: None },
    )
    .unwrap();
    run(
        &config,
        &RunOptions { out_dir: Some(out_b.clone()), cache_dir: None },
    )
    .unwrap();
    let a = csv_bytes(&out_a);
    let b = csv_bytes(&out_b);
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between identical runs");
    }
}

#[test]
fn cache_warm_run_equals_cold_run() {
    let config = small_config();
    let cache = tmp("det-cache");
    let out_cold = tmp("det-cold");
    let out_warm = tmp("det-warm");
    let cold = run(
        &config,
        &RunOptions { out_dir: Some(out_cold.clone()), cache_dir: Some(cache.clone()) },
    )
    .unwrap();
    assert!(!cold.record.cache_hit);
    let warm = run(
        &config,
        &RunOptions { out_dir: Some(out_warm.clone()), cache_dir: Some(cache) },
    )
    .unwrap();
    assert!(warm.record.cache_hit, "second run must hit the mode cache");
    assert_eq!(cold.record.cache_key, warm.record.cache_key);
    assert_eq!(cold.record.n_modes, warm.record.n_modes);

    let a = csv_bytes(&out_cold);
    let b = csv_bytes(&out_warm);
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between cold and warm runs");
    }
}

#[test]
fn population_csv_starts_from_the_excited_state() {
    let config = small_config();
    let out = tmp("det-head");
    run(
        &config,
        &RunOptions { out_dir: Some(out.clone()), cache_dir: None },
    )
    .unwrap();
    let text = fs::read_to_string(out.join("populations.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"));
    let first = lines.next().unwrap();
    let cols: Vec<&str> = first.split(',').collect();
    assert_eq!(cols[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(cols[1].parse::<f64>().unwrap(), 1.0);
}
