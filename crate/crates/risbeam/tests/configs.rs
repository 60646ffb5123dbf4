use std::path::{Path, PathBuf};

use risbeam::RunConfig;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn benchmark_file_matches_builtin() {
    let cfg = RunConfig::load(&config("benchmark.toml")).unwrap();
    assert_eq!(cfg, RunConfig::benchmark());
    assert_eq!(cfg.hash(), RunConfig::benchmark().hash());
}

#[test]
fn smoke_file_is_valid() {
    let cfg = RunConfig::load(&config("smoke.toml")).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.scenario.cameras.len(), 2);
    assert_eq!(cfg.scenes, 200);
}

#[test]
fn written_config_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let cfg = RunConfig::benchmark().with_seed(Some(123));
    std::fs::write(&path, cfg.to_toml()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
}
