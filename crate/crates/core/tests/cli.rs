use std::path::{Path, PathBuf};

use noncon::cli::run;

fn config(name: &str) -> String {
    format!("{}/examples/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

fn noncon(args: &[&str]) -> i32 {
    run(std::iter::once("noncon").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn model_check_exit_codes() {
    assert_eq!(noncon(&["model-check", &config("two_state")]), 0);
    assert_eq!(noncon(&["model-check", &config("periodic")]), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model\nkind = 1");
    assert_eq!(noncon(&["model-check", bad.to_str().unwrap()]), 3);
}

#[test]
fn covariance_writes_report_and_respects_max_lag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    assert_eq!(noncon(&["covariance", &config("iid_square_product"), "--out", out.to_str().unwrap()]), 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["config_hash"].is_string());
    let d = &report["d"];
    assert!((d[0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((d[1][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    assert_eq!(noncon(&["covariance", &config("rademacher")]), 0);
    assert_eq!(noncon(&["covariance", &config("slow_chain"), "--max-lag", "2"]), 4);
}

#[test]
fn failing_schedule_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("fast_component")).unwrap().replace("tail = [[0, 0, 1]]", "tail = [[0, 3]]");
    let p = write(dir.path(), "linear_tail.toml", &text);
    assert_eq!(noncon(&["covariance", p.to_str().unwrap()]), 2);
}

#[test]
fn overflowing_schedule_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("fast_component")).unwrap().replace("tail = [[0, 0, 1]]", "tail = [[0, 0, 0, 0, 0, 0, 1]]");
    let p = write(dir.path(), "huge.toml", &text);
    assert_eq!(noncon(&["simulate", p.to_str().unwrap(), "--replicas", "100", "--N", "1024"]), 6);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let code = noncon(&["simulate", &config("three_state_product"), "--seed", "4", "--replicas", "200", "--N", "256", "--out-dir", out.to_str().unwrap()]);
        assert!(code == 0 || code == 5);
    }
    for file in ["ensemble_N256.json", "ensemble_N256.csv", "tests.json", "covariance.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let manifest: noncon::report::RunManifest = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.outputs.len(), 4);
    manifest.verify().unwrap();
}

#[test]
fn zero_observable_passes_or_skips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(noncon(&["simulate", &config("rademacher"), "--out-dir", dir.path().to_str().unwrap()]), 0);
}

#[test]
fn martingale_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(noncon(&["martingale", &config("two_state"), "--N", "128,512", "--t", "1", "--out", out.to_str().unwrap()]), 0);
    assert_eq!(noncon(&["martingale", &config("iid_square_product"), "--N", "64", "--component", "2"]), 0);
    assert_eq!(noncon(&["martingale", &config("periodic")]), 2);
    assert_eq!(noncon(&["martingale", &config("ctmc")]), 2);
}
