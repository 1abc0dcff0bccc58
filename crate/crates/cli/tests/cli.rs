use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
snr_db = [20.0]
w = [0.0, 1.0]
methods = ["RS-GCP", "NoRS-GCP"]

[scenario]
kind = "geometric"
nt = 4
angles = ["0", "pi/9"]
"#;

fn rsma_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsma-sim")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn tradeoff_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let run = rsma_sim(&["tradeoff", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for name in ["tradeoff.csv", "tradeoff_precoders.csv", "tradeoff_timing.csv", "manifest.toml"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let rows = std::fs::read_to_string(out.join("tradeoff.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 2);
    assert!(String::from_utf8_lossy(&run.stdout).contains("tradeoff.csv"));
}

#[test]
fn overrides_replace_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let run = rsma_sim(&[
        "tradeoff",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "RS-GCP",
        "--seed",
        "11",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("master_seed = 11"));
    let rows = std::fs::read_to_string(out.join("tradeoff.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2);
}

#[test]
fn unwritable_output_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"").unwrap();
    let run = rsma_sim(&["tradeoff", "--config", &config, "--out", blocker.join("out").to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("error:"));
}

#[test]
fn invalid_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, SMALL.replace("w = [0.0, 1.0]", "w = [1.5]")).unwrap();
    let run = rsma_sim(&["sweep", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn unknown_method_is_rejected() {
    let run = rsma_sim(&["sweep", "--methods", "RS-FOO"]);
    assert!(!run.status.success());
}
