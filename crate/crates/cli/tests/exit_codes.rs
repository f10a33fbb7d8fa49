use std::path::Path;
use std::process::{Command, Output};

fn optomech(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_optomech"))
        .arg("--quiet")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = optomech(dir.path(), "[protocol]\nalpha = [1.0, 0.0]\nbogus = 1\n", &["cat"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn resonance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[physical]\nrabi_pump_hz = 1.0e9\nvacuum_rabi_hz = 1.0e7\ndetuning_hz = 5.0e9\nomega_m_hz = 0.0\n\
               trap_hz = [100.0, 100.0, 100.0]\nmass_kg = 1.443e-25\ndelta_k_per_m = [0.0, 0.0, 0.0]\n";
    let out = optomech(dir.path(), cfg, &["coupling-map"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resonance"));
}

#[test]
fn violated_readout_constraint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[protocol]\nstate = \"cat\"\nalpha = [1.0, 0.0]\nmethod = \"parity\"\nlambda = 0.3\ntau = 1.0\n\
               rho0 = 0.3\nrho1 = 0.7\nbeta = [0.0, 0.0]\n";
    let out = optomech(dir.path(), cfg, &["wigner"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tampered_manifest_fails_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out = optomech(dir.path(), "[protocol]\nalpha = [1.0, 0.0]\nm_revival = 1\n", &["cat"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("out/manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["artifacts"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_optomech"))
        .arg("--out")
        .arg(dir.path().join("again"))
        .arg("rerun")
        .arg(&manifest)
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(3));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[protocol]\nstate = \"cat\"\nalpha = [1.0, 0.0]\nmethod = \"direct\"\nbeta = [0.3, 0.0]\n\
               [sampling]\nshots = 1000\nseed = 1\n";
    let read = |seed: &str| {
        let out = optomech(dir.path(), cfg, &["--seed", seed, "wigner"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join("out/wigner.csv")).unwrap()
    };
    let a = read("5");
    assert_eq!(a, read("5"));
    assert_ne!(a, read("6"));
}
