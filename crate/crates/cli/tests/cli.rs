use std::path::Path;
use std::process::{Command, Output};

fn decaylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decaylab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const HARMONIC: &str = r#"
name = "oracle"
potential = "inv4"
half_width = 200.0
nodes = 4001
studies = ["harmonic"]
assert = ["harmonic.k_v ~ 3.141592653589793 +- 1e-4"]
"#;

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", HARMONIC);
    let out = decaylab(&["validate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
}

#[test]
fn validate_rejects_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", &HARMONIC.replace("\"inv4\"", "\"zero\""));
    let out = decaylab(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissible class"));
}

#[test]
fn parse_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "potential = \"inv4\"\nnodes = [1\n");
    let out = decaylab(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn run_writes_manifest_and_exit_status_follows_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), "a.toml", HARMONIC);
    let out = decaylab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"k_v\""));
    assert!(out_dir.join("harmonic.csv").exists());

    let failing = write_config(dir.path(), "f.toml", &HARMONIC.replace("3.141592653589793 +- 1e-4", "3.0 +- 1e-4"));
    let out = decaylab(&["run", "--config", &failing, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failing studies: harmonic"));
}

#[test]
fn plotdata_emits_fit_companions() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("plots");
    let cfg = write_config(
        dir.path(),
        "h.toml",
        "potential = \"bump\"\nhalf_width = 80.0\nnodes = 801\nstudies = [\"heat-decay\"]\nbetas = []\n",
    );
    let out = decaylab(&["plotdata", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("l2_decay.dat").exists());
    assert!(out_dir.join("l2_decay.fit.dat").exists());
}

#[test]
fn study_shortcut_prints_values() {
    let out = decaylab(&["study", "beta1", "--potential", "bump", "--half-width", "50", "--nodes", "501"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("beta1.l2.exponent"));
    let bad = decaylab(&["study", "nonsense"]);
    assert_eq!(bad.status.code(), Some(2));
}
