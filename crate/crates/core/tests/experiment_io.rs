use decaylab::experiment::{emit_plotdata, run, validate, ExperimentConfig};
use decaylab::Error;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(body).unwrap()
}

const HEAT: &str = r#"
name = "heat-small"
potential = "bump"
half_width = 80.0
nodes = 801
studies = ["heat-decay"]
betas = [0.0]
assert = ["heat-decay.l2.exponent ~ -0.75 +- 0.1"]
"#;

#[test]
fn heat_run_writes_tables_manifest_and_plots() {
    let bundle = run(&config(HEAT)).unwrap();
    assert!(bundle.manifest.passed, "{:?}", bundle.manifest.assertions);
    let dir = tempfile::tempdir().unwrap();
    bundle.write(dir.path()).unwrap();
    let written = emit_plotdata(&bundle, dir.path()).unwrap();
    for f in ["manifest.json", "heat-decay.csv", "l2_decay.dat", "l2_decay.fit.dat"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert!(written.iter().any(|p| p.ends_with("l2_decay.fit.dat")));

    let csv = std::fs::read_to_string(dir.path().join("heat-decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,l2,dirichlet_b0");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    let table = &bundle.tables["heat-decay"];
    assert_eq!(row, table.rows[0], "CSV must round-trip exactly");

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!(json["values"]["heat-decay"]["l2.exponent"].is_f64());
    assert!(json["fits"]["heat-decay.l2"]["half_width"].is_f64());
}

#[test]
fn identical_configs_give_identical_manifests() {
    let a = run(&config(HEAT)).unwrap().manifest;
    let mut b = run(&config(HEAT)).unwrap().manifest;
    b.generated_at = a.generated_at;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn diffusion_emits_three_paired_series() {
    let cfg = config(
        r#"
potential = "inv4"
half_width = 80.0
nodes = 801
velocity = "bump"
studies = ["diffusion"]
betas = [0.0]
"#,
    );
    let bundle = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_plotdata(&bundle, dir.path()).unwrap();
    for s in ["diffusion_difference", "diffusion_profile", "diffusion_energy"] {
        assert!(dir.path().join(format!("{s}.dat")).exists(), "{s}");
        assert!(dir.path().join(format!("{s}.fit.dat")).exists(), "{s} fit");
    }
    let text = std::fs::read_to_string(dir.path().join("diffusion_profile.dat")).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(first.split_whitespace().count(), 2);
}

#[test]
fn failing_assertion_marks_manifest() {
    let mut cfg = config(HEAT);
    cfg.assertions = vec!["heat-decay.l2.exponent ~ -0.25 +- 0.05".into(), "heat-decay.nothing <= 1".into()];
    let m = run(&cfg).unwrap().manifest;
    assert!(!m.passed);
    assert_eq!(m.failing().len(), 2);
    assert!(m.assertions[1].value.is_none());
}

#[test]
fn guard_refusal_without_auto_enlarge() {
    let mut cfg = config(HEAT);
    cfg.t_max = Some(400.0);
    cfg.auto_enlarge = false;
    assert!(matches!(validate(&cfg), Err(Error::DomainTooSmall { .. })));
    cfg.auto_enlarge = true;
    let m = run(&cfg).unwrap().manifest;
    assert!(m.grid.half_width() >= 160.0);
    assert!(!m.guards.is_empty());
}

#[test]
fn sampled_potential_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let mut text = String::from("x,v\n");
    for i in -400..=400 {
        let x = i as f64 * 0.05;
        text.push_str(&format!("{x},{}\n", 1.0 / (1.0 + x * x).powi(2)));
    }
    std::fs::write(&path, text).unwrap();
    let cfg = config(&format!(
        "potential = \"file:{}\"\nhalf_width = 60.0\nnodes = 1201\nstudies = [\"harmonic\"]\n",
        path.display()
    ));
    let m = run(&cfg).unwrap().manifest;
    let k = m.value("harmonic", "k_v").unwrap();
    assert!((k - std::f64::consts::PI).abs() < 0.05, "{k}");

    std::fs::write(&path, "x,v\n0,abc\n").unwrap();
    assert!(matches!(validate(&cfg), Err(Error::Config(_))));
}

#[test]
fn partial_spectrum_rejected_for_integrals_from_zero() {
    let mut cfg = config(HEAT);
    cfg.studies = vec!["lower-bound".parse().unwrap()];
    cfg.partial_spectrum = true;
    assert!(matches!(validate(&cfg), Err(Error::Config(_))));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = config(HEAT);
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, back);
}
