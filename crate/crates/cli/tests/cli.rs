use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic-selfsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("KINETIC_SELFSIM_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_kinetic-selfsim")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["coeffs", "qlandau", "bounds", "selfsim-errors", "refute-landau", "refute-boltzmann", "refute-vpl", "evolve", "blowup-fit", "check-theta"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn check_theta_rejects_above_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-theta", "--theta", "0.6", "--mode", "landau-inhom"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let r = report(&o);
    assert_eq!(r["report"]["accepted"], false);
    assert!(r["report"]["violations"][0].as_str().unwrap().contains("1/2"));
    assert!(dir.path().join("check-theta.json").exists());
}

#[test]
fn check_theta_accepts_admissible() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-theta", "--theta", "-0.5", "--gamma", "-3", "--mode", "landau-inhom"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["check-theta", "--theta", "0.6", "--gamma", "-2.2", "--s", "0.4", "--mode", "boltzmann-hom"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn refute_landau_gaussian_is_refuted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["refute-landau", "--theta", "0.2", "--gamma", "-2.5", "--profile", "gaussian"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["verdict"], "refuted");
    assert!((r["measured"].as_f64().unwrap() - 0.4).abs() < 0.02 * 0.4);
}

#[test]
fn refute_landau_zero_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["refute-landau", "--profile", "zero"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["verdict"], "consistent");
}

#[test]
fn invalid_configs_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["refute-landau", "--theta", "0.7"],
        vec!["coeffs", "--n", "3"],
        vec!["check-theta", "--theta", "0.1", "--mode", "nonsense"],
        vec!["no-such-command"],
        vec!["qlandau", "--profile", "nonsense"],
        vec!["bounds", "--p-c", "5"],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(64), "{args:?}");
    }
}

#[test]
fn run_file_sets_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "subcommand = check-theta\n# rejected by the run file alone\ntheta = 0.6\nmode = landau-inhom\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["--config", cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--config", cfg, "check-theta", "--theta", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["theta"], 0.1);
}

#[test]
fn run_file_for_other_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "subcommand = evolve\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "check-theta", "--theta", "0.1", "--mode", "vpl"], dir.path());
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["bounds", "--n", "16", "--fields", "3", "--seed", "7"];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    assert_eq!(run(&args, b.path()).status.code(), Some(0));
    let x = std::fs::read(a.path().join("bounds.csv")).unwrap();
    let y = std::fs::read(b.path().join("bounds.csv")).unwrap();
    assert_eq!(x, y);
    let c = tempfile::tempdir().unwrap();
    run(&["bounds", "--n", "16", "--fields", "3", "--seed", "8"], c.path());
    assert_ne!(x, std::fs::read(c.path().join("bounds.csv")).unwrap());
}

#[test]
fn evolve_then_fit_history() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["evolve", "--n", "16", "--profile", "two-gaussian", "--steps", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let hist = dir.path().join("evolve.csv");
    assert!(hist.exists() && dir.path().join("final.f64").exists());
    let o = run(&["blowup-fit", "--history", hist.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["verdict"], "no blow-up trend");
}

#[test]
fn blowup_fit_recovers_manufactured_theta() {
    let dir = tempfile::tempdir().unwrap();
    for theta in ["-0.3", "0.3"] {
        let o = run(&["blowup-fit", "--manufactured-theta", theta], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let fitted = report(&o)["report"]["theta"].as_f64().unwrap();
        assert!((fitted - theta.parse::<f64>().unwrap()).abs() < 0.02);
    }
}

#[test]
fn coeffs_and_qlandau_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["coeffs", "--n", "16"], dir.path()).status.code(), Some(0));
    let o = run(&["qlandau", "--n", "16", "--profile", "shifted"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(report(&o)["relative_mass"].as_f64().unwrap() <= 1e-12);
    for f in ["coeffs.csv", "qlandau.csv", "coeffs.json", "qlandau.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn selfsim_errors_writes_decay_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["selfsim-errors", "--n", "16"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("selfsim_errors.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}
