use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[trajectory]
duration = 6.0

[collect]
flights = 2
flight_duration = 6.0

[train]
epochs = 2

[eval]
trials = 2
controllers = [\"lee\", \"indi\", \"ilndi\"]
trajectories = [\"circle\"]
";

fn rotorlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotorlab"))
        .arg("--config")
        .arg(dir.join("small.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn workdir(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), format!("{SMALL}{extra}")).unwrap();
    dir
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_subcommands() {
    let out = Command::new(env!("CARGO_BIN_EXE_rotorlab")).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["sim", "collect", "label", "train", "eval", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn sim_writes_a_flight_log() {
    let dir = workdir("");
    let out = rotorlab(dir.path(), &["--seed", "4", "sim", "--controller", "indi", "--trajectory", "figure8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("out/sim_free_indi_figure8_4.csv").exists());
}

#[test]
fn crashes_fail_only_with_strict() {
    let dir = workdir("\n[sim]\ncrash_distance = 1e-4\n");
    let lenient = rotorlab(dir.path(), &["sim"]);
    assert!(lenient.status.success(), "{}", stderr(&lenient));
    let strict = rotorlab(dir.path(), &["--strict", "sim"]);
    assert_eq!(strict.status.code(), Some(3));
    assert!(stderr(&strict).contains("crashed"));
}

#[test]
fn learned_controller_without_model_is_an_error() {
    let dir = workdir("");
    let out = rotorlab(dir.path(), &["sim", "--controller", "na_indi"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--model"));
}

#[test]
fn bad_inputs_are_reported() {
    let dir = workdir("");
    assert_eq!(rotorlab(dir.path(), &["sim", "--controller", "pid"]).status.code(), Some(1));
    assert_eq!(rotorlab(dir.path(), &["sim", "--trajectory", "spiral"]).status.code(), Some(1));
    assert_eq!(rotorlab(dir.path(), &["label"]).status.code(), Some(1));
    assert_eq!(rotorlab(dir.path(), &["report"]).status.code(), Some(1));
    assert_eq!(rotorlab(dir.path(), &["eval", "--trials", "0"]).status.code(), Some(1));
    std::fs::write(dir.path().join("small.toml"), "[sim]\nphysics_dt = -1.0\n").unwrap();
    assert_eq!(rotorlab(dir.path(), &["sim"]).status.code(), Some(1));
}

#[test]
fn eval_skips_learned_controllers_without_a_model() {
    let dir = workdir("");
    let out = rotorlab(dir.path(), &["eval"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("skipping learned controllers"));
    let trials = std::fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert!(trials.contains(",lee,") && trials.contains(",indi,"));
    assert!(!trials.contains("ilndi"));

    let report = rotorlab(dir.path(), &["report"]);
    assert!(report.status.success(), "{}", stderr(&report));
    assert!(String::from_utf8_lossy(&report.stdout).contains("| lee"));
}
