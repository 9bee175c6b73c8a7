use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_darepc"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Runs a subcommand and returns its exit code.
fn run(args: &[&str], config: &Path, out: &Path) -> i32 {
    let o = bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap();
    o.status.code().unwrap()
}

const QUICK: &str = r#"
plant = "autoland"
seed = 3
initial_set = "x01"

[env]
resolution = 4

[contract]
pr = 0.8
epsilon = 0.05
delta = 0.01
"#;

#[test]
fn bad_configs_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let missing = d.path().join("nope.toml");
    assert_eq!(run(&["learn"], &missing, &out), 2);
    let typo = write_config(d.path(), "typo.toml", &QUICK.replace("[env]", "[env]\nresolutoin = 3"));
    assert_eq!(run(&["learn"], &typo, &out), 2);
    let loose = write_config(d.path(), "loose.toml", &QUICK.replace("pr = 0.8", "pr = 0.96"));
    assert_eq!(run(&["learn"], &loose, &out), 2);
    let outside = write_config(
        d.path(),
        "outside.toml",
        &QUICK.replace(r#"initial_set = "x01""#, "initial_set = [[-3020.0, -3010.0], [-5.0, 5.0], [118.0, 900.0], [0.0, 0.0], [-0.0524, -0.0524], [10.0, 10.0]]"),
    );
    assert_eq!(run(&["verify"], &outside, &out), 2);
}

#[test]
fn simulate_and_sweep_argument_checks() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let cfg = write_config(d.path(), "quick.toml", QUICK);
    assert_eq!(run(&["simulate", "--env", "5.0,0.0"], &cfg, &out), 2);
    assert_eq!(run(&["simulate", "--x0", "1.0,2.0"], &cfg, &out), 2);
    assert_eq!(run(&["sweep", "--n-per-cell", "0"], &cfg, &out), 2);

    assert_eq!(run(&["simulate", "--horizon", "0"], &cfg, &out), 0);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 1, "{traj}");
}

#[test]
fn start_outside_the_corridor_is_a_counterexample() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let body = QUICK.replace(
        r#"initial_set = "x01""#,
        "initial_set = [[-3020.0, -3010.0], [-5.0, 5.0], [140.0, 144.0], [-0.001, 0.001], [-0.0534, -0.0514], [9.99, 10.01]]",
    );
    let cfg = write_config(d.path(), "high.toml", &body);
    assert_eq!(run(&["verify"], &cfg, &out), 10);
    let outcome = fs::read_to_string(out.join("outcome.toml")).unwrap();
    assert!(outcome.contains("counterexample"), "{outcome}");
    assert!(out.join("tubes/witness.csv").exists());
}

#[test]
fn outputs_carry_the_stamp_and_repeat_exactly() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "quick.toml", QUICK);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run(&["learn", "--seed", "9"], &cfg, out), 0);
        assert_eq!(run(&["sweep", "--resolution", "2", "--n-per-cell", "2", "--seed", "9"], &cfg, out), 0);
    }
    for f in ["contract.txt", "learn_report.toml", "sweep.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.contains("config_hash") && text.contains("seed"), "{f}");
        assert!(text.contains('9'), "{f}");
    }
}
