use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
profile = "desk"
[system]
antennas = 16
users = 3
[scenario]
pilot_dims = [2, 4]
rate_trials = 6
geometry_seeds = 2
"#;

fn fddsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fddsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_report_and_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let csv = dir.path().join("out.csv");
    let ilp = dir.path().join("ilp");
    let o = fddsim(&[
        "run",
        "--config",
        &cfg,
        "--output",
        csv.to_str().unwrap(),
        "--dump-ilp",
        ilp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,pilot_dim,dl_snr_db,sum_lb,sum_ub,served_users,selected_beams,feedback_symbols,wall_time_s,seed"
    );
    // 2 seeds × 2 pilot dims × 2 SNR points × 2 methods
    assert_eq!(lines.count(), 16);

    let mut dumped: Vec<_> = std::fs::read_dir(&ilp).unwrap().map(|e| e.unwrap().path()).collect();
    dumped.sort();
    assert_eq!(dumped.len(), 4);
    let inst = dumped[0].to_str().unwrap();
    let solved = fddsim(&["ilp", inst]);
    assert!(solved.status.success());
    let out = stdout(&solved);
    assert!(out.contains("optimal true"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("objective ")));

    let checked = fddsim(&["oracle", "ilp", inst]);
    assert!(checked.status.success(), "{}", stdout(&checked));
}

#[test]
fn timing_flag_fills_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let csv = dir.path().join("t.csv");
    let o = fddsim(&[
        "run",
        "--config",
        &cfg,
        "--timing",
        "--geometries",
        "1",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().skip(1).any(|l| l.split(',').nth(8) != Some("0")));
}

#[test]
fn failed_cells_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("[2, 4]", "[2, 500]"));
    let csv = dir.path().join("f.csv");
    let o = fddsim(&["run", "--config", &cfg, "-o", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("T = 500"));
    // the good cells are still written
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 8);
}

#[test]
fn bad_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nantenas = 3\n");
    let o = fddsim(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("antenas"));

    let o = fddsim(&["run", "--config", &cfg, "--profile", "full"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.ilp");
    std::fs::write(&bad, "T 2\nM 8\nbeams 1 2\nusers 0\nw 1 7 1\n").unwrap();
    let o = fddsim(&["ilp", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn support_and_variance_commands() {
    let o = fddsim(&["support", "--seed", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for key in ["true DL support", "estimated DL support", "contains truth"] {
        assert!(out.contains(key), "{out}");
    }

    let o = fddsim(&["oracle", "variance", "--draws", "4000", "--tolerance", "0.1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
}
