use std::path::Path;
use std::process::{Command, Output};

fn qsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsplit")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const QUICK_LINEAR: [&str; 6] = ["--taus", "2^-3..2^-5", "--ensemble", "4", "--m", "6"];

#[test]
fn seq_prints_base_two_points_and_signs() {
    let out = qsplit(&["seq", "--base", "2", "--count", "4", "--emit", "signs"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["n,z,xi,S_n", "1,0.5,1,1", "2,0.25,-1,0", "3,0.75,1,1", "4,0.125,-1,0"]);
}

#[test]
fn seq_offset_points() {
    let out = qsplit(&["seq", "--base", "3", "--count", "2", "--offset", "4"]);
    assert!(out.status.success());
    // φ_3(5) = 0.21 in base 3 = 7/9.
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("5,0.777"));
}

#[test]
fn seq_discrepancy_and_decomposition_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let disc = dir.path().join("d.csv");
    let out = qsplit(&["seq", "--base", "3", "--count", "300", "--emit", "discrepancy", "--out", disc.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&disc).unwrap();
    assert_eq!(text.lines().next(), Some("N,Dstar,bound"));
    assert_eq!(text.lines().count(), 301);
    for line in text.lines().skip(2) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[2], "{line}");
    }

    let dec = dir.path().join("m.csv");
    let out = qsplit(&["seq", "--base", "2", "--count", "64", "--emit", "decomposition", "--out", dec.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dec).unwrap();
    assert_eq!(text.lines().next(), Some("N,S_N,tv_residual,W1,bound"));
    // One point has no minus atom to pair with.
    assert_eq!(text.lines().nth(1), Some("1,1,1,,0e0"));
    for line in text.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<i64>().unwrap().abs(), f[2].parse::<i64>().unwrap());
    }
}

#[test]
fn linear_sweep_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    let mut args = vec!["linear"];
    args.extend(QUICK_LINEAR);
    args.extend(["--policies", "qr,lie", "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    let out = qsplit(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("config_hash,policy,tau,norm,max_err,mean_err,std_err,subflow_evals\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn csv_to_stdout_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        let mut args = vec!["linear"];
        args.extend(QUICK_LINEAR);
        args.extend(["--policies", "rand,qr"]);
        let out = Command::new(env!("CARGO_BIN_EXE_qsplit")).args(&args).env("QSPLIT_THREADS", threads).output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# small\ntaus = 2^-4..2^-6\npolicies = strang\nm = 5\n").unwrap();
    let out = qsplit(&["linear", "--config", path.to_str().unwrap(), "--p", "2", "--T", "2", "--print-config"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in ["m = 5", "p = 2", "horizon = 2", "policies = strang", "taus = 2^-4,2^-5,2^-6"] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn config_errors_exit_with_status_one() {
    let cases: [&[&str]; 7] = [
        &["linear", "--taus", "2^-4,2^-3"],
        &["linear", "--set", "colour=blue"],
        &["allen-cahn", "--grid", "48"],
        &["allen-cahn", "--flow", "vortex"],
        &["linear", "--grid", "64"],
        &["linear", "--policies", "best"],
        &["linear", "--bogus-flag"],
    ];
    for args in cases {
        let out = qsplit(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_qsplit")).args(["seq"]).env("QSPLIT_THREADS", "many").output().unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn backend_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ac.conf");
    std::fs::write(&path, "backend = allen-cahn\n").unwrap();
    let out = qsplit(&["linear", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("allen-cahn"));
}

#[test]
fn report_reads_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let mut args = vec!["linear"];
    args.extend(QUICK_LINEAR);
    args.extend(["--policies", "lie", "--out", csv.to_str().unwrap()]);
    assert!(qsplit(&args).status.success());
    let svg = dir.path().join("r.svg");
    let out = qsplit(&["report", "--in", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("lie"));
    assert!(svg.exists());

    let missing = qsplit(&["report", "--in", "/nonexistent.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!Path::new("/nonexistent.svg").exists());
}

fn small_allen_cahn(tau_ref: &str) -> Output {
    qsplit(&[
        "allen-cahn",
        "--taus",
        "2^-5..2^-6",
        "--policies",
        "qr",
        "--grid",
        "16",
        "--T",
        "0.125",
        "--tau-ref",
        tau_ref,
    ])
}

#[test]
fn small_allen_cahn_run() {
    let out = small_allen_cahn("2^-10");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference self-convergence gap"));
}

#[test]
fn coarse_reference_fails_the_gate() {
    let out = small_allen_cahn("2^-8");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("self-convergence gap"));
    assert!(out.stdout.is_empty());
}
