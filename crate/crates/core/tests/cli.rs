use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_to(path: &Path, strategy: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--strategy",
        strategy,
        "--n",
        "6",
        "--runs",
        "40",
        "--grid",
        "8x8x16",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    qest(&args)
}

#[test]
fn run_emits_one_row_per_step_deterministically() {
    let args = [
        "run",
        "--strategy",
        "random",
        "--n",
        "10",
        "--runs",
        "100",
        "--alpha",
        "2",
        "--seed",
        "7",
    ];
    let first = qest(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let text = String::from_utf8(first.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,mean_fidelity,stderr,error,strategy,alpha,runs,seed"
    );
    assert_eq!(lines.len(), 11);
    for (k, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], (k + 1).to_string());
        let mean: f64 = fields[1].parse().unwrap();
        let error: f64 = fields[3].parse().unwrap();
        assert_eq!(error, 1.0 - mean);
        assert_eq!(&fields[4..], ["random", "2", "100", "7"]);
    }
    assert_eq!(qest(&args).stdout, first.stdout);
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let out = qest(&["run", "--strategy", "random", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(qest(&["run", "--strategy", "nope"]).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_qest"))
        .args(["run", "--strategy", "random", "--n", "2", "--runs", "2"])
        .env("QEST_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn gamma_of_identical_files_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    assert!(run_to(&a, "3axes", &[]).status.success());
    let out = qest(&[
        "gamma",
        "--scheme",
        a.to_str().unwrap(),
        "--reference",
        a.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,gamma,scheme,reference"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(*row, format!("{},1,3axes,3axes", k + 1));
    }
}

#[test]
fn gamma_against_random_reference_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("k.csv");
    let reference = dir.path().join("r.csv");
    let other_alpha = dir.path().join("r5.csv");
    assert!(run_to(&scheme, "kullback3", &[]).status.success());
    assert!(run_to(&reference, "random", &[]).status.success());
    assert!(run_to(&other_alpha, "random", &["--alpha", "5"])
        .status
        .success());
    let ok = qest(&[
        "gamma",
        "--scheme",
        scheme.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    assert!(String::from_utf8(ok.stdout)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .ends_with(",kullback3,random"));
    let bad = qest(&[
        "gamma",
        "--scheme",
        scheme.to_str().unwrap(),
        "--reference",
        other_alpha.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = qest(&[
        "gamma",
        "--scheme",
        "/nonexistent.csv",
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn sweep_output_selects_by_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let out = qest(&[
        "sweep",
        "--n",
        "4",
        "--runs",
        "10",
        "--grid",
        "8x8x16",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 4);
    let s = sweep.to_str().unwrap();
    let ambiguous = qest(&["gamma", "--scheme", s, "--reference", s]);
    assert_eq!(ambiguous.status.code(), Some(2));
    let picked = qest(&[
        "gamma",
        "--scheme",
        s,
        "--reference",
        s,
        "--strategy",
        "kullback",
    ]);
    assert!(picked.status.success());
    let rows = String::from_utf8(picked.stdout).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows
        .lines()
        .skip(1)
        .all(|l| l.ends_with(",kullback,random")));
}

#[test]
fn baseline_ratio_of_own_means_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("s.csv");
    assert!(run_to(&scheme, "3axes", &[]).status.success());
    let text = fs::read_to_string(&scheme).unwrap();
    let mut fid = String::from("# source: own results\nN,alpha,F_opt\n");
    let mut err = String::from("N,alpha,f_opt\n");
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        fid.push_str(&format!("{},{},{}\n", f[0], f[5], f[1]));
        err.push_str(&format!("{},{},{}\n", f[0], f[5], f[3]));
    }
    let fid_path = dir.path().join("fid.csv");
    let err_path = dir.path().join("err.csv");
    fs::write(&fid_path, fid).unwrap();
    fs::write(&err_path, err).unwrap();

    let out = qest(&[
        "baseline-ratio",
        "--scheme",
        scheme.to_str().unwrap(),
        "--baseline",
        fid_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,fidelity_ratio"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")), "{text}");

    let out = qest(&[
        "baseline-ratio",
        "--scheme",
        scheme.to_str().unwrap(),
        "--baseline",
        err_path.to_str().unwrap(),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,error_ratio"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")), "{text}");
}

#[test]
fn baseline_ratio_flags_missing_rows_and_rejects_bad_headers() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("s.csv");
    assert!(run_to(&scheme, "random", &[]).status.success());
    let partial = dir.path().join("partial.csv");
    fs::write(&partial, "N,alpha,F_opt\n1,2,0.9\n").unwrap();
    let out = qest(&[
        "baseline-ratio",
        "--scheme",
        scheme.to_str().unwrap(),
        "--baseline",
        partial.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(2).all(|l| l.ends_with(',')), "{text}");
    assert!(String::from_utf8(out.stderr).unwrap().contains("N=2"));

    let malformed = dir.path().join("bad.csv");
    fs::write(&malformed, "n,a,b\n1,2,0.9\n").unwrap();
    let out = qest(&[
        "baseline-ratio",
        "--scheme",
        scheme.to_str().unwrap(),
        "--baseline",
        malformed.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}
