//! The binary end to end: exit codes, verdict lines and reproducible outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn smplab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smplab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Every file of a run directory except the manifest, which carries a timestamp.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn smp_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["smp", "--scenario", &fixture("bilinear.cfg"), "--seed", "7", "--paths", "400"];
    let (ra, rb) = (smplab(&args, a.path()), smplab(&args, b.path()));
    assert!(ra.status.success() && rb.status.success(), "{ra:?}");
    let (da, db) = (run_dirs(a.path()), run_dirs(b.path()));
    assert_eq!(da.len(), 1);
    assert_eq!(da[0].file_name(), db[0].file_name(), "run directory names depend only on the inputs");
    let (oa, ob) = (outputs(&da[0]), outputs(&db[0]));
    assert!(oa.iter().any(|(n, _)| n == "gaps.csv"));
    assert_eq!(oa, ob);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["simulate", "--scenario", &fixture("bilinear16.cfg"), "--paths", "300"];
    let ra = smplab(&args, a.path());
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let rb = smplab(&one, b.path());
    assert!(ra.status.success() && rb.status.success());
    let (da, db) = (run_dirs(a.path()), run_dirs(b.path()));
    assert_eq!(da[0].file_name(), db[0].file_name());
    assert_eq!(outputs(&da[0]), outputs(&db[0]));
}

#[test]
fn manifest_records_overrides_and_csvs_carry_a_schema_line() {
    let root = tempfile::tempdir().unwrap();
    let o = smplab(&["simulate", "--scenario", &fixture("bilinear16.cfg"), "--paths", "100", "--seed", "3"], root.path());
    assert!(o.status.success());
    let dir = &run_dirs(root.path())[0];
    assert!(dir.file_name().unwrap().to_string_lossy().starts_with("simulate_3_"));
    let m = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    for key in ["experiment=simulate", "seed=3", "override.paths=100", "override.seed=3", "version=", "timestamp="] {
        assert!(m.contains(key), "{key} missing from\n{m}");
    }
    let state = fs::read_to_string(dir.join("state.csv")).unwrap();
    assert!(state.starts_with("# smplab state csv v1\nstep,t,mean_l2_norm,std_err\n"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.cfg");
    fs::write(&bad, "[grid]\nn = 1\n").unwrap();
    for args in [
        vec!["simulate", "--scenario", bad.to_str().unwrap()],
        vec!["simulate", "--scenario", "/no/such/file.cfg"],
        vec!["simulate", "--scenario", &fixture("tiny.cfg"), "--bogus"],
        vec!["adjoint", "--scenario", &fixture("tiny.cfg"), "--order", "3"],
        vec!["rates", "--scenario", &fixture("rates.cfg"), "--kind", "nope"],
        vec!["rates", "--scenario", &fixture("rates.cfg"), "--eps-ladder", "0.5,1.5"],
        vec!["oracle", "--scenario", &fixture("tiny.cfg")],
    ] {
        let o = smplab(&args, root.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn degenerate_rates_report_an_undefined_slope_and_succeed() {
    let root = tempfile::tempdir().unwrap();
    let o = smplab(&["rates", "--kind", "residual", "--scenario", &fixture("degenerate.cfg")], root.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("id=rates/residual status=pass"), "{out}");
    assert!(out.contains("slope undefined, statistic identically 0"), "{out}");
}

#[test]
fn second_order_duality_passes_with_the_mollified_terminal() {
    let root = tempfile::tempdir().unwrap();
    let o = smplab(&["duality", "--order", "2", "--eta", "4h2", "--scenario", &fixture("bilinear16.cfg"), "--paths", "1000"], root.path());
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    let summary = out.lines().find(|l| l.starts_with("VERDICT id=duality2 ")).unwrap();
    assert!(summary.contains("status=pass") && summary.contains("tolerance=5.000000e-2"), "{summary}");
    let dir = &run_dirs(root.path())[0];
    assert!(fs::read_to_string(dir.join("manifest.txt")).unwrap().contains("override.eta=4h2"));
}

#[test]
fn oracle_passes_on_the_noise_free_fixture() {
    let root = tempfile::tempdir().unwrap();
    let o = smplab(&["oracle", "--scenario", &fixture("oracle.cfg")], root.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("status=pass")).count(), 2);
}

#[test]
fn failed_checks_exit_with_one() {
    // 32 steps leave a time-discretization error far above the oracle tolerance
    let root = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("oracle.cfg")).unwrap();
    assert!(text.contains("steps = 2048"));
    let coarse = root.path().join("coarse.cfg");
    fs::write(&coarse, text.replace("steps = 2048", "steps = 32")).unwrap();
    let o = smplab(&["oracle", "--scenario", coarse.to_str().unwrap()], &root.path().join("runs"));
    let out = stdout(&o);
    assert!(out.contains("id=oracle/p status=fail"), "{out}");
    assert_eq!(o.status.code(), Some(1), "{out}");
}
