use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "cutoff=1",
    "dt=0.01",
    "ensemble_size=8000",
    "gap_min=0.04",
    "gap_count=6",
    "timedep_t_min=0.05",
    "diag_ensemble_size=2000",
];

fn nsreg(args: &[&str], sets: &[&str], workers: &str) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nsreg"));
    cmd.args(args).env("NSREG_WORKERS", workers);
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    cmd.output().expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn l1_holder_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsreg(&["l1-holder", "--out", dir.path().to_str().unwrap()], SMALL, "2");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let distances = read(&dir.path().join("distances.csv"));
    let mut lines = distances.lines();
    assert_eq!(lines.next(), Some("s,t,gap,distance,stderr,used"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..3], ["0.5", "0.54", "0.04"]);
    assert_eq!(distances.lines().count(), 7);
    assert!(read(&dir.path().join("fit.csv")).starts_with("slope,intercept,r2,noise_floor\n"));
}

#[test]
fn holder_output_is_byte_identical_across_worker_counts() {
    let runs: Vec<_> = ["1", "3"]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            let out = nsreg(&["holder", "--out", dir.path().to_str().unwrap()], SMALL, w);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let files = ["l1/distances.csv", "l1/fit.csv", "besov/distances.csv", "besov/fit.csv"];
            files.map(|f| read(&dir.path().join(f)))
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# desk run\ncutoff = 1\nalpha = 0.3\n").unwrap();
    let out = nsreg(&["show-config", "--config", file.to_str().unwrap()], &["alpha=0.25"], "1");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("cutoff = 1\n"));
    assert!(text.contains("alpha = 0.25\n"));
}

#[test]
fn invalid_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let unknown = nsreg(&["l1-holder", "--out", d], &["no_such_key=1"], "1");
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_key"));
    let hypothesis = nsreg(&["besov-holder", "--out", d], &["alpha=0.5", "beta=0.6"], "1");
    assert!(!hypothesis.status.success());
    assert!(!dir.path().join("distances.csv").exists());
}

#[test]
fn diagnostics_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsreg(&["diagnostics", "--out", dir.path().to_str().unwrap()], SMALL, "2");
    let csv = read(&dir.path().join("diagnostics.csv"));
    assert!(csv.starts_with("property,measured,tolerance,pass\nbasis_size,52,==52,true\n"));
    let failed = csv.lines().skip(1).filter(|l| l.ends_with(",false")).count();
    assert_eq!(out.status.success(), failed == 0);
}
