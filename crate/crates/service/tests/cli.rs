use std::process::{Command, Output};

fn recourse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recourse")).args(args).output().unwrap()
}

#[test]
fn elicit_sim_replays_under_a_seed() {
    let args = ["elicit-sim", "--synthetic-n", "600", "--budget", "3", "--seed", "7"];
    let a = recourse(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, recourse(&args).stdout);
    let transcript: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(transcript.as_array().unwrap().len(), 3);
    assert_eq!(transcript[0]["round"], 1);
}

#[test]
fn bench_writes_its_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.to_str().unwrap();
    let run = recourse(&[
        "bench", "--out", out_str, "--seed", "3", "--t-values", "0,2", "--truths", "1", "--subjects", "2", "--methods",
        "rank,graph,face",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for file in ["raw.csv", "summary.csv", "report.json", "config.json"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let raw = std::fs::read_to_string(out.join("raw.csv")).unwrap();
    // header plus 3 methods x 2 T values x 2 subjects
    assert_eq!(raw.lines().count(), 1 + 12);
}

#[test]
fn unknown_method_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let run = recourse(&["bench", "--out", dir.path().to_str().unwrap(), "--methods", "teleport"]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("teleport"));
}
