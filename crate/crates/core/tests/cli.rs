use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-noon"))
}

#[test]
fn successful_run_lists_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deg.csv");
    let res = bin()
        .args(["degeneracy", "--n0", "6", "--n1", "9", "--lambda-max", "0.2", "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("deg.csv") && stdout.contains("deg.manifest.json"));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.lines().skip(1).any(|l| (l.split(',').nth(2).unwrap().parse::<f64>().unwrap() - 0.137986).abs() < 1e-5));
}

#[test]
fn errors_are_one_line_with_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let cases: [(&[&str], i32, &str); 4] = [
        (&["simulate", "--nu", "-1.0"], 3, "domain"),
        (&["simulate", "--n", "10", "--n-max-cap", "3"], 4, "truncation-cap"),
        (&["simulate", "--t-max", "nan"], 2, "config"),
        (&["frobnicate"], 2, "config"),
    ];
    for (args, code, kind) in cases {
        let res = bin().args(args).args(["--steps", "2", "--output"]).arg(&out).output().unwrap();
        assert_eq!(res.status.code(), Some(code), "{args:?}");
        let err = String::from_utf8(res.stderr).unwrap();
        let line = err.lines().find(|l| l.starts_with("error ")).unwrap();
        assert!(line.starts_with(&format!("error kind={kind} code={code} message=")), "{line}");
        assert_eq!(err.lines().filter(|l| l.starts_with("error ")).count(), 1);
    }
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let ok = bin().env("CAVITY_NOON_THREADS", "2").args(["simulate", "--steps", "3", "--t-max", "10", "--output"]).arg(&out).output().unwrap();
    assert!(ok.status.success());
    let manifest = std::fs::read_to_string(dir.path().join("s.manifest.json")).unwrap();
    assert!(manifest.contains("\"threads\": 2"));
    let bad = bin().env("CAVITY_NOON_THREADS", "zero").args(["simulate", "--output"]).arg(&out).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let res = bin().arg("--help").output().unwrap();
    assert!(res.status.success());
    assert!(String::from_utf8(res.stdout).unwrap().contains("oracle-compare"));
}
