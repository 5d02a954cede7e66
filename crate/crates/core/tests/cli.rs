use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperadiabatic"))
}

#[test]
fn sweep_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "model = two-level\nk = 1e-2\ntmin = 20\ntmax = 200\nppd = 2\n",
    )
    .unwrap();
    let run = |path: &std::path::Path| {
        let status = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--ppd", "3", "--no-cache", "--out"])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = run(&out);
    let b = run(&dir.path().join("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "T,eps,eps_bar_T,eps_bar_1,eps_bar_2,ratio1,ratio2,epsT2,slope,norm_drift"
    );
    // ppd from the flag (3 per decade over one decade) wins over the file.
    assert_eq!(lines.count(), 4);
}

#[test]
fn json_report_carries_estimates_and_notes() {
    let out = bin()
        .args([
            "sweep",
            "--k",
            "1e-3",
            "--tmin",
            "50",
            "--tmax",
            "50",
            "--format",
            "json",
            "--no-cache",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 1);
    assert_eq!(v["config"]["model"]["k"][0], 1e-3);
    assert!(v["estimates"]["second"]["terms"].as_array().unwrap().len() == 2);
    assert!(v["estimates"]["reference"]["derivative_coefficient"].is_number());
    assert!(!v["notes"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let bad_value = bin()
        .args(["sweep", "--k", "-1", "--no-cache"])
        .output()
        .unwrap();
    assert_eq!(bad_value.status.code(), Some(1));
    let bad_flag = bin().args(["sweep", "--nope"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(1));
    let bad_key = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad_key.path(), "colour = blue\n").unwrap();
    let out = bin()
        .args(["estimate", "--config"])
        .arg(bad_key.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `colour`"));
    let singular = bin()
        .args(["estimate", "--model", "two-level", "--k", "0"])
        .output()
        .unwrap();
    assert!(singular.status.success());
}

#[test]
fn estimate_and_schedule_dump() {
    let out = bin()
        .args(["estimate", "--k", "0", "--orders", "1"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("path,1,1.0,1.0,1.4142135623730951"), "{text}");

    let out = bin()
        .args([
            "schedule-dump",
            "--model",
            "two-level-exp",
            "--k",
            "1e-2",
            "--points",
            "3",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "s,value,deriv1");
    assert_eq!(rows[1], "0.0,0.0,0.0");
    let mid: Vec<f64> = rows[2].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((mid[1] - 0.25 * (-0.04f64).exp()).abs() < 1e-15);
}

#[test]
fn check_runs_a_single_criterion() {
    let out = bin().args(["check", "--only", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("criterion 1 PASS"), "{text}");
}
