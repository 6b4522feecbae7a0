use std::path::Path;
use std::process::{Command, Output};

fn calf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calf"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_the_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = calf(&[
        "run",
        "--mode",
        "conservative,fallback-only",
        "--policy",
        "constant:2",
        "--critic",
        "handcrafted",
        "--trials",
        "3",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fallback-only"));
    for f in [
        "trials.csv",
        "summary.csv",
        "plot_long.csv",
        "plot_aggregate.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("exp.toml");
    std::fs::write(
        &toml,
        "mode = \"fallback-only\"\ntrials = 4\nhorizon = 50\nout = \"res\"\n",
    )
    .unwrap();
    let o = calf(&["run", "--config", toml.to_str().unwrap(), "--trials", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[0], row[5], row[6]), ("fallback-only", "2", "50"));
}

#[test]
fn bad_invocations_fail() {
    let o = calf(&["run", "--mode", "reckless"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("invalid mode"));
    let o = calf(&["run", "--mode", "brave", "--critic", "handcrafted"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing weights"));
    let o = calf(&["certify", "--c", "2.0"]);
    assert!(!o.status.success());
}

#[test]
fn train_then_export_check_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let ck_s = ck.to_str().unwrap();
    let o = calf(&[
        "train",
        "--iterations",
        "2",
        "--population",
        "8",
        "--episodes",
        "1",
        "--critic-epochs",
        "1",
        "--out",
        ck_s,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for tag in ["early", "mid", "late"] {
        for kind in ["policy", "critic"] {
            let f = ck.join(format!("{kind}_{tag}.json"));
            let o = calf(&["export-check", f.to_str().unwrap(), "--env", "pendulum"]);
            assert!(o.status.success(), "{}", stderr(&o));
            assert!(stdout(&o).contains("100 probes"));
        }
    }
    assert!(ck.join("train_log.csv").exists() && ck.join("critic_log.csv").exists());
    let o = calf(&[
        "export-check",
        ck.join("policy_late.json").to_str().unwrap(),
        "--env",
        "cartpole",
    ]);
    assert!(!o.status.success());

    let out = dir.path().join("run");
    let o = calf(&[
        "run",
        "--mode",
        "all",
        "--trials",
        "2",
        "--policy",
        ck.join("policy_late.json").to_str().unwrap(),
        "--critic",
        ck.join("critic_late.json").to_str().unwrap(),
        "--checkpoint",
        "late",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = calf(&[
        "run",
        "--mode",
        "brave",
        "--policy",
        ck.join("critic_late.json").to_str().unwrap(),
        "--critic",
        "handcrafted",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("value network"), "{}", stderr(&o));
}

#[test]
fn export_check_rejects_tampered_probes() {
    let dir = tempfile::tempdir().unwrap();
    let o = calf(&[
        "train",
        "--iterations",
        "1",
        "--population",
        "4",
        "--episodes",
        "1",
        "--no-critic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.path().join("policy_late.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let x = v["probes"][3]["output"][0].as_f64().unwrap();
    v["probes"][3]["output"][0] = (x + 1e-4).into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = calf(&["export-check", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("probe 3"));
    assert!(!Path::new(&dir.path().join("critic_late.json")).exists());
}

#[test]
fn certify_with_a_supplied_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("cert.json");
    let o = calf(&[
        "certify",
        "--grid",
        "41",
        "--c",
        "8",
        "--a",
        "0.02",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(supplied)"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["c"], 8.0);
    assert_eq!(v["fitted"], false);
    assert!(v["tau"].as_u64().unwrap() >= 1 && v["tau_f"].as_u64().unwrap() >= 1);
}
