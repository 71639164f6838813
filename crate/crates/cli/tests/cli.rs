use std::process::Command;

fn rws() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rws"));
    c.env_remove("RWS_OUT_DIR");
    c
}

#[test]
fn simulate_writes_trajectory_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = rws()
        .args(["simulate", "--game", "matching-pennies", "--beta", "0.999", "--k", "20"])
        .args(["--epsilon", "0.05", "--horizon", "100", "--start", "corner:1,1", "--seed", "7"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,s1,s2,p1_1,p1_2,p2_1,p2_2"));
    assert!(lines.next().unwrap().starts_with("0,"));
    assert_eq!(csv.lines().count(), 101);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trajectory.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 7);
    assert_eq!(meta["jobs"][0]["master"], 7);
    assert!(meta["git_describe"].is_string());
}

#[test]
fn missing_seed_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = rws()
        .args(["compare", "--processes", "rws,young", "--game", "matching-pennies"])
        .args(["--young-m", "1000", "--k", "20", "--epsilon", "0.05", "--horizon", "10000"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`seed`"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_file_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "command = \"simulate\"\ngame = \"matching-pennies\"\nbeta = \"high\"\n").unwrap();
    let out = rws().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("beta"), "{err}");

    std::fs::write(&path, "command = \"simulate\"\ngame = \"matching-pennies\"\nhorizn = 5\n").unwrap();
    let err = String::from_utf8_lossy(&rws().arg("run").arg(&path).output().unwrap().stderr).into_owned();
    assert!(err.contains("horizn"), "{err}");
}

#[test]
fn config_file_runs_into_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "command = \"curb\"\ngame = \"coordination\"\nk = 5\n").unwrap();
    let out_dir = dir.path().join("results");
    let out = rws().env("RWS_OUT_DIR", &out_dir).arg("run").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("curb.json")).unwrap()).unwrap();
    assert_eq!(report["blocks"].as_array().unwrap().len(), 2);
    assert_eq!(report["blocks"][1]["c1"][0], 2);
}

#[test]
fn module_errors_are_surfaced() {
    let dir = tempfile::tempdir().unwrap();
    let out = rws()
        .args(["fixed-point", "--game", "matching-pennies", "--epsilon", "0.05", "--k", "20"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integer cut-off"));
}

#[test]
fn game_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("pd.json");
    std::fs::write(
        &game,
        r#"{"name": "pd", "m1": 2, "m2": 2, "payoff1": [[3, 0], [5, 1]], "payoff2": [[3, 5], [0, 1]]}"#,
    )
    .unwrap();
    let out = rws()
        .args(["curb", "--k", "3", "--game"])
        .arg(&game)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("curb.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["blocks"][0]["c1"], serde_json::json!([2]));
}

#[test]
fn every_output_has_its_own_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = rws()
        .args(["ergodicity", "--game", "matching-pennies", "--beta", "0.9", "--k", "5"])
        .args(["--epsilon", "0.1", "--window", "100", "--horizon", "1000", "--seed", "2"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (file, meta) in [("ergodicity.csv", "ergodicity.meta.json"), ("ergodicity_fit.json", "ergodicity_fit.meta.json")] {
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(meta)).unwrap()).unwrap();
        assert_eq!(meta["file"], file);
        assert_eq!(meta["jobs"].as_array().unwrap().len(), 2);
    }
}
