use std::path::Path;
use std::process::{Command, Output};

fn lfrelay(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfrelay"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const SMALL: &str = "\
[train]
episodes = 2
[env]
horizon = 20
[sac]
warmup = 20
hidden = [16, 16]
[ddpg]
warmup = 20
hidden = [16, 16]
";

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfrelay(&["show-config"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    std::fs::write(dir.path().join("c.toml"), &text).unwrap();
    let again = lfrelay(&["show-config", "--config", "c.toml"], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lfrelay(&["outage-map", "--config", "nope.toml", "--grid-n", "3"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "[sac]\nlr_q = -1.0\n").unwrap();
    let bad = lfrelay(&["outage-map", "--config", "bad.toml", "--grid-n", "3"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("learning rate"));

    let wrong_d = lfrelay(&["train", "--d", "0.1", "--out", "t"], dir.path());
    assert_eq!(wrong_d.status.code(), Some(2));
}

#[test]
fn usage_errors_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfrelay(&["train", "--agent", "ppo"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn train_then_rerun_matches() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = lfrelay(
        &[
            "train",
            "--config",
            "small.toml",
            "--agent",
            "ddpg",
            "--d",
            "0.1,0.3",
            "--seed",
            "4",
            "--out",
            "a",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "manifest.json",
        "rewards.csv",
        "outage.csv",
        "losses.csv",
        "trajectory.csv",
        "checkpoint.json",
    ] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
    let re = lfrelay(&["rerun", "--manifest", "a/manifest.json", "--out", "b"], dir.path());
    assert_eq!(re.status.code(), Some(0), "{}", String::from_utf8_lossy(&re.stdout));
    assert!(!String::from_utf8_lossy(&re.stdout).contains("DIFFERS"));
}

#[test]
fn tampered_manifest_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfrelay(&["outage-map", "--grid-n", "3", "--out", "m"], dir.path());
    assert!(out.status.success());
    let path = dir.path().join("m/manifest.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("\"pt\": 0.5", "\"pt\": 0.6")).unwrap();
    let re = lfrelay(&["rerun", "--manifest", "m/manifest.json", "--out", "n"], dir.path());
    assert_eq!(re.status.code(), Some(2));
}

#[test]
fn changed_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(lfrelay(&["outage-map", "--grid-n", "3", "--out", "m"], dir.path())
        .status
        .success());
    let path = dir.path().join("m/manifest.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["outputs"][0]["sha256"] = "00".repeat(32).into();
    std::fs::write(&path, v.to_string()).unwrap();
    let re = lfrelay(&["rerun", "--manifest", "m/manifest.json", "--out", "n"], dir.path());
    assert_eq!(re.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&re.stdout).contains("DIFFERS"));
}
