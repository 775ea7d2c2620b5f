//! End-to-end runs of the `screenfb` binary.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SQUARE: &str = "[domain]\nvertices = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]\n\n[grid]\nh = 0.125\n";

fn screenfb(dir: &Path, config: &str, args: &[&str], env_out: Option<&Path>) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_screenfb"));
    cmd.arg(&cfg).args(args).env_remove("SCREENFB_OUT").current_dir(dir);
    if let Some(out) = env_out {
        cmd.env("SCREENFB_OUT", out);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file in the directory besides the manifest is listed with a
/// matching digest.
fn assert_complete(dir: &Path) {
    let m = manifest(dir);
    let listed: BTreeSet<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            let name = o["file"].as_str().unwrap();
            let bytes = std::fs::read(dir.join(name)).unwrap();
            assert_eq!(o["sha256"].as_str().unwrap(), screenfb::io::sha256_hex(&bytes), "{name}");
            assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
            name.to_string()
        })
        .collect();
    let present: BTreeSet<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, present);
}

#[test]
fn full_run_succeeds_with_complete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = SQUARE.replace("0.125", "0.015625");
    let res = screenfb(tmp.path(), &config, &["--out", out.to_str().unwrap(), "--threads", "2"], None);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_complete(&out);
    let m = manifest(&out);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["threads"], 2);
    assert_eq!(m["stages"].as_array().unwrap().len(), 7);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for section in ["solver", "regions", "fan", "obstacle", "classification", "flatness"] {
        assert!(report[section].is_object(), "missing {section}");
    }
    let area: f64 = ["area_exclusion", "area_bunching", "area_customization"]
        .iter()
        .map(|k| report["regions"][k].as_f64().unwrap())
        .sum();
    assert!((area - 1.0).abs() < 0.05, "{area}");
    let u = screenfb::io::read_field(&out.join("u.field")).unwrap();
    assert_eq!((u.header.nx, u.header.ny, u.header.kind.as_str()), (65, 65, "u"));
}

#[test]
fn stage_subset_and_output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let res = screenfb(tmp.path(), SQUARE, &["--stages", "solve"], Some(&env_dir));
    assert_eq!(res.status.code(), Some(0));
    assert_complete(&env_dir);
    assert_eq!(manifest(&env_dir)["outputs"].as_array().unwrap().len(), 2);

    let flag_dir = tmp.path().join("from_flag");
    let res = screenfb(
        tmp.path(),
        SQUARE,
        &["--stages", "segment", "--out", flag_dir.to_str().unwrap()],
        Some(&env_dir.join("unused")),
    );
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(manifest(&flag_dir)["stages"], serde_json::json!(["solve", "segment"]));
    assert!(!env_dir.join("unused").exists());

    let cfg_dir = tmp.path().join("from_config");
    let config = format!("{SQUARE}\n[output]\ndir = \"{}\"\n", cfg_dir.display());
    let res = screenfb(tmp.path(), &config, &["--stages", "solve"], None);
    assert_eq!(res.status.code(), Some(0));
    assert!(cfg_dir.join("manifest.json").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let nonconvex = "[domain]\nvertices = [[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [2.0, 2.0], [0.0, 2.0]]\n\n[grid]\nh = 0.125\n";
    let res = screenfb(tmp.path(), nonconvex, &["--out", o], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("vertex 2"));

    for (config, args) in [
        (SQUARE, vec!["--stages", "solve,fan"]),
        (SQUARE, vec!["--threads", "0"]),
        ("[grid]\nh = -1.0\n", vec![]),
        ("[grid\n", vec![]),
        ("[grid]\nh = 0.1\nspacing = 2\n", vec![]),
    ] {
        let mut a = args.clone();
        a.extend(["--out", o]);
        let res = screenfb(tmp.path(), config, &a, None);
        assert_eq!(res.status.code(), Some(2), "{config} {args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_screenfb"))
        .arg(tmp.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn stage_failure_exits_three_with_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = format!("{SQUARE}\n[rays]\narc = [0, 100000]\n");
    let res = screenfb(tmp.path(), &config, &["--out", out.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["failed_stage"], "rays");
    assert!(m["error"].as_str().unwrap().contains("rays"));
    assert_complete(&out);
}

#[test]
fn reruns_are_digest_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SQUARE.replace("0.125", "0.015625");
    let digests = |threads: &str| {
        let out = tmp.path().join(format!("t{threads}"));
        let res = screenfb(tmp.path(), &config, &["--out", out.to_str().unwrap(), "--threads", threads], None);
        assert_eq!(res.status.code(), Some(0));
        manifest(&out)["outputs"].clone()
    };
    let one = digests("1");
    assert_eq!(one, digests("3"));
    assert_eq!(one, digests("1"));
}
