use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_INTERPOLATION: &str = r#"{
  "experiment": "interpolation",
  "grid": [0.0, 1.0],
  "optimizer": { "kind": "NelderMead", "restarts": 1, "max_evals": 6, "seed": 3 }
}"#;

fn vgqec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgqec")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_writes_one_row_per_point_and_code() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "interp.json", SMALL_INTERPOLATION);
    let csv_path = dir.path().join("out/interp.csv");
    let out = vgqec(&["run", &config, "-o", csv_path.to_str().unwrap(), "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "param,code,recovery,channel_fidelity,avg_fidelity,restarts,evaluations,seed");
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(keys, [("0", "513"), ("0", "rep5X"), ("0", "vgqec"), ("1", "513"), ("1", "rep5X"), ("1", "vgqec")]);
    assert!(stdout(&out).contains("experiment interpolation (seed 3)"));
    assert!(fs::read_to_string(csv_path.with_extension("svg")).unwrap().matches("<polyline").count() == 3);
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "interp.json", SMALL_INTERPOLATION);
    let first = vgqec(&["run", &config, "-o", "-"]);
    let second = vgqec(&["run", &config, "-o", "-"]);
    assert!(first.status.success());
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"experiment": "thermal", "grid": [1.0], "optimizer": {"max_evals": "many"}}"#, "optimizer.max_evals"),
        (r#"{"experiment": "thermal", "grid": [1.0], "optimiser": {}}"#, "optimiser"),
        (r#"{"experiment": "thermal", "grid": [3.0, 1.0]}"#, "grid"),
        (r#"{"experiment": "thermal", "grid": [1.0], "codes": ["steane"]}"#, "codes[0]"),
    ];
    for (i, (text, key)) in cases.into_iter().enumerate() {
        let config = write(&dir, &format!("bad{i}.json"), text);
        let out = vgqec(&["run", &config]);
        assert_eq!(out.status.code(), Some(1), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(key), "{err} lacks {key}");
    }
    let out = vgqec(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimal_recovery_reports_the_repetition_code_value() {
    let out = vgqec(&["optimal-recovery", "--code", "rep3Z", "--noise", "bit_flip", "--param", "0.1", "--recovery", "sdp,standard"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("0.1,rep3Z,sdp,0.972,"), "{text}");
    assert!(text.contains("0.1,rep3Z,standard,0.972,"), "{text}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("F_C"));
}

#[test]
fn kl_check_and_encode() {
    let out = vgqec(&["kl-check"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0,513,16,"), "{row}");
    let residual: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!(residual <= 1e-10);

    let out = vgqec(&["encode", "--code", "rep3Z"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("000,1,0,0,0"));

    let out = vgqec(&["encode", "--code", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_code_writes_to_a_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("verify.csv");
    let out = vgqec(&["verify-code", "--param", "0,0.1", "-o", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 5);
    let text = stdout(&out);
    assert!(text.contains("codewords") && text.contains(&format!("wrote {}", Path::new(&path).display())));
}
