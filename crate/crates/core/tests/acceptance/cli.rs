use std::path::Path;
use std::process::{Command, Output};

const PROBLEM: &str =
    "[equation]\na3 = 0.0\na2 = -5.0\na1 = 0.0\na0 = 4.0\nr0 = \"0.001*exp(-t)\"\n";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalar-asym"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("problem.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn report_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), PROBLEM);
    let out = dir.path().join("out");
    let result = cli(&[
        "report",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stdout)
    );
    for name in ["report.json", "wronskian.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    for i in 1..=4 {
        let y = std::fs::read_to_string(out.join(format!("y_{i}.csv"))).unwrap();
        assert!(y.starts_with("t,y,y1_over_y,y2_over_y,y3_over_y,y4_over_y\n"));
        assert!(out.join(format!("z_{i}.csv")).exists());
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "pass");
    assert_eq!(json["roots"].as_array().unwrap().len(), 4);
}

#[test]
fn analyze_leaves_later_stages_null() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), PROBLEM);
    let out = dir.path().join("out");
    let result = cli(&[
        "analyze",
        "--config",
        &config,
        "--roots",
        "1,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let roots = json["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 2);
    assert!(roots[0]["picard"].is_null());
    assert!(roots[0]["hypotheses"].is_object());
    assert!(json["wronskian"].is_null());
}

#[test]
fn trace_has_one_block_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), PROBLEM);
    let out = dir.path().join("out");
    let result = cli(&[
        "solve",
        "--config",
        &config,
        "--roots",
        "2",
        "--trace",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let trace = std::fs::read_to_string(out.join("trace_2.csv")).unwrap();
    assert!(trace.starts_with("iter,t,z,dz,d2z\n"));
    assert_eq!((trace.lines().count() - 1) % 2048, 0);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "[equation]\na3 = 0\na2 = -5\na1 = 0\na0 = 4\nr0 = \"exp(\"\n",
    );
    let result = cli(&["analyze", "--config", &bad]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("r0"));

    let config = write_config(dir.path(), PROBLEM);
    let result = cli(&["solve", "--config", &config, "--tol", "eta=0.7"]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("eta must lie in (0,0.5)"));

    let result = cli(&["analyze", "--config", &config, "--roots", "5"]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &PROBLEM.replace("0.001", "10"));
    let result = cli(&["solve", "--config", &config]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stdout).contains("smallness"));

    let complex = write_config(dir.path(), "[equation]\na3 = 0\na2 = 0\na1 = 0\na0 = 1\n");
    assert_eq!(
        cli(&["analyze", "--config", &complex]).status.code(),
        Some(1)
    );
}

#[test]
fn biharmonic_preset_prints_config() {
    let result = cli(&["preset-biharmonic", "--n", "6", "--p", "6"]);
    assert_eq!(result.status.code(), Some(0));
    let text = String::from_utf8(result.stdout).unwrap();
    assert!(text.contains("a1 = -3.968"));
    assert_eq!(
        cli(&["preset-biharmonic", "--n", "4", "--p", "6"])
            .status
            .code(),
        Some(2)
    );
}
