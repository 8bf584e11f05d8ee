use std::path::Path;
use std::process::{Command, Output};

fn subpress(config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subpress"))
        .arg("run")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let text = format!(
        "{body}\n[output]\ndir = {:?}\nprefix = \"t\"\n",
        dir.join("out").display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

const FIX_A: &str = r#"
[bundle]
matrices = [[[1, 1], [1, 1]]]

[potential]
kind = "additive"
table = [[0.0, 1.0]]

[run]
verb = "pressure"
n_list = [2, 4, 8]
m_list = [1, 2, 3]
"#;

#[test]
fn fix_a_pressure_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", FIX_A);
    let out = subpress(&cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(dir.path().join("out/t.pressure.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["n", "m", "value", "stdError", "mode", "seed"]);
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let n: f64 = rec[0].parse().unwrap();
        let m: f64 = rec[1].parse().unwrap();
        let value: f64 = rec[2].parse().unwrap();
        let expected = (1.0 + std::f64::consts::E).ln() + (m - 1.0) / n * std::f64::consts::LN_2;
        assert!((value - expected).abs() < 1e-12);
        assert_eq!(&rec[4], "exact");
        rows += 1;
    }
    assert_eq!(rows, 9);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/t.pressure.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["verb"], "pressure");
    assert_eq!(report["status"], "ok");
    assert!(report["budget"]["peak"].as_u64().unwrap() > 0);
    assert!(dir.path().join("out/t.pressure.timing.json").exists());
}

#[test]
fn zero_row_is_a_config_error_naming_matrix_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = FIX_A.replace("[[[1, 1], [1, 1]]]", "[[[1, 1], [0, 0]]]");
    let cfg = write_config(dir.path(), "bad.toml", &body);
    let out = subpress(&cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bundle.matrices"), "{err}");
    assert!(
        err.contains("base symbol 0") && err.contains("row 1"),
        "{err}"
    );
}

#[test]
fn ill_typed_key_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", FIX_A);
    let out = subpress(&cfg, &["--set", "run.n_list=[2, \"four\"]"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.n_list[1]"), "{err}");

    let out = subpress(&cfg, &["--set", "run.colour=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", FIX_A);
    let out = subpress(
        &cfg,
        &[
            "--set",
            "run.n_list=[3]",
            "--set",
            "run.m_list=[1]",
            "--set",
            "output.prefix=o",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("out/o.pressure.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("3,1,"));
}

#[test]
fn invariant_violation_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let body = FIX_A.replace(
        "verb = \"pressure\"",
        "verb = \"vp-check\"\nexact_pressure = 0.5",
    ) + "\n[measures]\nuniform = true\n";
    let cfg = write_config(dir.path(), "vp.toml", &body);
    let out = subpress(&cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("out/t.vp-check.json")).unwrap();
    assert!(report.contains("invariant-violation"));
}

#[test]
fn budget_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let body = FIX_A.replace(
        "kind = \"additive\"\ntable = [[0.0, 1.0]]",
        "kind = \"cocycle\"\ndiagonal_exp = [[[0.0, 1.0], [1.0, 0.0]]]",
    );
    let cfg = write_config(dir.path(), "c.toml", &body);
    let run = |budget: &str| {
        Command::new(env!("CARGO_BIN_EXE_subpress"))
            .arg("run")
            .arg(&cfg)
            .env("SUBPRESS_BUDGET", budget)
            .output()
            .unwrap()
    };
    let out = run("16");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
    let out = run("100000");
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/t.pressure.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["budget"]["cap"], 100000);
}

#[test]
fn dimension_needs_a_cocycle() {
    let dir = tempfile::tempdir().unwrap();
    let body = FIX_A.replace("verb = \"pressure\"", "verb = \"dimension\"");
    let cfg = write_config(dir.path(), "d.toml", &body);
    let out = subpress(&cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("potential.kind"));
}
