use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str, file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .join(file)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clipscaffold"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn inspect_lists_paths_with_kind_overrides() {
    let out = run(&[
        "inspect",
        &fixture("house", "clipart.svg"),
        "--kinds",
        &fixture("house", "kinds.json"),
    ]);
    assert!(out.status.success());
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5]["kind"], "shading");
    assert_eq!(rows[0]["kind"], "geometry");
}

#[test]
fn canonical_output_parses_back_to_the_same_table() {
    let svg = fixture("blocks", "clipart.svg");
    let canonical = run(&["inspect", &svg, "--canonical"]);
    assert!(canonical.status.success());
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("c.svg");
    std::fs::write(&again, &canonical.stdout).unwrap();
    let a = run(&["inspect", &svg]);
    let b = run(&["inspect", again.to_str().unwrap()]);
    let (a, b): (Value, Value) = (
        serde_json::from_slice(&a.stdout).unwrap(),
        serde_json::from_slice(&b.stdout).unwrap(),
    );
    for (x, y) in a.as_array().unwrap().iter().zip(b.as_array().unwrap()) {
        assert_eq!(x["id"], y["id"]);
        assert_eq!(x["fill"], y["fill"]);
        assert!((x["area"].as_f64().unwrap() - y["area"].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn mask_outline_and_filter_write_their_formats() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("m.png");
    let out = run(&[
        "mask",
        &fixture("table", "clipart.svg"),
        "--resolution",
        "64",
        "-o",
        png.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(&std::fs::read(&png).unwrap()[..8], b"\x89PNG\r\n\x1a\n");

    let outline = run(&["outline", &fixture("table", "clipart.svg")]);
    let text = String::from_utf8(outline.stdout).unwrap();
    assert!(text.contains("<path") && !text.contains("#8b5a2b"));

    let filtered = run(&[
        "filter",
        "--clipart",
        &fixture("table", "clipart.svg"),
        "--shape",
        &fixture("table", "shape.obj"),
    ]);
    assert!(filtered.status.success());
    let obj = String::from_utf8(filtered.stdout).unwrap();
    let kept = obj.lines().filter(|l| l.starts_with("v ")).count();
    let total = std::fs::read_to_string(fixture("table", "shape.obj"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("v "))
        .count();
    assert!(kept > 0 && kept < total);
}

#[test]
fn solve_flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"omega": 0.5, "order_margin": 0.02}"#).unwrap();
    let out = run(&[
        "solve",
        "--clipart",
        &fixture("blocks", "clipart.svg"),
        "--shape",
        &fixture("blocks", "shape.obj"),
        "--config",
        cfg.to_str().unwrap(),
        "--omega",
        "0.25",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol["omega"], 0.25);
    assert_eq!(sol["order_margin"], 0.02);
}

#[test]
fn render_accepts_custom_viewpoints_and_rejects_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.json");
    let out = run(&[
        "solve",
        "--clipart",
        &fixture("blocks", "clipart.svg"),
        "--shape",
        &fixture("blocks", "shape.obj"),
        "-o",
        sol.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let png = dir.path().join("r.png");
    let ok = run(&[
        "render",
        "--solution",
        sol.to_str().unwrap(),
        "--azimuth",
        "-30",
        "--elevation",
        "20",
        "--width",
        "64",
        "--height",
        "48",
        "-o",
        png.to_str().unwrap(),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = run(&[
        "render",
        "--solution",
        sol.to_str().unwrap(),
        "--view",
        "sideways",
        "-o",
        png.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error[CONFIG_ERROR]"));
}
