use std::path::Path;
use std::process::{Command, Output};

use segvoronoi::cli::{load_diagram, save_diagram, EXIT_DEGENERATE, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_VERIFY};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segvoronoi")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_instance(dir: &Path, name: &str, mode: &str, segs: &[[f64; 4]]) -> String {
    let path = dir.join(name);
    let doc = serde_json::json!({ "mode": mode, "segments": segs });
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

const FOUR: [[f64; 4]; 4] = [[0.0, 0.0, 1.0, 0.3], [0.2, 3.0, 2.0, 4.1], [4.0, 1.0, 5.2, -1.3], [3.0, 3.0, 3.5, 5.0]];

#[test]
fn census_of_two_segments() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "two.json", "disjoint", &[[0.0, 0.0, 1.0, 0.0], [0.0, 3.0, 2.0, 4.0]]);
    let o = run(&["census", &inst, "--json"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &rows[0];
    assert_eq!((row["k"].as_u64(), row["f"].as_u64(), row["e"].as_u64(), row["v"].as_u64(), row["u"].as_u64()), (Some(1), Some(2), Some(1), Some(0), Some(2)));
}

#[test]
fn compute_writes_levels_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "four.json", "disjoint", &FOUR);
    let out = dir.path().join("levels");
    let o = run(&["compute", &inst, "--k", "1..3", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    for k in 1..=3 {
        let path = out.join(format!("level-{k}.json"));
        let d = load_diagram(&path).unwrap();
        assert_eq!(d.k, k);
        let c = d.census().unwrap();
        assert_eq!(c.e as i64, 3 * (c.f as i64 - 1) - c.u as i64);
        let again = dir.path().join(format!("again-{k}.json"));
        save_diagram(&again, &d).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
        assert_eq!(load_diagram(&again).unwrap(), d);
    }
}

#[test]
fn verify_reports_obstacle_faces() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("obstacle.json");
    let o = run(&["generate", "--family", "obstacle", "--n", "8", "--k", "3", "-o", inst.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let report = dir.path().join("report.json");
    let o = run(&["verify", inst.to_str().unwrap(), "--k-max", "3", "--samples", "500", "--star-points", "20", "-o", report.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["failures"].as_u64(), Some(0));
    let six = rep["regions"].as_array().unwrap().iter().any(|r| r["k"] == 3 && r["faces"] == 6 && r["unbounded"] == 2);
    assert!(six, "order-3 region of the long segments has 6 faces");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["census", "/nonexistent/instance.json"])), EXIT_IO);
    assert_eq!(code(&run(&["frobnicate"])), EXIT_IO);
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "four.json", "disjoint", &FOUR);
    assert_eq!(code(&run(&["census", &inst, "--k", "9"])), EXIT_INFEASIBLE);
    let crossing = write_instance(dir.path(), "cross.json", "disjoint", &[[0.0, 0.0, 2.0, 2.0], [0.0, 2.0, 2.0, 0.1]]);
    assert_eq!(code(&run(&["census", &crossing])), EXIT_DEGENERATE);
    assert_ne!(EXIT_VERIFY, EXIT_OK);
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "four.json", "disjoint", &FOUR);
    let svg = dir.path().join("k2.svg");
    let o = run(&["render", &inst, "--k", "2", "-o", svg.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.matches("<title>").count() >= 4);
}
