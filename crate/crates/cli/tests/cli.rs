use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const KITCHEN_LABELS: &str = "floor,wall,counter,sink,oven,sofa,table,laptop";

fn vlmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlmap"))
        .args(args)
        .current_dir(dir)
        .env_remove("VLMAP_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vlmap(dir, args);
    assert!(
        out.status.success(),
        "vlmap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    vlmap(dir, args).status.code().expect("exit code")
}

fn script(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn kitchen_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "--kind", "kitchen", "--out", "kitchen.json"]);
    let info: Value = serde_json::from_str(&ok(
        d,
        &["--json", "synth", "frames", "--scene", "kitchen.json", "--out", "frames", "--gt", "gt.png"],
    ))
    .unwrap();
    assert!(info["frames"].as_u64().unwrap() > 100);
    let (rows, cols) = (info["rows"].to_string(), info["cols"].to_string());
    let grid = ["--rows", rows.as_str(), "--cols", cols.as_str(), "--scale", "0.05"];

    let build = |out: &str| {
        let mut args = vec!["--json", "build", "--frames", "frames", "--out", out];
        args.extend_from_slice(&grid);
        let v: Value = serde_json::from_str(&ok(d, &args)).unwrap();
        assert!(v["observed_cells"].as_u64().unwrap() > 0);
        v["map_id"].clone()
    };
    let id_a = build("a.vlm");
    let id_b = build("b.vlm");
    assert_eq!(id_a, id_b);
    assert_eq!(fs::read(d.join("a.vlm")).unwrap(), fs::read(d.join("b.vlm")).unwrap());

    ok(d, &["index", "--map", "a.vlm", "--labels", KITCHEN_LABELS, "--out", "seg.png"]);
    assert!(d.join("seg.png").is_file());
    let legend: Value = serde_json::from_slice(&fs::read(d.join("seg.json")).unwrap()).unwrap();
    let names: Vec<&str> = legend["labels"].as_array().unwrap().iter().map(|l| l["label"].as_str().unwrap()).collect();
    assert_eq!(names.join(","), KITCHEN_LABELS);

    let m: Value = serde_json::from_str(&ok(d, &["--json", "eval-seg", "--pred", "seg.png", "--gt", "gt.png"])).unwrap();
    assert_eq!(m["mIOU"].as_f64(), Some(1.0));
    assert_eq!(m["pixel_acc"].as_f64(), Some(1.0));
    let text = ok(d, &["eval-seg", "--pred", "seg.png", "--gt", "gt.png"]);
    assert!(text.contains("mIOU 1.000000"), "{text}");

    // A smaller grid gives a label image of a different shape.
    ok(d, &["build", "--frames", "frames", "--out", "small.vlm", "--rows", "120", "--cols", "120"]);
    ok(d, &["index", "--map", "small.vlm", "--labels", KITCHEN_LABELS, "--out", "small.png"]);
    assert_eq!(code(d, &["eval-seg", "--pred", "small.png", "--gt", "gt.png"]), 3);

    let laptop = script("golden_laptop.nav");
    let summary = ok(
        d,
        &[
            "exec", "--map", "a.vlm", "--profile", "locobot", "--script", &laptop, "--start", "80,130,0",
            "--labels", KITCHEN_LABELS, "--trace", "trace.jsonl", "--actions", "actions.txt",
        ],
    );
    assert!(summary.contains("6 calls"), "{summary}");
    let trace = fs::read_to_string(d.join("trace.jsonl")).unwrap();
    let steps: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(steps.len(), 6);
    assert_eq!(steps[0]["primitive"], "move_north");
    let counted: u64 = steps.iter().map(|s| s["actions"].as_u64().unwrap()).sum();
    let actions = fs::read_to_string(d.join("actions.txt")).unwrap();
    assert_eq!(actions.lines().count() as u64, counted);

    let plan: Value = serde_json::from_str(&ok(
        d,
        &["--json", "plan", "--map", "a.vlm", "--profile", "locobot", "--start", "80,130", "--goal", "20,20"],
    ))
    .unwrap();
    let cells = plan["cells"].as_array().unwrap();
    assert_eq!(cells.first().unwrap(), &serde_json::json!([80, 130]));
    assert_eq!(cells.last().unwrap(), &serde_json::json!([20, 20]));

    ok(d, &["obstacles", "--map", "a.vlm", "--profile", "drone", "--out", "drone.pgm"]);
    assert!(d.join("drone.pgm").is_file());
    ok(d, &["plan", "--map", "a.vlm", "--obstacles", "drone.pgm", "--start", "80,130", "--goal", "40,40"]);
    assert_eq!(code(d, &["plan", "--map", "a.vlm", "--profile", "hovercraft", "--start", "1,1", "--goal", "2,2"]), 2);
    assert_eq!(code(d, &["plan", "--map", "small.vlm", "--obstacles", "drone.pgm", "--start", "1,1", "--goal", "2,2"]), 3);
}

#[test]
fn missing_manifest_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = vlmap(tmp.path(), &["build", "--frames", "empty", "--out", "m.vlm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
    assert!(!tmp.path().join("m.vlm").exists());
}

#[test]
fn corrupt_map_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.vlm"), b"not a map at all").unwrap();
    assert_eq!(code(tmp.path(), &["index", "--map", "bad.vlm", "--labels", "sofa,other", "--out", "x.png"]), 3);
    assert_eq!(code(tmp.path(), &["index", "--map", "absent.vlm", "--labels", "sofa", "--out", "x.png"]), 2);
}

#[test]
fn bad_arguments_exit_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(tmp.path(), &["build"]), 2);
    assert_eq!(code(tmp.path(), &["frobnicate"]), 2);
}

#[test]
fn small_bench_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir(d.join("suite")).unwrap();
    let made = ok(
        d,
        &["synth", "suite", "--out", "suite/suite.json", "--scenes", "1", "--multi-object", "3", "--spatial", "2"],
    );
    assert!(made.starts_with("5 tasks"), "{made}");
    let csv = ok(d, &["bench", "--suite", "suite/suite.json", "--out", "results"]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("map_profile,body,episodes,sr_1,sr_2,sr_3,sr_4,independent_sr,success_rate,spl")
    );
    let row: Vec<&str> = lines.next().expect("one summary row").split(',').collect();
    assert_eq!(row[2], "5");
    let sr: f64 = row[8].parse().unwrap();
    let spl: f64 = row[9].parse().unwrap();
    assert!((0.0..=1.0).contains(&sr) && spl <= sr + 1e-12);
    assert_eq!(fs::read_to_string(d.join("results/summary.csv")).unwrap(), csv);
    let episodes = fs::read_to_string(d.join("results/results.jsonl")).unwrap();
    assert_eq!(episodes.lines().count(), 5);

    let again = ok(d, &["bench", "--suite", "suite/suite.json"]);
    assert_eq!(again, csv);
}
