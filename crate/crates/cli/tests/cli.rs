use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudorbit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const DYADIC_SMALL: &[&str] = &[
    "entropy",
    "gallery:dyadic",
    "--n-min",
    "3",
    "--n-max",
    "8",
    "--eps",
    "0.03125",
    "--grid",
    "8192",
];

#[test]
fn entropy_writes_table_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = run(DYADIC_SMALL, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    assert!(csv.starts_with("n,eps,alpha,count,slope_tailmax,slope_lsq\n"));
    assert_eq!(csv.lines().count(), 7);
    let s = json(&dir.path().join("entropy.json"));
    let h = s["estimate"]["h"].as_f64().unwrap();
    assert!((0.6..=0.75).contains(&h), "h = {h}");
}

#[test]
fn replay_is_byte_identical_and_thread_independent() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut one = DYADIC_SMALL.to_vec();
    one.extend(["--threads", "1"]);
    let mut four = DYADIC_SMALL.to_vec();
    four.extend(["--threads", "4"]);
    assert!(run(&one, a.path()).status.success());
    assert!(run(&four, b.path()).status.success());
    for f in ["entropy.csv", "entropy.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let first = fs::read(a.path().join("entropy.json")).unwrap();
    fs::remove_file(a.path().join("entropy.json")).unwrap();
    let again = run(&one, a.path());
    assert!(again.status.success());
    assert!(stderr(&again).contains("cache hit"));
    assert_eq!(fs::read(a.path().join("entropy.json")).unwrap(), first);
}

#[test]
fn rotation_has_zero_entropy() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "entropy",
            "gallery:rotation:0.6180339887",
            "--n-min",
            "6",
            "--n-max",
            "14",
            "--eps",
            "0.0078125",
            "--grid",
            "4096",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let h = json(&dir.path().join("entropy.json"))["estimate"]["h"]
        .as_f64()
        .unwrap();
    assert!(h <= 0.02);
}

const DYADIC_CONFIG: &str = r#"{
    "space": "interval",
    "generators": [
        {"id": 0, "kind": "identity", "inverse": 0},
        {"id": 1, "kind": "affine", "pieces": [{"domain": [0, 0.5], "params": {"slope": 2, "offset": 0}}], "lipschitz": 2, "inverse": 3},
        {"id": 2, "kind": "affine", "pieces": [{"domain": [0.5, 1], "params": {"slope": 2, "offset": -1}}], "lipschitz": 2, "inverse": 4},
        {"id": 3, "kind": "affine", "pieces": [{"domain": [0, 1], "params": {"slope": 0.5, "offset": 0}}], "lipschitz": 0.5, "inverse": 1},
        {"id": 4, "kind": "affine", "pieces": [{"domain": [0, 1], "params": {"slope": 0.5, "offset": 0.5}}], "lipschitz": 0.5, "inverse": 2}
    ]
}"#;

#[test]
fn config_file_matches_gallery() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("dyadic.json");
    fs::write(&cfg, DYADIC_CONFIG).unwrap();
    let from_file = dir.path().join("file");
    let from_gallery = dir.path().join("gallery");
    let mut args = DYADIC_SMALL.to_vec();
    let cfg_str = cfg.to_str().unwrap();
    args[1] = cfg_str;
    assert!(run(&args, &from_file).status.success());
    assert!(run(DYADIC_SMALL, &from_gallery).status.success());
    assert_eq!(
        fs::read(from_file.join("entropy.csv")).unwrap(),
        fs::read(from_gallery.join("entropy.csv")).unwrap()
    );
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        DYADIC_CONFIG.replace("\"slope\": 0.5, \"offset\": 0.5", "\"slope\": 0.5"),
    )
    .unwrap();
    let o = run(
        &["entropy", cfg.to_str().unwrap(), "--n-max", "4", "--eps", "0.1"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("generators[4].pieces[0].params.offset"),
        "{}",
        stderr(&o)
    );

    fs::write(
        &cfg,
        DYADIC_CONFIG.replace(
            "\"lipschitz\": 2, \"inverse\": 3",
            "\"lipschitz\": 2, \"inverse\": 3, \"colour\": 1",
        ),
    )
    .unwrap();
    let o = run(
        &["entropy", cfg.to_str().unwrap(), "--n-max", "4", "--eps", "0.1"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("generators[1]") && stderr(&o).contains("colour"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn pseudo_entropy_tracks_entropy_under_theorem1() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("plots").join("pseudo.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_pseudorbit"))
        .args([
            "pseudo-entropy",
            "gallery:dyadic",
            "--schedule",
            "theorem1",
            "--n-min",
            "3",
            "--n-max",
            "7",
        ])
        .args(["--eps", "0.125", "--grid", "2048", "--seed", "5", "--out"])
        .arg(dir.path())
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("pseudo_entropy.json"));
    assert!(r["report"]["difference"].as_f64().unwrap().abs() <= 0.05);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table, fs::read_to_string(dir.path().join("pseudo.csv")).unwrap());
    // The alpha column carries the schedule.
    let alpha: f64 = table
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((alpha - 0.125 / 7.0).abs() < 1e-15, "alpha = {alpha}");
}

#[test]
fn short_list_schedule_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "pseudo-entropy",
            "gallery:dyadic",
            "--schedule",
            "list:0.01,0.005",
            "--n-max",
            "5",
            "--eps",
            "0.1",
        ],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("list has 2 values"), "{}", stderr(&o));
}

#[test]
fn constant_tolerance_on_section6_gains_log2() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "pseudo-entropy",
            "gallery:section6",
            "--schedule",
            "const:0.001",
            "--pool",
            "adversarial",
            "--n-min",
            "1",
            "--n-max",
            "5",
            "--eps",
            "0.1",
            "--grid",
            "1024",
            "--unresolved",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let d = json(&dir.path().join("pseudo_entropy.json"))["report"]["difference"]
        .as_f64()
        .unwrap();
    assert!(d >= std::f64::consts::LN_2 - 0.1, "difference {d}");
}

#[test]
fn verify_suites_report_margins() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "metrics"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let v = json(&dir.path().join("verify.json"));
    assert_eq!(v["passed"], Value::Bool(true));
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["margin"].as_f64().unwrap() >= 0.0));

    let o = run(&["verify", "orbits"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn verify_section6_flags_the_first_branch_step() {
    // The first adversarial step deviates by exactly alpha, short of
    // alpha (1 + delta); the check is reported as failed.
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "section6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v = json(&dir.path().join("verify.json"));
    let failed: Vec<&Value> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["ok"] == false)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["name"], "branch deviation >= alpha (1+delta)^j");
    assert!(failed[0]["detail"].as_str().unwrap().contains("{1: 200}"));
}

#[test]
fn bundles_examples() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["bundles", "--lengths", "1,2", "--entropy", "0.7", "--m", "10"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let b = json(&dir.path().join("bundles.json"));
    assert!((b["bounds"]["lower"].as_f64().unwrap() - 0.35).abs() <= 1e-12);
    assert!((b["bounds"]["upper"].as_f64().unwrap() - 0.7).abs() <= 1e-12);
    assert_eq!(b["rescale"]["reports"][0]["ratio"].as_f64().unwrap(), 1.2);

    let o = run(
        &["bundles", "--lengths", "1,2", "--entropy", "0.7", "--m", "10,100,1000"],
        dir.path(),
    );
    assert!(o.status.success());
    let b = json(&dir.path().join("bundles.json"));
    assert_eq!(b["rescale"]["toward_one"], Value::Bool(true));

    let o = run(&["bundles", "--entropy", "0.7"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--lengths"));
}

#[test]
fn bundles_from_a_fibre_system() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "bundles",
            "--lengths",
            "1,3",
            "--fiber",
            "gallery:rotation:0.3",
            "--fiber-eps",
            "0.05",
            "--fiber-grid",
            "400",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let b = json(&dir.path().join("bundles.json"));
    assert_eq!(b["bounds"]["upper"].as_f64().unwrap(), 0.0);
}

#[test]
fn unknown_gallery_fails() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["entropy", "gallery:lorenz", "--n-max", "4", "--eps", "0.1"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lorenz"));
}
