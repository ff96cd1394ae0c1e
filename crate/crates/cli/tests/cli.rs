use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use constructa::fixtures;
use constructa::scenario::{save_scenario, Scenario};
use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> Scenario {
    fixtures::taxonomy_suite().into_iter().find(|f| f.name == name).unwrap().scenario
}

fn write(dir: &TempDir, name: &str, s: &Scenario) -> PathBuf {
    let p = dir.path().join(format!("{name}.json"));
    save_scenario(s, &p).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_constructa")).args(args).output().unwrap()
}

fn run_on(verb: &str, path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![verb, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn analyze_exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = run_on("analyze", &write(&dir, "a", &fixture("2+2")), &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["taxonomy"]["ind_count"], "Ind(1)");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["scenario_sha256"].as_str().unwrap().len(), 64);

    let o = run_on("analyze", &write(&dir, "b", &fixture("3+1")), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["taxonomy"]["ind_count"], "Ind(2)");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = run_on("analyze", &bad, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
}

#[test]
fn analyze_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s", &fixture("1+1+1"));
    let a = run_on("analyze", &p, &["--seed", "5"]);
    let b = run_on("analyze", &p, &["--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn localize_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let s = fixture("2+1+1");
    let o = run_on("localize", &write(&dir, "s", &s), &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let sols = v["solutions"]["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    let t = &sols[0]["transform"];
    let truth = s.truth.unwrap();
    assert!((t["dx"].as_f64().unwrap() - truth.dx).abs() < 1e-6);
    assert!((t["dy"].as_f64().unwrap() - truth.dy).abs() < 1e-6);
    assert!((t["phi"].as_f64().unwrap() - truth.phi).abs() < 1e-6);
}

#[test]
fn localize_with_oracle_on_2p1() {
    let dir = TempDir::new().unwrap();
    let o = run_on("localize", &write(&dir, "s", &fixture("2+1")), &["--oracle"]);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&o);
    assert_eq!(v["agree"], true);
    assert_eq!(v["solutions"]["solutions"].as_array().unwrap().len(), 4);
    assert_eq!(v["oracle"]["solutions"].as_array().unwrap().len(), 4);
}

#[test]
fn localize_without_measurements_fails() {
    let dir = TempDir::new().unwrap();
    let mut s = fixture("2+2");
    s.measurements = None;
    let o = run_on("localize", &write(&dir, "s", &s), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_selection() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s", &fixture("3+1"));
    let o = run_on("localize", &p, &["--solver", "closed-form"]);
    assert_eq!(json(&o)["solver"], "closed-form");
    assert_eq!(json(&o)["solutions"]["ind"], "Ind(2)");
    let o = run_on("localize", &p, &["--solver", "simplex"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("simplex"));
}

#[test]
fn gramian_single_anchor_is_singular() {
    let dir = TempDir::new().unwrap();
    let s = fixture("single-C3");
    let t = s.truth.unwrap();
    let arg = format!("{},{},{}", t.dx, t.dy, t.phi);
    let o = run_on("gramian", &write(&dir, "s", &s), &["--transform", &arg]);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&o);
    assert!(v["report"]["rank"].as_u64().unwrap() <= 2);
    assert_eq!(v["report"]["verdict"], "WeaklyUnconstructible");
}

#[test]
fn gramian_1p1p1_full_rank() {
    let dir = TempDir::new().unwrap();
    let s = fixture("1+1+1");
    let t = s.truth.unwrap();
    let arg = format!("{},{},{}", t.dx, t.dy, t.phi);
    let o = run_on("gramian", &write(&dir, "s", &s), &["--transform", &arg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["report"]["rank"], 3);
}

#[test]
fn gramian_numerical_cross_check() {
    use rand::SeedableRng;
    let dir = TempDir::new().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let s = fixtures::random_unicycle(&mut rng, 3, 6, 15.0);
    let t = s.truth.unwrap();
    let arg = format!("{:e},{:e},{:e}", t.dx, t.dy, t.phi);
    let o = run_on("gramian", &write(&dir, "s", &s), &["--transform", &arg, "--numerical"]);
    assert_ne!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["numerical"]["max_rel_diff"].as_f64().unwrap() <= 1e-6);
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn plotdata_locus_has_two_branches() {
    let dir = TempDir::new().unwrap();
    let rows = csv_rows(&run_on("plotdata", &write(&dir, "s", &fixture("1+1+1")), &["locus"]));
    assert!(rows.iter().any(|r| r[1] == "a"));
    assert!(rows.iter().any(|r| r[1] == "b"));
}

#[test]
fn plotdata_critical_lines_on_2p1() {
    let dir = TempDir::new().unwrap();
    let rows = csv_rows(&run_on("plotdata", &write(&dir, "s", &fixture("2+1")), &["critical-lines"]));
    assert!(!rows.is_empty() && rows.len() <= 6);
}

#[test]
fn plotdata_cluster_map_is_a_ring() {
    let dir = TempDir::new().unwrap();
    let s = fixture("single-C3");
    let b = s.anchors[0].position;
    let radius = s.truth.unwrap().translation().dist(b);
    let o = run_on(
        "plotdata",
        &write(&dir, "s", &s),
        &["cluster-map", "--grid-cell", "0.05", "--phi-cells", "180"],
    );
    let rows = csv_rows(&o);
    assert!(rows.len() > 100);
    for r in &rows {
        let (x, y): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        let d = ((x - b.x).powi(2) + (y - b.y).powi(2)).sqrt();
        assert!((d - radius).abs() < 0.5, "{d} vs {radius}");
    }
}

#[test]
fn plotdata_solutions_csv() {
    let dir = TempDir::new().unwrap();
    let rows = csv_rows(&run_on("plotdata", &write(&dir, "s", &fixture("2+1")), &["solutions"]));
    assert_eq!(rows.len(), 4);
}

#[test]
fn simulate_fills_points_and_ranges() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(
        &p,
        r#"{"anchors":[{"id":1,"x":0,"y":0},{"id":2,"x":4,"y":3}],
            "schedule":[1,2,1,2],
            "controls":[{"v":1,"omega":0,"duration":2},{"v":1,"omega":0.5,"duration":2}],
            "sample_times":[0.5,1.5,2.5,3.5]}"#,
    )
    .unwrap();
    let out = dir.path().join("o.json");
    let o = run(&[
        "simulate",
        p.to_str().unwrap(),
        "--truth",
        "1,-1,0.3",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["points_v"].as_array().unwrap().len(), 4);
    assert_eq!(v["rho"].as_array().unwrap().len(), 4);
    assert_eq!(v["points_v"][0]["x"], 0.5);
    // the simulated scenario localizes back to the truth
    let o = run_on("localize", &out, &[]);
    let t = &json(&o)["solutions"]["solutions"][0]["transform"];
    assert!((t["dx"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn thread_cap_from_env() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s", &fixture("2+2"));
    let o = Command::new(env!("CARGO_BIN_EXE_constructa"))
        .env("CONSTRUCTA_THREADS", "1")
        .args(["localize", p.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
