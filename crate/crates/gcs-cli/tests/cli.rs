use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn gcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcs")).args(args).output().unwrap()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = gcs(args);
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

fn path(name: &str) -> String {
    corpus(name).to_string_lossy().into_owned()
}

/// File, `analyze` exit code, `plan` exit code, `solve` exit code.
const CONTRACT: &[(&str, i32, i32, i32)] = &[
    ("apollonius.gcs", 0, 0, 0),
    ("arc_slot.gcs", 0, 0, 0),
    ("chain12.gcs", 0, 0, 0),
    ("circumcircle.gcs", 0, 0, 0),
    ("crankshaft.gcs", 0, 0, 0),
    ("crankshaft_angle.gcs", 0, 0, 0),
    ("impossible_truss.gcs", 0, 0, 5),
    ("incircle.gcs", 0, 0, 0),
    ("k33.gcs", 0, 4, 4),
    ("k4_over.gcs", 3, 4, 4),
    ("open_frame.gcs", 2, 4, 4),
    ("overlap_k4.gcs", 3, 4, 4),
    ("perspective.gcs", 0, 0, 0),
    ("point_line.gcs", 0, 0, 0),
    ("quad_lines.gcs", 0, 0, 0),
    ("quadrilateral.gcs", 0, 0, 0),
    ("square_flex.gcs", 2, 4, 4),
    ("tangent_lines.gcs", 0, 0, 0),
    ("three_trusses.gcs", 0, 0, 5),
    ("triangle.gcs", 0, 0, 0),
    ("triangle_linkage.gcs", 0, 0, 0),
    ("truss.gcs", 0, 0, 0),
    ("truss_predicates.gcs", 0, 0, 0),
    ("varcircle_merge.gcs", 0, 0, 0),
];

#[test]
fn exit_codes_over_corpus() {
    let listed: Vec<&str> = CONTRACT.iter().map(|c| c.0).collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(corpus(""))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".gcs"))
        .collect();
    on_disk.sort();
    assert_eq!(on_disk, listed, "every corpus file has a contract row");
    assert!(listed.len() >= 20);
    for &(file, analyze, plan, solve) in CONTRACT {
        let p = path(file);
        assert_eq!(run(&["analyze", &p]).0, analyze, "analyze {file}");
        assert_eq!(run(&["plan", &p]).0, plan, "plan {file}");
        assert_eq!(run(&["solve", &p]).0, solve, "solve {file}");
    }
}

#[test]
fn k33_messages() {
    let (code, out, _) = run(&["analyze", &path("k33.gcs")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("well-constrained, deficit 3"), "{out}");
    let (code, out, _) = run(&["plan", &path("k33.gcs")]);
    assert_eq!(code, 4);
    assert!(out.contains("not triangle-decomposable"));
}

#[test]
fn witness_reported_for_overlap() {
    let (code, out, _) = run(&["analyze", &path("overlap_k4.gcs")]);
    assert_eq!(code, 3);
    assert!(out.contains("witness: v1 v2 v3 v4 (deficit 2)"), "{out}");
}

#[test]
fn io_and_parse_failures_exit_one() {
    let (code, _, err) = run(&["--json", "analyze", "/nonexistent/x.gcs"]);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "io");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gcs");
    std::fs::write(&bad, "gcs 1\npoint A\nconstraint distance d A Q 1\n").unwrap();
    let (code, _, err) = run(&["--json", "plan", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "parse");
    assert_eq!(v["line"], 3);
    assert_eq!(run(&["frobnicate"]).0, 1);
}

#[test]
fn solve_matches_first_enumerated() {
    let (code, out, _) = run(&["--json", "solve", &path("truss.gcs"), "--signs", "++"]);
    assert_eq!(code, 0);
    let solved: Value = serde_json::from_str(&out).unwrap();
    for r in solved["residuals"].as_array().unwrap() {
        assert!(r["absolute"].as_f64().unwrap() < 1e-8);
    }
    let (_, out, _) = run(&["--json", "enumerate", &path("truss.gcs")]);
    let all: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(all["placements"][0]["poses"], solved["poses"]);
    assert_eq!(all["placements"].as_array().unwrap().len(), 4);
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["plan", "three_trusses.gcs"],
        vec!["enumerate", "truss.gcs"],
        vec!["solve", "apollonius.gcs", "--signs", "+a"],
        vec!["cayley", "triangle_linkage.gcs", "--resolution", "64"],
        vec!["complete", "open_frame.gcs"],
    ] {
        let full: Vec<String> = args.iter().map(|a| if a.ends_with(".gcs") { path(a) } else { a.to_string() }).collect();
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let a = gcs(&refs);
        let b = gcs(&refs);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn svg_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("truss.svg");
    let (code, _, _) = run(&["solve", &path("truss.gcs"), "--signs", "+-", "--svg", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(out).unwrap();
    assert_eq!(svg.matches("<circle").count(), 4);
}

#[test]
fn heuristic_reproduces_sketch() {
    let (code, out, _) = run(&["--json", "solve", &path("truss.gcs"), "--heuristic"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    // The sketch has D away from A, above BC.
    let d = &v["poses"][3]["pose"]["p"];
    assert!((d[0].as_f64().unwrap() - 1.5).abs() < 1e-9);
}

#[test]
fn completion_commands() {
    let (code, out, _) = run(&["complete", &path("open_frame.gcs"), "--pool", &path("open_frame.pool")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("conditional completion: 4 pair(s)"), "{out}");
    let doc = out.split("\n\n").nth(1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("done.gcs");
    std::fs::write(&f, doc).unwrap();
    assert_eq!(run(&["analyze", f.to_str().unwrap()]).0, 0);
    assert_eq!(run(&["plan", f.to_str().unwrap()]).0, 0);

    let pool = dir.path().join("small.pool");
    std::fs::write(&pool, "A G\n").unwrap();
    let (code, out, _) = run(&["complete", &path("open_frame.gcs"), "--pool", pool.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("pool exhausted"), "{out}");
}

#[test]
fn cayley_and_reach() {
    let (code, out, _) = run(&["--json", "cayley", &path("triangle_linkage.gcs")]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    for o in v["orientations"].as_array().unwrap() {
        let iv = &o["intervals"][0];
        assert!((iv["lo"].as_f64().unwrap() - 2.0).abs() < 1e-8);
        assert!((iv["hi"].as_f64().unwrap() - 8.0).abs() < 1e-8);
    }
    let (code, out, _) = run(&["reach", &path("triangle_linkage.gcs"), "--start", "+@4", "--end", "-@4"]);
    assert_eq!(code, 0);
    assert!(out.contains("switch at 2.0000000000"), "{out}");
    let (code, out, _) = run(&["reach", &path("crankshaft.gcs"), "--start", "+++@1", "--end", "+-+@8"]);
    assert_eq!(code, 6);
    assert_eq!(out, "unreachable\n");
    let (code, _, _) = run(&["reach", &path("crankshaft.gcs"), "--start", "+++@5", "--end", "+-+@8"]);
    assert_eq!(code, 1);
}

/// The service and `solve --json` print the same coordinates for the same root choices.
#[tokio::test]
async fn service_agrees_with_solve() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_gcs"))
        .args(["serve", "--port", &port.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let base = format!("http://127.0.0.1:{port}");
    let client = reqwest::Client::new();
    let start = Instant::now();
    let created = loop {
        let doc = std::fs::read_to_string(corpus("apollonius.gcs")).unwrap();
        match client.post(format!("{base}/sessions")).json(&serde_json::json!({ "document": doc, "signs": "-c" })).send().await {
            Ok(r) => break r.json::<Value>().await.unwrap(),
            Err(_) if start.elapsed() < Duration::from_secs(10) => tokio::time::sleep(Duration::from_millis(50)).await,
            Err(e) => panic!("service did not start: {e}"),
        }
    };
    let id = created["id"].as_str().unwrap();
    let api: Value = client.get(format!("{base}/sessions/{id}/solution?format=json")).send().await.unwrap().json().await.unwrap();
    let svg = client.get(format!("{base}/sessions/{id}/solution?format=svg")).send().await.unwrap().text().await.unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let (_, out, _) = run(&["--json", "solve", &path("apollonius.gcs"), "--signs", "-c"]);
    let cli: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(api, cli);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a.svg");
    run(&["solve", &path("apollonius.gcs"), "--signs", "-c", "--svg", f.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(f).unwrap(), svg);
}
