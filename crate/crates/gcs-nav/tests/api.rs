use std::time::Duration;

use gcs_nav::{serve_on, NavConfig};
use serde_json::{json, Value};

const TRUSS: &str = include_str!("../../../corpus/truss.gcs");
const K33: &str = include_str!("../../../corpus/k33.gcs");
const IMPOSSIBLE: &str = include_str!("../../../corpus/impossible_truss.gcs");

async fn start() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, NavConfig::default()));
    format!("http://{addr}")
}

async fn create(client: &reqwest::Client, base: &str, doc: &str) -> reqwest::Response {
    client.post(format!("{base}/sessions")).json(&json!({ "document": doc })).send().await.unwrap()
}

async fn session(client: &reqwest::Client, base: &str, doc: &str) -> (String, Value) {
    let r = create(client, base, doc).await;
    assert_eq!(r.status(), 201);
    let v: Value = r.json().await.unwrap();
    (v["id"].as_str().unwrap().to_string(), v)
}

async fn flip(client: &reqwest::Client, base: &str, id: &str, step: u64) -> reqwest::Response {
    client.post(format!("{base}/sessions/{id}/flip")).json(&json!({ "step": step })).send().await.unwrap()
}

async fn solution(client: &reqwest::Client, base: &str, id: &str, format: &str) -> reqwest::Response {
    client.get(format!("{base}/sessions/{id}/solution?format={format}")).send().await.unwrap()
}

#[tokio::test]
async fn create_lists_quadratic_steps() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (_, v) = session(&c, &base, TRUSS).await;
    assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    assert_eq!(v["signs"], "++");
    assert_eq!(v["feasible"], true);
}

#[tokio::test]
async fn create_errors() {
    let base = start().await;
    let c = reqwest::Client::new();
    let r = create(&c, &base, K33).await;
    assert_eq!(r.status(), 422);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["code"], "not_triangle_decomposable");
    let r = c.post(format!("{base}/sessions")).body("").send().await.unwrap();
    assert_eq!(r.status(), 400);
    let r = create(&c, &base, "gcs 1\npoint A\nbogus B\n").await;
    assert_eq!(r.status(), 400);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["line"], 3);
}

#[tokio::test]
async fn flip_twice_restores_placement() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (id, v) = session(&c, &base, TRUSS).await;
    let first: Value = solution(&c, &base, &id, "json").await.json().await.unwrap();
    let svg0 = solution(&c, &base, &id, "svg").await.text().await.unwrap();
    for step in v["steps"].as_array().unwrap() {
        let k = step["step"].as_u64().unwrap();
        let a: Value = flip(&c, &base, &id, k).await.json().await.unwrap();
        assert!(!a["changed"].as_array().unwrap().is_empty());
        let b: Value = flip(&c, &base, &id, k).await.json().await.unwrap();
        assert_eq!(b["signs"], "++");
    }
    let again: Value = solution(&c, &base, &id, "json").await.json().await.unwrap();
    assert_eq!(first["poses"], again["poses"]);
    let svg1 = solution(&c, &base, &id, "svg").await.text().await.unwrap();
    assert_eq!(svg0, svg1);
    assert!(svg0.starts_with("<svg"));
}

#[tokio::test]
async fn flip_first_quadratic_step_moves_suffix() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (id, v) = session(&c, &base, TRUSS).await;
    let k = v["steps"][0]["step"].as_u64().unwrap();
    let d: Value = flip(&c, &base, &id, k).await.json().await.unwrap();
    assert_eq!(d["signs"], "-+");
    // Both C and D move when the first quadratic step changes.
    assert_eq!(d["changed"].as_array().unwrap().len(), 2);
    let sol: Value = solution(&c, &base, &id, "json").await.json().await.unwrap();
    for r in sol["residuals"].as_array().unwrap() {
        assert!(r["normalized"].as_f64().unwrap() < 1e-8);
    }
}

#[tokio::test]
async fn flip_errors() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (id, _) = session(&c, &base, TRUSS).await;
    let r = flip(&c, &base, &id, 0).await;
    assert_eq!(r.status(), 409);
    let r = flip(&c, &base, &id, 99).await;
    assert_eq!(r.status(), 400);
    let r = flip(&c, &base, "00000000-0000-0000-0000-000000000000", 1).await;
    assert_eq!(r.status(), 404);
    let r = solution(&c, &base, "nope", "json").await;
    assert_eq!(r.status(), 404);
}

#[tokio::test]
async fn infeasible_session_reports_step() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (id, v) = session(&c, &base, IMPOSSIBLE).await;
    assert_eq!(v["feasible"], false);
    let r = solution(&c, &base, &id, "json").await;
    assert_eq!(r.status(), 409);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["code"], "infeasible");
    assert!(body["step"].as_u64().is_some());
    assert!(body["partial"]["poses"].as_array().is_some());
}

#[tokio::test]
async fn sessions_are_isolated() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (a, v) = session(&c, &base, TRUSS).await;
    let (b, _) = session(&c, &base, TRUSS).await;
    let k = v["steps"][1]["step"].as_u64().unwrap();
    flip(&c, &base, &a, k).await;
    let sa: Value = c.get(format!("{base}/sessions/{a}")).send().await.unwrap().json().await.unwrap();
    let sb: Value = c.get(format!("{base}/sessions/{b}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(sa["signs"], "+-");
    assert_eq!(sb["signs"], "++");
}

#[tokio::test]
async fn predicates_filter_enumeration() {
    let base = start().await;
    let c = reqwest::Client::new();
    let (id, _) = session(&c, &base, TRUSS).await;
    let all: Value = c.get(format!("{base}/sessions/{id}/enumerate?limit=10")).send().await.unwrap().json().await.unwrap();
    assert_eq!(all["placements"].as_array().unwrap().len(), 4);
    assert_eq!(all["exhausted"], true);
    let preds = json!({ "predicates": [{ "kind": "point_on_side", "point": "C", "from": "A", "to": "B", "side": "left" }] });
    let r = c.post(format!("{base}/sessions/{id}/predicates")).json(&preds).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let some: Value = c.get(format!("{base}/sessions/{id}/enumerate?limit=10")).send().await.unwrap().json().await.unwrap();
    assert_eq!(some["placements"].as_array().unwrap().len(), 2);
    let bad = json!({ "predicates": [{ "kind": "point_on_side", "point": "Z", "from": "A", "to": "B", "side": "left" }] });
    let r = c.post(format!("{base}/sessions/{id}/predicates")).json(&bad).send().await.unwrap();
    assert_eq!(r.status(), 400);
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(serve_on(listener, NavConfig { idle_timeout: Duration::from_millis(50) }));
    let c = reqwest::Client::new();
    let (id, _) = session(&c, &base, TRUSS).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let r = c.get(format!("{base}/sessions/{id}")).send().await.unwrap();
    assert_eq!(r.status(), 404);
}
