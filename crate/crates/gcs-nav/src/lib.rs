//! Session-based HTTP service for stepping through the solution instances of a problem.
//!
//! Each session holds a parsed problem, its construction plan and a solution tree with the
//! current root choices. Flipping a step re-executes only the plan suffix from that step and
//! answers with the coordinates that changed.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;
use uuid::Uuid;

use gcs_core::construct::{residuals, Failure, Placement};
use gcs_core::geom::Pose;
use gcs_core::planner::PlanOptions;
use gcs_core::roots::{enumerate, heuristic_signs, SolutionTree};
use gcs_core::svg::{render_svg, SvgOptions};
use gcs_core::{parse_problem, plan_problem, ConstructionPlan, GcsProblem, OrientationPredicate, SignVector};

/// Solution JSON shared by the service and the command line: root choices, feasibility,
/// element poses in problem order and constraint residuals.
pub fn placement_json(plan: &ConstructionPlan, problem: &GcsProblem, outcome: &Result<Placement, Failure>) -> Value {
    let (placement, failure) = match outcome {
        Ok(p) => (p, None),
        Err(f) => (&f.partial, Some(&f.error)),
    };
    let poses: Vec<Value> = problem
        .elements
        .iter()
        .zip(&placement.poses)
        .filter_map(|(e, p)| p.map(|p| json!({ "id": e.id, "pose": p })))
        .collect();
    let mut out = json!({
        "signs": placement.signs.format_for(plan),
        "feasible": failure.is_none(),
        "poses": poses,
    });
    if let Some(err) = failure {
        out["step"] = json!(err.step());
        out["message"] = json!(err.to_string());
    } else {
        let res: Vec<Value> = residuals(problem, &placement.poses)
            .into_iter()
            .map(|r| json!({ "constraint": r.constraint, "absolute": r.absolute, "normalized": r.normalized }))
            .collect();
        out["residuals"] = json!(res);
    }
    out
}

/// Listing of the plan steps with more than one root, with the current choice of each.
pub fn step_summary(plan: &ConstructionPlan, signs: &SignVector) -> Vec<Value> {
    plan.multi_root_steps()
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let s = &plan.steps[k];
            let outputs: Vec<&str> = s.outputs.iter().map(|&v| plan.element_ids[v].as_str()).collect();
            json!({ "step": k, "name": s.name(), "outputs": outputs, "multiplicity": s.multiplicity, "choice": signs.0[slot] })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct NavConfig {
    /// Sessions untouched for this long are dropped.
    pub idle_timeout: Duration,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig { idle_timeout: Duration::from_secs(30 * 60) }
    }
}

struct Session {
    tree: SolutionTree,
    predicates: Vec<OrientationPredicate>,
    last_used: Instant,
}

type Shared = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<Uuid, Shared>>>,
    config: NavConfig,
}

impl AppState {
    pub fn new(config: NavConfig) -> AppState {
        AppState { sessions: Arc::new(RwLock::new(HashMap::new())), config }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    /// Drop sessions idle past the timeout. Sessions busy with a request are kept.
    pub fn evict_idle(&self) {
        let limit = self.config.idle_timeout;
        self.sessions.write().unwrap().retain(|_, s| match s.try_lock() {
            Ok(g) => g.last_used.elapsed() < limit,
            Err(_) => true,
        });
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.evict_idle();
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::not_found(id))?;
        self.sessions.read().unwrap().get(&uuid).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

/// Error body `{code, message, step?}` with its HTTP status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, body: json!({ "code": code, "message": message.into() }) }
    }

    fn with(mut self, key: &str, v: Value) -> ApiError {
        self.body[key] = v;
        self
    }

    fn not_found(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Deserialize)]
struct CreateBody {
    /// Problem document in the text format or its JSON mirror.
    document: String,
    #[serde(default)]
    signs: Option<String>,
    /// Pick initial root choices by comparing against the sketch.
    #[serde(default)]
    heuristic: bool,
}

fn summary(id: &Uuid, s: &Session) -> Value {
    let tree = &s.tree;
    let mut out = json!({
        "id": id.to_string(),
        "steps": step_summary(tree.plan(), tree.signs()),
        "step_count": tree.plan().steps.len(),
        "signs": tree.signs().format_for(tree.plan()),
        "feasible": tree.outcome().is_ok(),
        "predicates": s.predicates,
    });
    if let Err(f) = tree.outcome() {
        out["step"] = json!(f.error.step());
    }
    out
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    if body.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_body", "request body is empty"));
    }
    serde_json::from_str(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

async fn create_session(State(app): State<AppState>, body: String) -> Result<Response, ApiError> {
    let req: CreateBody = parse_body(&body)?;
    let problem = parse_problem(&req.document).map_err(|e| {
        let err = ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string());
        match e.location() {
            Some((line, col)) => err.with("line", json!(line)).with("col", json!(col)),
            None => err,
        }
    })?;
    let plan = plan_problem(&problem, &PlanOptions::default())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_triangle_decomposable", e.to_string()))?;
    let signs = if let Some(s) = &req.signs {
        SignVector::parse(s).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_signs", e.to_string()))?
    } else if req.heuristic {
        heuristic_signs(&plan, &problem).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_signs", e.to_string()))?.signs
    } else {
        SignVector::first(&plan)
    };
    let predicates = problem.predicates.clone();
    let tree = SolutionTree::new(plan, problem, signs).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_signs", e.to_string()))?;
    let id = Uuid::new_v4();
    let session = Session { tree, predicates, last_used: Instant::now() };
    let body = summary(&id, &session);
    app.evict_idle();
    app.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let shared = app.get(&id)?;
    let mut s = shared.lock().await;
    s.last_used = Instant::now();
    Ok(Json(summary(&Uuid::parse_str(&id).unwrap(), &s)))
}

#[derive(Deserialize)]
struct FlipBody {
    step: usize,
}

fn poses_of(outcome: &Result<Placement, Failure>) -> &[Option<Pose>] {
    match outcome {
        Ok(p) => &p.poses,
        Err(f) => &f.partial.poses,
    }
}

async fn flip(State(app): State<AppState>, Path(id): Path<String>, body: String) -> Result<Json<Value>, ApiError> {
    let req: FlipBody = parse_body(&body)?;
    let shared = app.get(&id)?;
    let mut s = shared.lock().await;
    s.last_used = Instant::now();
    let plan_len = s.tree.plan().steps.len();
    if req.step >= plan_len {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_step", format!("step {} is outside the plan of {plan_len} steps", req.step)).with("step", json!(req.step)));
    }
    if s.tree.plan().steps[req.step].multiplicity < 2 {
        return Err(ApiError::new(StatusCode::CONFLICT, "single_root_step", format!("step {} has a single root", req.step)).with("step", json!(req.step)));
    }
    let before: Vec<Option<Pose>> = poses_of(s.tree.outcome()).to_vec();
    let had_full = s.tree.outcome().is_ok();
    s.tree.flip(req.step).map_err(|e| ApiError::new(StatusCode::CONFLICT, "bad_step", e.to_string()))?;
    let tree = &s.tree;
    let after = poses_of(tree.outcome());
    let ids = &tree.problem().elements;
    let mut changed = Vec::new();
    let mut removed = Vec::new();
    for (i, e) in ids.iter().enumerate() {
        let old = before.get(i).copied().flatten();
        let new = after.get(i).copied().flatten();
        match (old, new) {
            (_, Some(p)) if old != Some(p) => changed.push(json!({ "id": e.id, "pose": p })),
            (Some(_), None) => removed.push(json!(e.id)),
            _ => {}
        }
    }
    let mut out = json!({
        "signs": tree.signs().format_for(tree.plan()),
        "feasible": tree.outcome().is_ok(),
        "changed": changed,
        "removed": removed,
        "full": !had_full,
    });
    if let Err(f) = tree.outcome() {
        out["step"] = json!(f.error.step());
        out["message"] = json!(f.error.to_string());
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
struct SolutionQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn solution(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<SolutionQuery>) -> Result<Response, ApiError> {
    let shared = app.get(&id)?;
    let mut s = shared.lock().await;
    s.last_used = Instant::now();
    let tree = &s.tree;
    if let Err(f) = tree.outcome() {
        return Err(ApiError::new(StatusCode::CONFLICT, "infeasible", f.error.to_string())
            .with("step", json!(f.error.step()))
            .with("partial", placement_json(tree.plan(), tree.problem(), tree.outcome())));
    }
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(placement_json(tree.plan(), tree.problem(), tree.outcome())).into_response()),
        "svg" => {
            let svg = render_svg(poses_of(tree.outcome()), tree.problem(), &SvgOptions::default());
            Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
        }
        other => Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_format", format!("unknown format `{other}`"))),
    }
}

#[derive(Deserialize)]
struct PredicateBody {
    predicates: Vec<OrientationPredicate>,
}

async fn set_predicates(State(app): State<AppState>, Path(id): Path<String>, body: String) -> Result<Json<Value>, ApiError> {
    let req: PredicateBody = parse_body(&body)?;
    let shared = app.get(&id)?;
    let mut s = shared.lock().await;
    s.last_used = Instant::now();
    for p in &req.predicates {
        if let Some(bad) = p.element_ids().into_iter().find(|i| s.tree.problem().element_index(i).is_none()) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "unknown_element", format!("no element `{bad}`")));
        }
    }
    s.predicates = req.predicates;
    let holds = match s.tree.outcome() {
        Ok(p) => Some(s.predicates.iter().all(|q| q.holds(s.tree.problem(), &p.poses))),
        Err(_) => None,
    };
    Ok(Json(json!({ "count": s.predicates.len(), "current_satisfies": holds })))
}

#[derive(Deserialize)]
struct EnumerateQuery {
    #[serde(default)]
    limit: Option<usize>,
}

async fn enumerate_session(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<EnumerateQuery>) -> Result<Json<Value>, ApiError> {
    let shared = app.get(&id)?;
    let mut s = shared.lock().await;
    s.last_used = Instant::now();
    let tree = &s.tree;
    let e = enumerate(tree.plan(), tree.problem(), q.limit.unwrap_or(64), &s.predicates);
    let placements: Vec<Value> = e.placements.into_iter().map(|p| placement_json(tree.plan(), tree.problem(), &Ok(p))).collect();
    Ok(Json(json!({ "placements": placements, "exhausted": e.exhausted, "counters": e.counters })))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/flip", post(flip))
        .route("/sessions/{id}/solution", get(solution))
        .route("/sessions/{id}/predicates", post(set_predicates))
        .route("/sessions/{id}/enumerate", get(enumerate_session))
        .with_state(state)
}

/// Serve on an already bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, config: NavConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_idle();
        }
    });
    axum::serve(listener, router(state)).await
}

pub async fn serve(addr: std::net::SocketAddr, config: NavConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, config).await
}
