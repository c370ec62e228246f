//! HTTP interface to the review queue, the lexicon and the acquisition
//! pipeline. All bodies are JSON; errors are `{"error", "message"}`.

pub mod wire;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lexforge::lexicon::{Pos, SenseId};
use lexforge::pipeline::{rule_surface, AcquisitionReport, Pipeline, PipelineError};
use lexforge::review::{Decision, QueueFilter, ReviewError, ReviewStatus};
use lexforge::rules::{apply_rule, RuleError};
use lexforge::validator::Status;
use tower_http::services::ServeDir;

use wire::*;

const DEFAULT_LIMIT: usize = 50;
const MAX_LIMIT: usize = 500;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.code.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let msg = e.to_string();
        match e {
            ReviewError::UnknownCandidate(_) => Self::new(StatusCode::NOT_FOUND, "unknown_candidate", msg),
            ReviewError::VersionConflict { .. } => Self::new(StatusCode::CONFLICT, "version_conflict", msg),
            ReviewError::NotPending(_) => Self::new(StatusCode::CONFLICT, "not_pending", msg),
            ReviewError::InvalidEdit(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit", msg),
            ReviewError::BadCursor(_) => Self::new(StatusCode::BAD_REQUEST, "bad_cursor", msg),
            ReviewError::Store(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store", msg),
        }
    }
}

impl From<RuleError> for ApiError {
    fn from(e: RuleError) -> Self {
        let msg = e.to_string();
        match e {
            RuleError::UnknownRule(_) => Self::new(StatusCode::NOT_FOUND, "unknown_rule", msg),
            RuleError::Blocked { .. } => Self::new(StatusCode::CONFLICT, "blocked", msg),
            RuleError::NotTriggered { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "not_triggered", msg),
            _ => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "rule_failed", msg),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Rule(r) => r.into(),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "pipeline", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Routes over a shared pipeline. Static files under `assets` (the review
/// front end) are served for any path not matched by the API.
pub fn router(pipeline: Arc<Pipeline>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/queue", get(queue))
        .route("/candidates/{id}", get(candidate))
        .route("/candidates/{id}/decision", post(decide))
        .route("/entries", get(entries_by_form))
        .route("/entries/{sense_id}", get(entry))
        .route("/lookup/{surface}", get(lookup))
        .route("/preview", post(preview))
        .route("/acquire", post(acquire))
        .with_state(pipeline);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, router: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router).await
}

fn parse_opt<T: std::str::FromStr>(name: &str, v: Option<&str>) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    v.filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| ApiError::bad_request(format!("{name}: {e}"))))
        .transpose()
}

async fn queue(State(p): State<Arc<Pipeline>>, Query(q): Query<QueueQuery>) -> ApiResult<QueuePage> {
    let filter = QueueFilter {
        status: parse_opt::<ReviewStatus>("status", q.status.as_deref())?,
        validation: parse_opt::<Status>("validation", q.validation.as_deref())?,
        pos: parse_opt::<Pos>("pos", q.pos.as_deref())?,
        rule: q.rule.filter(|r| !r.is_empty()),
    };
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT);
    if limit == 0 || limit > MAX_LIMIT {
        return Err(ApiError::bad_request(format!("limit must be between 1 and {MAX_LIMIT}")));
    }
    let page = p.desk().list(&filter, q.cursor.as_deref().filter(|c| !c.is_empty()), limit)?;
    Ok(Json(QueuePage::from(&page)))
}

async fn candidate(State(p): State<Arc<Pipeline>>, Path(id): Path<String>) -> ApiResult<ItemView> {
    let item = p.desk().get(&id).ok_or(ReviewError::UnknownCandidate(id))?;
    Ok(Json(ItemView::from(&item)))
}

async fn decide(
    State(p): State<Arc<Pipeline>>,
    Path(id): Path<String>,
    Json(req): Json<DecisionRequest>,
) -> ApiResult<ItemView> {
    let decision = match (req.decision, req.edit) {
        (DecisionKind::Approve, _) => Decision::Approve,
        (DecisionKind::Reject, _) => Decision::Reject,
        (DecisionKind::Modify, Some(edit)) => Decision::Modify(edit),
        (DecisionKind::Modify, None) => {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit", "modify requires `edit`"))
        }
    };
    let done = tokio::task::spawn_blocking(move || p.desk().decide(&id, decision, req.expected_version))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(ItemView::from(&done)))
}

fn parse_sense(s: &str) -> Result<SenseId, ApiError> {
    s.parse::<SenseId>().map_err(|e| ApiError::bad_request(format!("sense id: {e}")))
}

async fn entry(State(p): State<Arc<Pipeline>>, Path(sense_id): Path<String>) -> ApiResult<EntryView> {
    let id = parse_sense(&sense_id)?;
    let snap = p.lexicon().snapshot();
    let e = snap.entry(&id).ok_or_else(|| ApiError::not_found(format!("no entry `{sense_id}`")))?;
    Ok(Json(EntryView::from(e)))
}

#[derive(serde::Deserialize)]
struct FormQuery {
    form: String,
}

async fn entries_by_form(State(p): State<Arc<Pipeline>>, Query(q): Query<FormQuery>) -> ApiResult<Vec<EntryView>> {
    let snap = p.lexicon().snapshot();
    Ok(Json(snap.lookup_form(&q.form).into_iter().map(EntryView::from).collect()))
}

/// Stored entries for the surface, or ephemeral derivations when none are
/// stored.
async fn lookup(State(p): State<Arc<Pipeline>>, Path(surface): Path<String>) -> ApiResult<Vec<EntryView>> {
    let found = tokio::task::spawn_blocking(move || p.runtime_lookup(&surface))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(Json(found.iter().map(EntryView::from).collect()))
}

/// Applies one rule to a stored sense without persisting anything.
async fn preview(State(p): State<Arc<Pipeline>>, Json(req): Json<PreviewRequest>) -> ApiResult<PreviewResponse> {
    let source_id = parse_sense(&req.sense_id)?;
    let snap = p.lexicon().snapshot();
    let source =
        snap.entry(&source_id).ok_or_else(|| ApiError::not_found(format!("no entry `{}`", req.sense_id)))?;
    let rule = p.bank().rules.resolve(&req.rule_id).ok_or_else(|| RuleError::UnknownRule(req.rule_id.clone()))?;
    let surface = match req.surface {
        Some(s) => s,
        None => rule_surface(&snap, p.bank(), &source_id, rule, p.settings().depth)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "morphology", e.to_string()))?
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "no_surface",
                    format!("no form of {source_id} carries {}", req.rule_id),
                )
            })?,
    };
    let mut alloc = snap.allocator();
    let e = apply_rule(rule, source, &surface, &snap, &mut alloc, &p.settings().now())?;
    Ok(Json(PreviewResponse { surface, entry: EntryView::from(&e) }))
}

async fn acquire(State(p): State<Arc<Pipeline>>, Json(req): Json<AcquireRequest>) -> ApiResult<AcquisitionReport> {
    let report = tokio::task::spawn_blocking(move || {
        let auto = req.auto_admit.unwrap_or(p.settings().auto_admit_accepted);
        p.acquire_with(&req.verbs, auto).map(|(r, _)| r)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(report))
}
