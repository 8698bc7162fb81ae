//! HTTP API over a [`Store`].
//!
//! JSON in and out, except log uploads (CSV body). Errors are
//! `{"error": "..."}` with a status derived from the library error kind.
//! Writes take the store lock exclusively, so a response that follows an
//! ingest always sees the snapshot that ingest produced.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::RwLock;

use readtrace::advisor::Suggestion;
use readtrace::analysis::EvaluationStatus;
use readtrace::detector::{Issue, IssueStatus};
use readtrace::ingest::{CleanReport, CourseStructure};
use readtrace::report::{self, IndicatorGrid};
use readtrace::store::CourseRecord;
use readtrace::tasks::{NewTask, RevisionTask, TaskPatch};
use readtrace::{Error, Store};

pub type SharedStore = Arc<RwLock<Store>>;

/// A library error rendered as an HTTP response.
#[derive(Debug)]
pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) | Error::NoData => StatusCode::NOT_FOUND,
        Error::Conflict(_) => StatusCode::CONFLICT,
        Error::Validation(_)
        | Error::Outline(_)
        | Error::Format(_)
        | Error::Unattributable { .. }
        | Error::InsufficientData(_)
        | Error::DegenerateHistogram(_)
        | Error::Json(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Io { .. }
        | Error::Stream(_)
        | Error::ActorMismatch(_)
        | Error::UnmappedFlag { .. }
        | Error::Catalog(_)
        | Error::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::Validation(format!("request body: {e}"))))
}

/// Listing entry for one course.
#[derive(Debug, Serialize)]
pub struct CourseSummary<'a> {
    pub course_id: &'a str,
    pub element_count: usize,
    pub event_count: usize,
    pub watermark: Option<i64>,
    pub analyzed: bool,
    pub analysis_error: Option<&'a str>,
    pub open_issues: usize,
    pub task_count: usize,
}

impl<'a> CourseSummary<'a> {
    fn of(r: &'a CourseRecord) -> Self {
        CourseSummary {
            course_id: r.course_id(),
            element_count: r.course.len(),
            event_count: r.events.len(),
            watermark: r.watermark,
            analyzed: r.snapshot.is_some(),
            analysis_error: r.analysis_error.as_deref(),
            open_issues: r.snapshot.as_ref().map_or(0, |s| {
                s.issues.iter().filter(|i| i.status == IssueStatus::Open).count()
            }),
            task_count: r.tasks.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CourseView<'a> {
    #[serde(flatten)]
    summary: CourseSummary<'a>,
    outline: &'a CourseStructure,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatusChange {
    status: IssueStatus,
}

pub fn router(store: Store) -> Router {
    router_with(Arc::new(RwLock::new(store)))
}

pub fn router_with(store: SharedStore) -> Router {
    Router::new()
        .route("/api/courses", get(list_courses).post(register_course))
        .route("/api/courses/{id}", get(get_course))
        .route("/api/courses/{id}/logs", post(ingest_logs))
        .route("/api/courses/{id}/analyze", post(reanalyze))
        .route("/api/courses/{id}/indicators", get(get_indicators))
        .route("/api/courses/{id}/issues", get(get_issues))
        .route("/api/courses/{id}/suggestions", get(get_suggestions))
        .route("/api/courses/{id}/tasks", get(list_tasks).post(create_task))
        .route("/api/courses/{id}/report", get(get_report))
        .route("/api/courses/{id}/evaluation", get(get_evaluation))
        .route("/api/issues/{id}", patch(set_issue_status))
        .route("/api/tasks/{id}", patch(update_task).delete(delete_task))
        .with_state(store)
}

/// Serves `app` on an already bound listener until ctrl-c.
pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn list_courses(State(store): State<SharedStore>) -> Response {
    let store = store.read().await;
    let list: Vec<CourseSummary> = store.courses().map(CourseSummary::of).collect();
    Json(list).into_response()
}

async fn register_course(State(store): State<SharedStore>, body: Bytes) -> ApiResult<Response> {
    let course: CourseStructure = serde_json::from_slice(&body)
        .map_err(|e| ApiError(Error::Outline(e.to_string())))?;
    let mut store = store.write().await;
    let record = store.register(course)?;
    tracing::info!(course = record.course_id(), "registered");
    let view = CourseView { summary: CourseSummary::of(record), outline: &record.course };
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_course(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = store.read().await;
    let record = store.record(&id)?;
    let view = CourseView { summary: CourseSummary::of(record), outline: &record.course };
    Ok(Json(view).into_response())
}

async fn ingest_logs(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CleanReport>> {
    let mut store = store.write().await;
    let report = store.ingest(&id, &body[..])?;
    tracing::info!(course = %id, kept = report.rows_kept, dropped = report.dropped(), "ingested");
    Ok(Json(report))
}

async fn reanalyze(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult<Response> {
    let mut store = store.write().await;
    store.reanalyze(&id)?;
    Ok(Json(report::summary(store.record(&id)?)?).into_response())
}

async fn get_indicators(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
) -> ApiResult<Json<IndicatorGrid>> {
    let store = store.read().await;
    Ok(Json(report::indicator_grid(store.record(&id)?)))
}

async fn get_issues(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult<Json<Vec<Issue>>> {
    let store = store.read().await;
    let record = store.record(&id)?;
    Ok(Json(record.snapshot.as_ref().map(|s| s.issues.clone()).unwrap_or_default()))
}

async fn get_suggestions(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<Suggestion>>> {
    let store = store.read().await;
    let record = store.record(&id)?;
    Ok(Json(record.snapshot.as_ref().map(|s| s.suggestions.clone()).unwrap_or_default()))
}

async fn set_issue_status(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Issue>> {
    let change: StatusChange = parse_json(&body)?;
    let mut store = store.write().await;
    Ok(Json(store.set_issue_status(&id, change.status)?))
}

async fn list_tasks(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<RevisionTask>>> {
    let store = store.read().await;
    Ok(Json(store.tasks(&id)?.to_vec()))
}

async fn create_task(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: NewTask = parse_json(&body)?;
    let mut store = store.write().await;
    let task = store.create_task(&id, req)?;
    Ok((StatusCode::CREATED, Json(task)).into_response())
}

async fn update_task(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<RevisionTask>> {
    let patch: TaskPatch = parse_json(&body)?;
    let mut store = store.write().await;
    Ok(Json(store.update_task(&id, &patch)?))
}

async fn delete_task(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    store.write().await.delete_task(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

/// The same bytes `readtrace report --format json` prints.
async fn get_report(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = store.read().await;
    let body = report::render_json(store.record(&id)?)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn get_evaluation(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
) -> ApiResult<Json<EvaluationStatus>> {
    let store = store.read().await;
    let record = store.record(&id)?;
    match &record.snapshot {
        Some(s) => Ok(Json(s.evaluation.clone())),
        None => Err(match &record.analysis_error {
            Some(reason) => Error::InsufficientData(reason.clone()),
            None => Error::NoData,
        }
        .into()),
    }
}
