//! The `/v1` session API. JSON bodies throughout, except the report file
//! endpoint, which returns the speed report file verbatim.
//!
//! Mutating requests may carry an `x-request-id` header; a repeated id on
//! the same session (or, for session creation, on the service) returns the
//! stored reply without applying the request again.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smashspeed_core::calibration::{ScaleCalibration, VideoMeta};
use smashspeed_core::config::{CalibrationConfig, PipelineConfig};
use smashspeed_core::formats::{speed_report_to_jsonl, DetectionStream};
use smashspeed_core::geometry::PixelPoint;
use smashspeed_core::kinematics::SpeedReport;
use smashspeed_core::pipeline;
use smashspeed_core::session::{Correction, Session, SessionStatus};
use smashspeed_core::{Error, Result};

use crate::error_record;
use crate::store::{Reply, Store};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) | Error::CalibrationMissing => StatusCode::CONFLICT,
        Error::Parse { .. } => StatusCode::BAD_REQUEST,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        Error::InputContract(_)
        | Error::DegenerateCalibration
        | Error::InsufficientData { .. }
        | Error::Validation { .. }
        | Error::Config(_) => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_of(&self.0), axum::Json(error_record(&self.0))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn reply_response(r: Reply) -> Response {
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::OK);
    (status, axum::Json(r.body)).into_response()
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("request body: {e}"),
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response serializes")
}

fn request_id(headers: &HeaderMap) -> Option<String> {
    headers
        .get(REQUEST_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: SessionStatus,
    pub meta: VideoMeta,
    pub frame_count: u64,
    pub detection_count: usize,
    pub config: PipelineConfig,
    pub scale: Option<ScaleCalibration>,
    pub trajectory_points: Option<usize>,
    pub correction_count: usize,
    pub peak_speed_kmh: Option<f64>,
}

impl SessionView {
    pub fn of(s: &Session) -> Result<Self> {
        Ok(Self {
            id: s.id.clone(),
            status: s.status,
            meta: s.stream.header.meta()?,
            frame_count: s.stream.header.frame_count,
            detection_count: s.stream.detections.len(),
            config: s.config,
            scale: s.scale,
            trajectory_points: s.trajectory.as_ref().map(|t| t.points.len()),
            correction_count: s.corrections.len(),
            peak_speed_kmh: s.report.as_ref().map(|r| r.peak.speed_kmh),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    /// Detection stream file contents.
    stream: String,
    config: Option<PipelineConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchRequest {
    #[serde(default)]
    position: Option<PixelPoint>,
    #[serde(default)]
    delete: bool,
}

/// Reply to a trajectory edit: the logged correction and, once verified,
/// the recomputed report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditReply {
    pub correction: Correction,
    pub status: SessionStatus,
    pub trajectory_points: usize,
    pub report: Option<SpeedReport>,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/config", put(put_config))
        .route("/v1/sessions/{id}/calibration", put(put_calibration))
        .route("/v1/sessions/{id}/track", post(post_track))
        .route("/v1/sessions/{id}/trajectory", get(get_trajectory))
        .route(
            "/v1/sessions/{id}/trajectory/{frame}",
            patch(patch_point).delete(delete_point),
        )
        .route("/v1/sessions/{id}/verify", post(post_verify))
        .route("/v1/sessions/{id}/report", get(get_report))
        .route("/v1/sessions/{id}/report/file", get(get_report_file))
        .route("/v1/sessions/{id}/frames/{frame}", get(get_frame))
        .route("/v1/sessions/{id}/corrections", get(get_corrections))
        .fallback(|| async { ApiError(Error::NotFound("no such endpoint".into())) })
        .with_state(store)
}

async fn create_session(State(store): State<Arc<Store>>, headers: HeaderMap, bytes: Bytes) -> ApiResult<Response> {
    let rid = request_id(&headers);
    let reply = store
        .create_once(rid.as_deref(), || {
            let req: CreateRequest = body(&bytes)?;
            let stream = DetectionStream::parse(&req.stream)?;
            let config = req.config.unwrap_or(store.defaults);
            let session = Session::new(uuid::Uuid::new_v4().to_string(), stream, config)?;
            let view = SessionView::of(&session)?;
            store.insert(session)?;
            Ok(Reply {
                status: StatusCode::CREATED.as_u16(),
                body: to_value(&view),
            })
        })
        .await?;
    Ok(reply_response(reply))
}

/// Applies `f` to a copy of the session and commits it on success; repeated
/// request ids replay the stored reply.
async fn mutate<F>(store: &Store, id: &str, headers: &HeaderMap, f: F) -> ApiResult<Response>
where
    F: FnOnce(&mut Session) -> Result<Value>,
{
    let entry = store.get(id)?;
    let mut guard = entry.write().await;
    let rid = request_id(headers);
    if let Some(r) = rid.as_ref().and_then(|r| guard.replies.get(r)) {
        return Ok(reply_response(r.clone()));
    }
    let mut session = guard.session.clone();
    let value = f(&mut session)?;
    let reply = Reply {
        status: StatusCode::OK.as_u16(),
        body: value,
    };
    let mut next = guard.clone();
    next.session = session;
    if let Some(r) = rid {
        next.replies.insert(r, reply.clone());
    }
    store.persist(&next)?;
    *guard = next;
    Ok(reply_response(reply))
}

async fn get_session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = store.get(&id)?;
    let guard = entry.read().await;
    Ok(axum::Json(SessionView::of(&guard.session)?).into_response())
}

async fn put_config(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let config: PipelineConfig = body(&bytes)?;
    mutate(&store, &id, &headers, |s| {
        s.set_config(config)?;
        Ok(to_value(&SessionView::of(s)?))
    })
    .await
}

async fn put_calibration(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let cal: CalibrationConfig = body(&bytes)?;
    mutate(&store, &id, &headers, |s| {
        let scale = s.set_calibration(cal)?;
        Ok(json!({ "scale": scale, "status": s.status }))
    })
    .await
}

async fn post_track(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&store, &id, &headers, |s| {
        let trajectory = to_value(s.track()?);
        Ok(json!({ "status": s.status, "trajectory": trajectory }))
    })
    .await
}

async fn get_trajectory(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = store.get(&id)?;
    let guard = entry.read().await;
    Ok(axum::Json(guard.session.trajectory()?).into_response())
}

fn edit_reply(s: &Session, correction: Correction) -> Result<Value> {
    let trajectory = s.trajectory()?;
    let report = if s.status >= SessionStatus::Verified {
        pipeline::report(trajectory, &s.config).ok()
    } else {
        None
    };
    Ok(to_value(&EditReply {
        correction,
        status: s.status,
        trajectory_points: trajectory.points.len(),
        report,
    }))
}

async fn patch_point(
    State(store): State<Arc<Store>>,
    Path((id, frame)): Path<(String, u64)>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: PatchRequest = body(&bytes)?;
    mutate(&store, &id, &headers, |s| {
        let c = match (req.position, req.delete) {
            (Some(to), false) => *s.move_point(frame, to, now_ms())?,
            (None, true) => *s.delete_point(frame, now_ms())?,
            _ => {
                return Err(Error::Validation {
                    line: 0,
                    message: "patch needs exactly one of `position` or `delete: true`".into(),
                })
            }
        };
        edit_reply(s, c)
    })
    .await
}

async fn delete_point(
    State(store): State<Arc<Store>>,
    Path((id, frame)): Path<(String, u64)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&store, &id, &headers, |s| {
        let c = *s.delete_point(frame, now_ms())?;
        edit_reply(s, c)
    })
    .await
}

async fn post_verify(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&store, &id, &headers, |s| Ok(json!({ "status": s.verify()? }))).await
}

/// Computes or fetches the cached report, persisting the status change.
async fn current_report(store: &Store, id: &str) -> Result<SpeedReport> {
    let entry = store.get(id)?;
    let mut guard = entry.write().await;
    if let (SessionStatus::Reported, Some(r)) = (guard.session.status, &guard.session.report) {
        return Ok(r.clone());
    }
    let mut next = guard.clone();
    let report = next.session.report()?.clone();
    store.persist(&next)?;
    *guard = next;
    Ok(report)
}

async fn get_report(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(axum::Json(current_report(&store, &id).await?).into_response())
}

async fn get_report_file(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let report = current_report(&store, &id).await?;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        speed_report_to_jsonl(&report),
    )
        .into_response())
}

async fn get_frame(State(store): State<Arc<Store>>, Path((id, frame)): Path<(String, u64)>) -> ApiResult<Response> {
    let entry = store.get(&id)?;
    let guard = entry.read().await;
    Ok(axum::Json(guard.session.frame_context(frame)?).into_response())
}

async fn get_corrections(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = store.get(&id)?;
    let guard = entry.read().await;
    Ok(axum::Json(json!({ "corrections": guard.session.corrections })).into_response())
}

pub async fn serve(store: Arc<Store>, host: &str, port: u16) -> Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_statuses() {
        assert_eq!(status_of(&Error::NotFound("x".into())), StatusCode::NOT_FOUND);
        assert_eq!(status_of(&Error::CalibrationMissing), StatusCode::CONFLICT);
        assert_eq!(status_of(&Error::Conflict("x".into())), StatusCode::CONFLICT);
        assert_eq!(
            status_of(&Error::DegenerateCalibration),
            StatusCode::UNPROCESSABLE_ENTITY
        );
        assert_eq!(
            status_of(&Error::Parse {
                line: 1,
                message: String::new()
            }),
            StatusCode::BAD_REQUEST
        );
    }

    #[test]
    fn patch_body_shapes() {
        let p: PatchRequest = body(br#"{"position":{"x":1.0,"y":2.0}}"#).unwrap();
        assert_eq!(p.position, Some(PixelPoint::new(1.0, 2.0)));
        let d: PatchRequest = body(br#"{"delete":true}"#).unwrap();
        assert!(d.delete && d.position.is_none());
        assert!(body::<PatchRequest>(br#"{"move":1}"#).is_err());
    }
}
