use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use matteforge::imaging::BoundingBox;
use matteforge::io::decode_image;
use matteforge::multires::{generate_candidates, CandidateRecord, CandidateSet};
use matteforge::pipeline::{finish_from_candidates, segment_image, PipelineResult};

use crate::error::ApiError;
use crate::state::{build_revision, candidate_rasters, AppState, Revision, Session, SessionSlot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRequest {
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Urls {
    pub mask: String,
    pub matte: String,
    pub trimap: String,
    pub pre_refine: String,
    /// Keyed by factor; skipped candidates have no preview.
    pub candidates: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub session_id: String,
    pub revision: u32,
    pub bbox: BoundingBox,
    pub selected_factor: usize,
    pub candidates: Vec<CandidateRecord>,
    pub urls: Urls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
    pub latest: Option<SegmentResponse>,
}

#[derive(Debug, Deserialize)]
pub struct RasterQuery {
    pub kind: String,
    pub rev: Option<u32>,
}

fn raster_url(id: &str, kind: &str, rev: u32) -> String {
    format!("/v1/sessions/{id}/raster?kind={kind}&rev={rev}")
}

fn describe(id: &str, rev: &Revision) -> SegmentResponse {
    let candidates = rev
        .records
        .iter()
        .filter(|r| !r.skipped)
        .map(|r| (r.factor, raster_url(id, &format!("candidate-{}", r.factor), rev.number)))
        .collect();
    SegmentResponse {
        session_id: id.to_string(),
        revision: rev.number,
        bbox: rev.bbox,
        selected_factor: rev.selected_factor,
        candidates: rev.records.clone(),
        urls: Urls {
            mask: raster_url(id, "mask", rev.number),
            matte: raster_url(id, "matte", rev.number),
            trimap: raster_url(id, "trimap", rev.number),
            pre_refine: raster_url(id, "pre-refine", rev.number),
            candidates,
        },
    }
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
    state
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
}

/// Runs `f` on the blocking pool, giving up after `limit`.
async fn compute<T: Send + 'static>(limit: Duration, f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    match tokio::time::timeout(limit, tokio::task::spawn_blocking(f)).await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(ApiError::internal(format!("worker failed: {e}"))),
        Err(_) => Err(ApiError::new(
            StatusCode::GATEWAY_TIMEOUT,
            format!("computation exceeded {} s", limit.as_secs_f64()),
        )),
    }
}

fn store_revision(
    state: &AppState,
    session: &mut Session,
    bbox: BoundingBox,
    result: &PipelineResult,
    candidate_pngs: &BTreeMap<String, Arc<Vec<u8>>>,
) -> Result<SegmentResponse, ApiError> {
    let rev = build_revision(session.next_revision(), bbox, result, candidate_pngs)
        .map_err(|e| ApiError::internal(format!("encoding rasters: {e}")))?;
    let response = describe(&session.id, &rev);
    session.revisions.push(rev);
    state
        .persist(session)
        .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
    Ok(response)
}

pub async fn upload(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let limit = state.config.compute_timeout;
    let image = compute(limit, move || decode_image(&body))
        .await?
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("cannot decode image: {e}")))?;
    let created = Created {
        session_id: uuid::Uuid::new_v4().simple().to_string(),
        width: image.width(),
        height: image.height(),
    };
    let session = Session::new(created.session_id.clone(), image);
    state
        .persist(&session)
        .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
    state.insert(session);
    Ok((StatusCode::CREATED, Json(created)))
}

pub async fn info(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let slot = lookup(&state, &id)?;
    let session = slot.session.lock().await;
    Ok(Json(SessionInfo {
        session_id: session.id.clone(),
        width: session.image.width(),
        height: session.image.height(),
        latest: session.latest().map(|r| describe(&session.id, r)),
    }))
}

pub async fn segment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(bbox): Json<BoundingBox>,
) -> Result<Json<SegmentResponse>, ApiError> {
    let slot = lookup(&state, &id)?;
    let mut session = slot.session.lock().await;
    bbox.validate(session.image.width(), session.image.height())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;

    let image = session.image.clone();
    let cfg = state.config.pipeline.clone();
    let result = compute(state.config.compute_timeout, move || segment_image(&image, &bbox, &cfg, None)).await??;
    let pngs = candidate_rasters(&result.candidates).map_err(|e| ApiError::internal(e.to_string()))?;
    session.candidates = Some(Arc::new(result.candidates.clone()));
    Ok(Json(store_revision(&state, &mut session, bbox, &result, &pngs)?))
}

pub async fn override_factor(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<OverrideRequest>,
) -> Result<Json<SegmentResponse>, ApiError> {
    let slot = lookup(&state, &id)?;
    let mut session = slot.session.lock().await;
    let Some(latest) = session.latest() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "segment the session before overriding"));
    };
    let bbox = latest.bbox;
    let pngs: BTreeMap<String, Arc<Vec<u8>>> = latest
        .rasters
        .iter()
        .filter(|(k, _)| k.starts_with("candidate-"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    let candidates: Arc<CandidateSet> = match &session.candidates {
        Some(cs) => cs.clone(),
        None => {
            // reloaded from disk: candidate generation is deterministic, so
            // regenerating reproduces the stored table
            let image = session.image.clone();
            let cfg = state.config.pipeline.clone();
            let cs = compute(state.config.compute_timeout, move || {
                generate_candidates(&image, &bbox, &cfg.factors, &cfg.mean_shift, &cfg.figure_ground)
            })
            .await?
            .map_err(|e| ApiError::internal(e.to_string()))?;
            let cs = Arc::new(cs);
            session.candidates = Some(cs.clone());
            cs
        }
    };
    let Some(index) = candidates.index_of_factor(req.factor) else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("no candidate at factor {}", req.factor),
        ));
    };
    if candidates.candidates[index].is_skipped() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("candidate at factor {} was skipped", req.factor),
        ));
    }

    let image = session.image.clone();
    let cfg = state.config.pipeline.clone();
    let cs = candidates.clone();
    let result = compute(state.config.compute_timeout, move || {
        finish_from_candidates(&image, &bbox, &cs, Some(index), &cfg)
    })
    .await??;
    Ok(Json(store_revision(&state, &mut session, bbox, &result, &pngs)?))
}

pub async fn raster(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RasterQuery>,
) -> Result<Response, ApiError> {
    let slot = lookup(&state, &id)?;
    let session = slot.session.lock().await;
    let rev = match q.rev {
        Some(n) => session.revision(n),
        None => session.latest(),
    }
    .ok_or_else(|| ApiError::not_found("no such revision"))?;
    let bytes = rev
        .rasters
        .get(&q.kind)
        .ok_or_else(|| ApiError::not_found(format!("no raster {:?} in revision {}", q.kind, rev.number)))?;
    let cache = if q.rev.is_some() {
        "public, max-age=31536000, immutable"
    } else {
        "no-cache"
    };
    Ok((
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, cache)],
        bytes.as_ref().clone(),
    )
        .into_response())
}

pub async fn health() -> &'static str {
    "ok"
}
