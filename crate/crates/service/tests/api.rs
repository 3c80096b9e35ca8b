use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use matteforge::fixtures::{disk_on_texture, sparse_blocks};
use matteforge::imaging::Image;
use matteforge::io::{decode_image, encode_rgb_png};
use matteforge_service::handlers::{Created, SegmentResponse};
use matteforge_service::{router, AppState, ServiceConfig};

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json<T: serde::de::DeserializeOwned>(&self) -> T {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    Reply { status, headers, body }
}

async fn post_json(app: &Router, uri: &str, v: Value) -> Reply {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(v.to_string()))
        .unwrap();
    call(app, req).await
}

async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn upload(app: &Router, img: &Image) -> Created {
    let req = Request::post("/v1/sessions")
        .body(Body::from(encode_rgb_png(img).unwrap()))
        .unwrap();
    let r = call(app, req).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()
}

fn disk_app() -> (Router, matteforge::fixtures::DiskSample) {
    (router(AppState::new(ServiceConfig::default())), disk_on_texture(120, 3))
}

fn bbox_json(b: matteforge::imaging::BoundingBox) -> Value {
    json!({"x": b.x, "y": b.y, "w": b.w, "h": b.h})
}

#[tokio::test]
async fn upload_reports_dimensions_and_rejects_bad_bodies() {
    let app = router(AppState::new(ServiceConfig::default()));
    let img = Image::filled(30, 20, [0.2, 0.4, 0.6]).unwrap();
    let created = upload(&app, &img).await;
    assert_eq!((created.width, created.height), (30, 20));
    let info: Value = get(&app, &format!("/v1/sessions/{}", created.session_id)).await.json();
    assert_eq!(info["latest"], Value::Null);

    let r = call(&app, Request::post("/v1/sessions").body(Body::from("not an image")).unwrap()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let big = vec![0u8; 25 * 1024 * 1024];
    let r = call(&app, Request::post("/v1/sessions").body(Body::from(big)).unwrap()).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn segment_override_and_rasters() {
    let (app, sample) = disk_app();
    let id = upload(&app, &sample.image).await.session_id;
    let base = format!("/v1/sessions/{id}");

    let r = post_json(&app, &format!("{base}/override"), json!({"factor": 4})).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = post_json(&app, &format!("{base}/segment"), json!({"x": 0, "y": 0, "w": 120, "h": 120})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = post_json(&app, "/v1/sessions/nope/segment", bbox_json(sample.bbox)).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = post_json(&app, &format!("{base}/segment"), bbox_json(sample.bbox)).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let first: SegmentResponse = r.json();
    assert_eq!(first.revision, 1);
    assert_eq!(first.candidates.len(), 5);
    assert_eq!(first.candidates.iter().filter(|c| c.selected).count(), 1);
    let auto = first.selected_factor;

    let mask1 = get(&app, &first.urls.mask).await;
    assert_eq!(mask1.status, StatusCode::OK);
    assert_eq!(mask1.headers["content-type"], "image/png");
    assert!(mask1.headers["cache-control"].to_str().unwrap().contains("immutable"));
    assert_eq!(get(&app, &first.urls.mask).await.body, mask1.body);

    let trimap = decode_image(&get(&app, &first.urls.trimap).await.body).unwrap();
    for p in trimap.pixels() {
        let v = (p[0] * 255.0).round() as u32;
        assert!(v == 0 || v == 128 || v == 255, "trimap value {v}");
    }
    for url in first.urls.candidates.values() {
        assert_eq!(get(&app, url).await.status, StatusCode::OK);
    }

    let other = first
        .candidates
        .iter()
        .find(|c| !c.skipped && c.factor != auto)
        .expect("a second viable candidate")
        .factor;
    let r = post_json(&app, &format!("{base}/override"), json!({"factor": other})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let second: SegmentResponse = r.json();
    assert_eq!(second.revision, 2);
    assert_eq!(second.selected_factor, other);
    let strip = |v: &SegmentResponse| {
        v.candidates
            .iter()
            .map(|c| (c.factor, c.patch_count, c.score, c.skipped))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&first), strip(&second));

    // revision 1 is unchanged by the override
    assert_eq!(get(&app, &first.urls.mask).await.body, mask1.body);

    let r = post_json(&app, &format!("{base}/override"), json!({"factor": auto})).await;
    let third: SegmentResponse = r.json();
    assert_eq!(third.revision, 3);
    for kind in ["mask", "matte", "trimap", "pre-refine"] {
        let a = get(&app, &format!("{base}/raster?kind={kind}&rev=1")).await.body;
        let b = get(&app, &format!("{base}/raster?kind={kind}&rev=3")).await.body;
        assert_eq!(a, b, "{kind}");
    }
    let latest = get(&app, &format!("{base}/raster?kind=mask")).await;
    assert_eq!(latest.headers["cache-control"], "no-cache");

    let r = post_json(&app, &format!("{base}/override"), json!({"factor": 7})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&app, &format!("{base}/raster?kind=mask&rev=9")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, &format!("{base}/raster?kind=bogus&rev=1")).await.status, StatusCode::NOT_FOUND);

    let info: Value = get(&app, &base).await.json();
    assert_eq!(info["latest"]["revision"], 3);
}

#[tokio::test]
async fn skipped_candidates_have_no_preview_and_cannot_be_selected() {
    let app = router(AppState::new(ServiceConfig::default()));
    let id = upload(&app, &sparse_blocks(400, 44)).await.session_id;
    let base = format!("/v1/sessions/{id}");
    let r = post_json(&app, &format!("{base}/segment"), json!({"x": 90, "y": 90, "w": 220, "h": 220})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let seg: SegmentResponse = r.json();
    let skipped: Vec<usize> = seg.candidates.iter().filter(|c| c.skipped).map(|c| c.factor).collect();
    assert_eq!(skipped, vec![10]);
    assert!(!seg.urls.candidates.contains_key(&10));
    let r = get(&app, &format!("{base}/raster?kind=candidate-10&rev=1")).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = post_json(&app, &format!("{base}/override"), json!({"factor": 10})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let state = AppState::new(ServiceConfig {
        session_ttl: Duration::from_secs(60),
        ..ServiceConfig::default()
    });
    let app = router(state.clone());
    let id = upload(&app, &Image::filled(10, 10, [0.5; 3]).unwrap()).await.session_id;
    assert_eq!(state.evict_idle(Instant::now()), 0);
    assert_eq!(get(&app, &format!("/v1/sessions/{id}")).await.status, StatusCode::OK);
    assert_eq!(state.evict_idle(Instant::now() + Duration::from_secs(61)), 1);
    assert_eq!(get(&app, &format!("/v1/sessions/{id}")).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let sample = disk_on_texture(120, 5);
    let app = router(AppState::new(config.clone()));
    let id = upload(&app, &sample.image).await.session_id;
    let base = format!("/v1/sessions/{id}");
    let first: SegmentResponse = post_json(&app, &format!("{base}/segment"), bbox_json(sample.bbox)).await.json();
    let mask = get(&app, &first.urls.mask).await.body;

    let state = AppState::new(config);
    assert_eq!(state.restore(), 1);
    let app = router(state);
    assert_eq!(get(&app, &first.urls.mask).await.body, mask);
    let info: Value = get(&app, &base).await.json();
    assert_eq!(info["latest"]["revision"], 1);

    // overriding after a reload regenerates the same candidates
    let r = post_json(&app, &format!("{base}/override"), json!({"factor": first.selected_factor})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let second: SegmentResponse = r.json();
    assert_eq!(second.revision, 2);
    assert_eq!(second.candidates, first.candidates);
    assert_eq!(get(&app, &second.urls.mask).await.body, mask);
}

#[tokio::test]
async fn health_and_cors() {
    let app = router(AppState::new(ServiceConfig::default()));
    let r = call(
        &app,
        Request::get("/healthz").header("origin", "http://localhost:5173").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers["access-control-allow-origin"], "*");
}

#[tokio::test]
async fn slow_requests_time_out() {
    let app = router(AppState::new(ServiceConfig {
        compute_timeout: Duration::from_millis(1),
        ..ServiceConfig::default()
    }));
    let sample = disk_on_texture(200, 1);
    let req = Request::post("/v1/sessions")
        .body(Body::from(encode_rgb_png(&sample.image).unwrap()))
        .unwrap();
    let r = call(&app, req).await;
    // decoding may or may not beat the limit; segmentation cannot
    if r.status == StatusCode::CREATED {
        let id = r.json::<Created>().session_id;
        let r = post_json(&app, &format!("/v1/sessions/{id}/segment"), bbox_json(sample.bbox)).await;
        assert_eq!(r.status, StatusCode::GATEWAY_TIMEOUT);
    } else {
        assert_eq!(r.status, StatusCode::GATEWAY_TIMEOUT);
    }
}
