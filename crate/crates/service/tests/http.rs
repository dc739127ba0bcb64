use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use nalgebra::DMatrix;
use timbre::surface::{SurfaceEntry, TimbreSurface};
use timbre::synth::{render_with, RenderSettings};
use timbre::{wav, ParameterVector};
use timbre_service::{router, AppState, LoadedSurface, PARAMS_HEADER};
use tower::ServiceExt;

fn surface() -> TimbreSurface {
    let n = 30;
    let proj: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            [
                ((i * 7) % 11) as f64 / 5.0 - 1.0,
                ((i * 3) % 13) as f64 / 6.0 - 1.0,
            ]
        })
        .collect();
    let feats = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 2)) % 5) as f64);
    let entries: Vec<SurfaceEntry> = (0..n)
        .map(|i| SurfaceEntry {
            id: format!("e{i:03}"),
            params: ParameterVector::splat((i % 10) as f64 / 9.0)
                .unwrap()
                .with(8, 0.0)
                .unwrap(),
            octave: 0,
        })
        .collect();
    TimbreSurface::build(&proj, &feats, &entries, 4, "test").unwrap()
}

fn app(with_surface: bool) -> axum::Router {
    let loaded =
        with_surface.then(|| LoadedSurface::from_document(surface().to_document()).unwrap());
    router(Arc::new(AppState::new(loaded)))
}

async fn call(
    app: axum::Router,
    req: Request<Body>,
) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    (status, headers, body)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_render(json: &str) -> Request<Body> {
    Request::post("/render")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(json.to_string()))
        .unwrap()
}

#[tokio::test]
async fn health_reports_surface() {
    let (status, _, body) = call(app(true), get("/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["v"], 1);
    assert_eq!(v["points"], 30);
}

#[tokio::test]
async fn surface_document_and_etag() {
    let (status, headers, body) = call(app(true), get("/surface")).await;
    assert_eq!(status, StatusCode::OK);
    let doc: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(doc["points"].as_array().unwrap().len(), 30);
    let etag = headers[header::ETAG].clone();

    let (_, headers2, body2) = call(app(true), get("/surface")).await;
    assert_eq!(body, body2);
    assert_eq!(headers2[header::ETAG], etag);

    let cached = Request::get("/surface")
        .header(header::IF_NONE_MATCH, etag)
        .body(Body::empty())
        .unwrap();
    assert_eq!(call(app(true), cached).await.0, StatusCode::NOT_MODIFIED);
}

#[tokio::test]
async fn missing_surface_is_unavailable() {
    assert_eq!(
        call(app(false), get("/surface")).await.0,
        StatusCode::SERVICE_UNAVAILABLE
    );
    assert_eq!(
        call(app(false), post_render(r#"{"x":0,"y":0}"#)).await.0,
        StatusCode::SERVICE_UNAVAILABLE
    );
}

#[tokio::test]
async fn render_at_point_echoes_params_and_matches_direct_synthesis() {
    let s = surface();
    let p = &s.points()[5];
    let req = format!(
        r#"{{"v":1,"x":{},"y":{},"mode":"nearest","octave":-1,"duration":1.5,"seed":7}}"#,
        p.x, p.y
    );
    let (status, headers, body) = call(app(true), post_render(&req)).await;
    assert_eq!(status, StatusCode::OK);
    let echoed: ParameterVector = headers[PARAMS_HEADER].to_str().unwrap().parse().unwrap();
    assert_eq!(echoed, p.params);

    let direct = render_with(
        &p.params,
        &RenderSettings {
            octave: -1,
            duration: 1.5,
            seed: 7,
            ..RenderSettings::default()
        },
    )
    .unwrap();
    assert_eq!(body, wav::encode(&direct.samples, direct.sample_rate));

    let (_, _, again) = call(app(true), post_render(&req)).await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn interpolated_render() {
    let (status, headers, body) = call(
        app(true),
        post_render(r#"{"x":0.13,"y":-0.4,"mode":"interpolate8","duration":0.5}"#),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers.contains_key(PARAMS_HEADER));
    assert_eq!(&body[..4], b"RIFF");
}

#[tokio::test]
async fn invalid_requests_are_rejected() {
    for bad in [
        r#"{"x":0,"y":0,"duration":60}"#,
        r#"{"x":0,"y":0,"duration":0}"#,
        r#"{"x":0,"y":0,"pitch_offset":13}"#,
        r#"{"x":0,"y":0,"octave":9}"#,
        r#"{"x":0,"y":0,"mode":"cubic"}"#,
        r#"{"x":0,"y":0,"v":2}"#,
        r#"{"y":0}"#,
        "not json",
    ] {
        let (status, _, body) = call(app(true), post_render(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["v"], 1);
    }
}
