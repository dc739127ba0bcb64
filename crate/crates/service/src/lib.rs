//! Network front end for a Timbre Surface.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /health` | liveness and surface summary |
//! | `GET /surface` | the surface document, with an `ETag` content hash |
//! | `POST /render` | WAV clip for a surface position |
//! | `GET /sounds/{id}` | corpus WAV by entry id, when a corpus dir is configured |
//! | `WS /session?session=ID&user=NAME` | collaborative session events |
//!
//! Every JSON message carries a protocol version field `v`.

mod hub;
mod render;

use std::collections::HashMap;
use std::future::IntoFuture;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use timbre::artifact::content_hash;
use timbre::session::{NoLookup, ParamLookup, PROTOCOL_VERSION};
use timbre::surface::TimbreSurface;

pub use hub::{
    close_code, Hub, CLOSE_BAD_VERSION, CLOSE_DUPLICATE, CLOSE_FULL, CLOSE_LAGGED, CLOSE_PROTOCOL,
};
pub use render::{RenderMode, RenderRequest, MAX_RENDER_SECONDS, PARAMS_HEADER, POINT_HEADER};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub surface_path: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    /// Accepted session events are appended to `<dir>/<session>.jsonl`.
    pub session_log_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn local(port: u16) -> Self {
        ServiceConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            surface_path: None,
            corpus_dir: None,
            session_log_dir: None,
        }
    }
}

/// A surface together with the exact bytes it was loaded from.
#[derive(Debug)]
pub struct LoadedSurface {
    pub surface: TimbreSurface,
    pub document: Arc<str>,
    pub etag: String,
}

impl LoadedSurface {
    pub fn from_document(document: String) -> timbre::Result<Self> {
        let surface = TimbreSurface::from_document(&document)?;
        let etag = format!("\"{}\"", content_hash(document.as_bytes()));
        Ok(LoadedSurface {
            surface,
            document: document.into(),
            etag,
        })
    }
}

pub struct AppState {
    pub surface: Option<LoadedSurface>,
    pub corpus_dir: Option<PathBuf>,
    pub session_log_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<Hub>>>,
}

impl AppState {
    pub fn new(surface: Option<LoadedSurface>) -> Self {
        AppState {
            surface,
            corpus_dir: None,
            session_log_dir: None,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> anyhow::Result<Self> {
        let surface = match &cfg.surface_path {
            Some(p) => {
                let doc = std::fs::read_to_string(p)
                    .with_context(|| format!("reading surface {}", p.display()))?;
                Some(
                    LoadedSurface::from_document(doc)
                        .with_context(|| format!("loading surface {}", p.display()))?,
                )
            }
            None => None,
        };
        Ok(AppState {
            corpus_dir: cfg.corpus_dir.clone(),
            session_log_dir: cfg.session_log_dir.clone(),
            ..AppState::new(surface)
        })
    }

    pub fn lookup(&self) -> &dyn ParamLookup {
        match &self.surface {
            Some(s) => &s.surface,
            None => &NoLookup,
        }
    }

    pub fn hub(&self, session: &str) -> Arc<Hub> {
        let mut map = self.sessions.lock().expect("session map");
        map.entry(session.to_string())
            .or_insert_with(|| {
                let log = self
                    .session_log_dir
                    .as_ref()
                    .map(|d| d.join(format!("{session}.jsonl")));
                Arc::new(Hub::new(log))
            })
            .clone()
    }
}

pub(crate) fn error_response(status: StatusCode, code: &str, message: impl ToString) -> Response {
    (
        status,
        Json(json!({"v": PROTOCOL_VERSION, "code": code, "error": message.to_string()})),
    )
        .into_response()
}

async fn health(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "v": PROTOCOL_VERSION,
        "status": "ok",
        "surface": app.surface.is_some(),
        "points": app.surface.as_ref().map_or(0, |s| s.surface.len()),
    }))
}

async fn surface(State(app): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let Some(s) = &app.surface else {
        return error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_surface",
            "no surface loaded",
        );
    };
    let etag = HeaderValue::from_str(&s.etag).expect("hex etag");
    if headers.get(header::IF_NONE_MATCH) == Some(&etag) {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    (
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("application/json"),
            ),
            (header::ETAG, etag),
            (header::CACHE_CONTROL, HeaderValue::from_static("no-cache")),
        ],
        s.document.to_string(),
    )
        .into_response()
}

async fn sound(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(dir) = &app.corpus_dir else {
        return error_response(
            StatusCode::NOT_FOUND,
            "no_corpus",
            "no corpus directory configured",
        );
    };
    let id = id.strip_suffix(".wav").unwrap_or(&id);
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
        return error_response(
            StatusCode::BAD_REQUEST,
            "bad_id",
            "entry ids are alphanumeric",
        );
    }
    match tokio::fs::read(dir.join(format!("{id}.wav"))).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response(),
        Err(_) => error_response(
            StatusCode::NOT_FOUND,
            "unknown_entry",
            format!("no sound {id}"),
        ),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/surface", get(surface))
        .route("/render", post(render::render))
        .route("/sounds/{id}", get(sound))
        .route("/session", get(hub::ws_handler))
        .with_state(state)
}

/// Binds the listener and returns the bound address with the server future.
pub async fn bind(
    cfg: &ServiceConfig,
) -> anyhow::Result<(
    SocketAddr,
    impl std::future::Future<Output = std::io::Result<()>>,
)> {
    let state = Arc::new(AppState::from_config(cfg)?);
    let listener = tokio::net::TcpListener::bind(cfg.addr)
        .await
        .with_context(|| format!("binding {}", cfg.addr))?;
    let addr = listener.local_addr()?;
    Ok((addr, axum::serve(listener, router(state)).into_future()))
}

pub async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let (addr, server) = bind(&cfg).await?;
    log::info!("listening on http://{addr}");
    server.await?;
    Ok(())
}
