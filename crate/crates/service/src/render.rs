use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use timbre::session::PROTOCOL_VERSION;
use timbre::surface::INTERPOLATION_K;
use timbre::synth::{render_with, RenderSettings, DEFAULT_DURATION, DEFAULT_RATE};
use timbre::{wav, ParameterVector};

use crate::{error_response, AppState};

pub const MAX_RENDER_SECONDS: f64 = 10.0;
pub const PARAMS_HEADER: &str = "x-timbre-params";
pub const POINT_HEADER: &str = "x-timbre-point";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    #[default]
    Nearest,
    Interpolate8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    #[serde(default = "version")]
    pub v: u32,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub mode: RenderMode,
    #[serde(default)]
    pub octave: i32,
    #[serde(default)]
    pub pitch_offset: i32,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

fn version() -> u32 {
    PROTOCOL_VERSION
}

fn default_duration() -> f64 {
    DEFAULT_DURATION
}

impl RenderRequest {
    pub fn validate(&self) -> Result<(), String> {
        if self.v != PROTOCOL_VERSION {
            return Err(format!("unsupported protocol version {}", self.v));
        }
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err("position must be finite".into());
        }
        if !(self.duration > 0.0 && self.duration <= MAX_RENDER_SECONDS) {
            return Err(format!(
                "duration must be in (0, {MAX_RENDER_SECONDS}] seconds"
            ));
        }
        if self.pitch_offset.abs() > 12 {
            return Err("pitch_offset must be within ±12 semitones".into());
        }
        Ok(())
    }
}

pub(crate) async fn render(State(app): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: RenderRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "bad_request", e),
    };
    if let Err(e) = req.validate() {
        return error_response(StatusCode::BAD_REQUEST, "bad_request", e);
    }
    let Some(loaded) = &app.surface else {
        return error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_surface",
            "no surface loaded",
        );
    };
    let q = [req.x, req.y];
    let resolved: timbre::Result<(ParameterVector, Option<String>)> = match req.mode {
        RenderMode::Nearest => loaded
            .surface
            .nearest(q, 1)
            .map(|n| (n[0].0.params, Some(n[0].0.id.clone()))),
        RenderMode::Interpolate8 => {
            let k = INTERPOLATION_K.min(loaded.surface.len());
            loaded.surface.interpolate(q, k).map(|p| (p, None))
        }
    };
    let (params, point) = match resolved {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "lookup", e),
    };
    let settings = RenderSettings {
        octave: req.octave,
        transpose_semitones: req.pitch_offset,
        duration: req.duration,
        rate: DEFAULT_RATE,
        seed: req.seed,
    };
    let rendered = tokio::task::spawn_blocking(move || {
        render_with(&params, &settings).map(|s| wav::encode(&s.samples, s.sample_rate))
    })
    .await;
    let bytes = match rendered {
        Ok(Ok(b)) => b,
        Ok(Err(e)) => return error_response(StatusCode::BAD_REQUEST, "render", e),
        Err(e) => return error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    };
    let mut resp = ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response();
    let h = resp.headers_mut();
    h.insert(
        PARAMS_HEADER,
        HeaderValue::from_str(&params.to_string()).expect("ascii"),
    );
    if let Some(id) = point {
        if let Ok(v) = HeaderValue::from_str(&id) {
            h.insert(POINT_HEADER, v);
        }
    }
    resp
}
