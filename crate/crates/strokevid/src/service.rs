//! HTTP inference service.
//!
//! `GET /health` reports readiness and the model configuration;
//! `POST /generate` rolls the loaded model out from an uploaded image along
//! a keypoint path. Field names and error codes are documented in
//! `docs/api.md`.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use strokevid_core::{Frame, Model, Point, StrokeKeypoints};

use crate::config::ModelSettings;
use crate::imageio::{decode_png, encode_png, png_dimensions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    /// Largest accepted request body.
    pub max_body_bytes: usize,
    /// Largest accepted decoded PNG file.
    pub max_image_bytes: usize,
    pub max_frames: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_body_bytes: 8 << 20,
            max_image_bytes: 4 << 20,
            max_frames: 256,
        }
    }
}

/// Shared service state. The model is set once; until then every model
/// endpoint answers 503.
#[derive(Default)]
pub struct ServiceState {
    model: OnceLock<Arc<Model>>,
    step: OnceLock<u64>,
    limits: Limits,
}

impl ServiceState {
    pub fn new(limits: Limits) -> Arc<Self> {
        Arc::new(ServiceState {
            limits,
            ..ServiceState::default()
        })
    }

    pub fn with_model(model: Model, step: u64, limits: Limits) -> Arc<Self> {
        let s = Self::new(limits);
        s.install(model, step);
        s
    }

    /// Makes `model` available; later calls are ignored.
    pub fn install(&self, model: Model, step: u64) {
        let _ = self.step.set(step);
        let _ = self.model.set(Arc::new(model));
    }

    pub fn is_ready(&self) -> bool {
        self.model.get().is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointJson {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    /// Base64 PNG of the initial frame.
    pub image: String,
    pub keypoints: Vec<KeypointJson>,
    pub frame_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub inference_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    /// Base64 PNGs of the generated frames, in order.
    pub frames: Vec<String>,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: Option<ModelSettings>,
    pub step: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: u16,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn too_large(message: impl Into<String>) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, message)
    }

    fn not_ready() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "model is not loaded yet")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorResponse {
            error: ErrorBody {
                code: self.status.as_u16(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let limit = state.limits.max_body_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/generate", post(generate))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

async fn health(State(state): State<Arc<ServiceState>>) -> Response {
    match state.model.get() {
        Some(model) => Json(HealthResponse {
            status: "ok".into(),
            model: Some(model.config().clone().into()),
            step: state.step.get().copied(),
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(HealthResponse {
                status: "loading".into(),
                model: None,
                step: None,
            }),
        )
            .into_response(),
    }
}

async fn generate(
    State(state): State<Arc<ServiceState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<GenerateResponse>, ApiError> {
    let started = Instant::now();
    let model = state.model.get().cloned().ok_or_else(ApiError::not_ready)?;
    let body = body.map_err(|r| match r.status() {
        StatusCode::PAYLOAD_TOO_LARGE => ApiError::too_large("request body is too large"),
        _ => ApiError::bad_request(r.body_text()),
    })?;
    let req: GenerateRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))?;
    let (first, keypoints) = validate(&model, &req, &state.limits)?;
    let steps = req.frame_count;
    let t0 = Instant::now();
    let frames = tokio::task::spawn_blocking(move || model.rollout(&first, &keypoints, steps))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let inference_ms = t0.elapsed().as_secs_f64() * 1e3;
    let encoded = frames
        .iter()
        .map(|f| encode_png(f).map(|png| BASE64.encode(png)))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let config = state.model.get().expect("model present").config();
    Ok(Json(GenerateResponse {
        frame_count: encoded.len(),
        frames: encoded,
        width: config.width,
        height: config.height,
        timing: Timing {
            inference_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    }))
}

/// Checks a request against the model; returns the decoded first frame and
/// the keypoint path.
pub fn validate(model: &Model, req: &GenerateRequest, limits: &Limits) -> Result<(Frame, StrokeKeypoints), ApiError> {
    let c = model.config();
    let png = BASE64
        .decode(req.image.as_bytes())
        .map_err(|e| ApiError::bad_request(format!("image is not valid base64: {e}")))?;
    if png.len() > limits.max_image_bytes {
        return Err(ApiError::too_large(format!(
            "image of {} bytes exceeds the {}-byte limit",
            png.len(),
            limits.max_image_bytes
        )));
    }
    let (w, h) = png_dimensions(&png).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (w, h) = (w as usize, h as usize);
    if w > c.width || h > c.height {
        return Err(ApiError::too_large(format!(
            "image is {w}x{h}, the model takes {}x{}",
            c.width, c.height
        )));
    }
    if (w, h) != (c.width, c.height) {
        return Err(ApiError::bad_request(format!(
            "image is {w}x{h}, the model takes {}x{}",
            c.width, c.height
        )));
    }
    let first = decode_png(&png, c.channels).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if req.frame_count > limits.max_frames {
        return Err(ApiError::bad_request(format!(
            "at most {} frames per request",
            limits.max_frames
        )));
    }
    if req.keypoints.len() < req.frame_count + 1 {
        return Err(ApiError::bad_request(format!(
            "{} frames need at least {} keypoints, got {}",
            req.frame_count,
            req.frame_count + 1,
            req.keypoints.len()
        )));
    }
    let points = req.keypoints.iter().map(|k| Point::new(k.x, k.y)).collect();
    let keypoints =
        StrokeKeypoints::new(points, c.height, c.width).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok((first, keypoints))
}

/// Serves until the process ends; the model at `checkpoint` is loaded in
/// the background while `/health` reports 503.
pub async fn serve(addr: std::net::SocketAddr, checkpoint: std::path::PathBuf, limits: Limits) -> anyhow::Result<()> {
    let state = ServiceState::new(limits);
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match crate::checkpoint::load(&checkpoint) {
        Ok(trainer) => {
            let step = trainer.step();
            loader.install(trainer.into_model(), step);
            eprintln!("model from {} ready (step {step})", checkpoint.display());
        }
        Err(e) => eprintln!("cannot load {}: {e}", checkpoint.display()),
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
