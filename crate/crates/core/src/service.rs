//! HTTP JSON API: prediction, image extraction, design comparison and model listing.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::domain::{BridgeGeometry, BridgeParameters, DomainError, MaterialProperties};
use crate::models::{self, Architecture, Model, ModelError};
use crate::physics::{physics_loss, PhysicsConstants, PhysicsLossKind};
use crate::vision::{self, ExtractedParameters, PipelineConfig, VisionError};

/// Beam diameter assumed when a request omits it.
pub const DEFAULT_BEAM_DIAMETER_MM: f64 = 1.9;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 8 * 1024 * 1024;
pub const COMPARE_RANGE: (usize, usize) = (2, 20);
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("no model loaded")]
    NoModel,
    #[error("payload exceeds {0} bytes")]
    TooLarge(usize),
    #[error("no structure found: {0}")]
    NoStructure(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::Field { field: field.into(), message: message.into() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Field { .. } | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NoModel => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::TooLarge(_) => StatusCode::PAYLOAD_TOO_LARGE,
            ServiceError::NoStructure(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<DomainError> for ServiceError {
    fn from(e: DomainError) -> Self {
        match e.field() {
            Some(f) => ServiceError::field(f, e.to_string()),
            None => ServiceError::BadRequest(e.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let ServiceError::Field { field, .. } = &self {
            body["field"] = json!(field);
        }
        (self.status(), Json(body)).into_response()
    }
}

/// One design as accepted by `/api/predict` and inside `/api/compare`.
///
/// Geometry comes either as `beam_lengths_mm` or as `beam_count` plus
/// `mean_length_mm`. Material fields default to typical spaghetti values.
/// Unknown fields are ignored so extraction output can be posted as is.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_lengths_mm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_count: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_length_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_diameter_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_g_cm3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus_gpa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yield_strength_mpa: Option<f64>,
}

impl DesignInput {
    pub fn from_parameters(p: &BridgeParameters) -> Self {
        Self {
            beam_lengths_mm: Some(p.geometry.beam_lengths_mm.clone()),
            beam_count: Some(p.geometry.beam_count as i64),
            mean_length_mm: None,
            beam_diameter_mm: Some(p.geometry.beam_diameter_mm),
            mean_angle_deg: Some(p.geometry.mean_angle_deg),
            density_g_cm3: Some(p.material.density_g_cm3),
            youngs_modulus_gpa: Some(p.material.youngs_modulus_gpa),
            yield_strength_mpa: Some(p.material.yield_strength_mpa),
        }
    }

    /// Validated parameters; errors name the offending field.
    pub fn to_parameters(&self) -> Result<BridgeParameters, ServiceError> {
        let count = match self.beam_count {
            Some(c) if c < 1 => return Err(ServiceError::field("beam_count", format!("must be a positive integer, got {c}"))),
            Some(c) => Some(c as usize),
            None => None,
        };
        let lengths = match (&self.beam_lengths_mm, count, self.mean_length_mm) {
            (Some(l), _, _) => l.clone(),
            (None, Some(n), Some(mean)) => vec![mean; n],
            (None, None, _) => return Err(ServiceError::field("beam_count", "required unless beam_lengths_mm is given")),
            (None, Some(_), None) => return Err(ServiceError::field("mean_length_mm", "required with beam_count")),
        };
        let angle = self.mean_angle_deg.ok_or_else(|| ServiceError::field("mean_angle_deg", "required"))?;
        let mut geometry = BridgeGeometry::new(lengths, self.beam_diameter_mm.unwrap_or(DEFAULT_BEAM_DIAMETER_MM), angle);
        if let Some(n) = count {
            geometry.beam_count = n;
        }
        let d = MaterialProperties::default();
        let material = MaterialProperties {
            density_g_cm3: self.density_g_cm3.unwrap_or(d.density_g_cm3),
            youngs_modulus_gpa: self.youngs_modulus_gpa.unwrap_or(d.youngs_modulus_gpa),
            yield_strength_mpa: self.yield_strength_mpa.unwrap_or(d.yield_strength_mpa),
        };
        Ok(BridgeParameters::new(geometry, material)?)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PredictRequest {
    #[serde(flatten)]
    pub design: DesignInput,
    #[serde(default)]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub weight_g: f64,
    /// Held-out MAE of the model; `None` when the model file carries no evaluation.
    pub error_band_g: Option<f64>,
    pub model_id: String,
    pub arch: Architecture,
    pub residuals: ResidualSummary,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NamedDesign {
    pub name: String,
    #[serde(flatten)]
    pub design: DesignInput,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompareRequest {
    pub designs: Vec<NamedDesign>,
    #[serde(default)]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedDesign {
    pub name: String,
    pub weight_g: f64,
    pub error_band_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub model_id: String,
    /// Ascending by predicted weight; ties keep request order.
    pub results: Vec<ComparedDesign>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub arch: Architecture,
    pub parameter_count: usize,
    pub metrics: Option<Value>,
    pub feature_schema: Vec<String>,
}

/// A model held read-only for the life of the server.
#[derive(Debug)]
pub struct LoadedModel {
    pub id: String,
    pub model: Model,
}

impl LoadedModel {
    /// Loads a model file; the id is the file stem.
    pub fn from_path(path: &Path) -> Result<Self, ServiceError> {
        let model = models::load(path)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
        Ok(Self { id, model })
    }

    pub fn error_band_g(&self) -> Option<f64> {
        self.model.metadata.evaluation.as_ref()?.get("mae")?.as_f64().filter(|m| m.is_finite() && *m >= 0.0)
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            id: self.id.clone(),
            arch: self.model.architecture(),
            parameter_count: self.model.parameter_count(),
            metrics: self.model.metadata.evaluation.clone(),
            feature_schema: crate::domain::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn check_id(&self, requested: Option<&str>) -> Result<(), ServiceError> {
        match requested {
            Some(id) if id != self.id => Err(ServiceError::field("model_id", format!("unknown model {id:?}; loaded: {:?}", self.id))),
            _ => Ok(()),
        }
    }

    /// In-process prediction with the physics residuals at the predicted weight.
    pub fn predict(&self, design: &DesignInput) -> Result<PredictResponse, ServiceError> {
        let params = design.to_parameters()?;
        let weight_g = self.model.predict_one(&params)?;
        if !weight_g.is_finite() {
            return Err(ServiceError::Internal("model produced a non-finite weight".into()));
        }
        let kind = match self.model.architecture() {
            Architecture::Pinn => PhysicsLossKind::Pinn,
            Architecture::Pikan => PhysicsLossKind::Pikan,
        };
        let (total, r) = physics_loss(kind, std::slice::from_ref(&params), &[weight_g], &PhysicsConstants::default())
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let terms = kind.constraints().iter().map(|n| (n.to_string(), r.get(n).unwrap_or(0.0))).collect();
        Ok(PredictResponse {
            weight_g,
            error_band_g: self.error_band_g(),
            model_id: self.id.clone(),
            arch: self.model.architecture(),
            residuals: ResidualSummary { total, terms },
        })
    }

    pub fn compare(&self, designs: &[NamedDesign]) -> Result<CompareResponse, ServiceError> {
        let (lo, hi) = COMPARE_RANGE;
        if designs.len() < lo || designs.len() > hi {
            return Err(ServiceError::field("designs", format!("between {lo} and {hi} designs required, got {}", designs.len())));
        }
        let mut results = Vec::with_capacity(designs.len());
        for (i, d) in designs.iter().enumerate() {
            let params = d.design.to_parameters().map_err(|e| match e {
                ServiceError::Field { field, message } => ServiceError::Field { field: format!("designs[{i}].{field}"), message },
                other => other,
            })?;
            results.push(ComparedDesign { name: d.name.clone(), weight_g: self.model.predict_one(&params)?, error_band_g: self.error_band_g() });
        }
        results.sort_by(|a, b| a.weight_g.total_cmp(&b.weight_g));
        Ok(CompareResponse { model_id: self.id.clone(), results })
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_upload_bytes: usize,
    /// Concurrent extraction jobs.
    pub extract_workers: usize,
    pub pipeline: PipelineConfig,
    /// Directory of static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            extract_workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2),
            pipeline: PipelineConfig::default(),
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    model: Option<Arc<LoadedModel>>,
    config: Arc<ServiceConfig>,
    extract_slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(model: Option<LoadedModel>, config: ServiceConfig) -> Self {
        let slots = Arc::new(Semaphore::new(config.extract_workers.max(1)));
        Self { model: model.map(Arc::new), config: Arc::new(config), extract_slots: slots }
    }

    fn model(&self) -> Result<&LoadedModel, ServiceError> {
        self.model.as_deref().ok_or(ServiceError::NoModel)
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<PredictResponse>, ServiceError> {
    let model = state.model()?;
    let req: PredictRequest = parse_json(&body)?;
    model.check_id(req.model_id.as_deref())?;
    Ok(Json(model.predict(&req.design)?))
}

async fn compare(State(state): State<AppState>, body: Bytes) -> Result<Json<CompareResponse>, ServiceError> {
    let model = state.model()?;
    let req: CompareRequest = parse_json(&body)?;
    model.check_id(req.model_id.as_deref())?;
    Ok(Json(model.compare(&req.designs)?))
}

async fn list_models(State(state): State<AppState>) -> Json<Value> {
    let models: Vec<ModelSummary> = state.model.iter().map(|m| m.summary()).collect();
    Json(json!({ "models": models }))
}

fn multipart_error(e: axum::extract::multipart::MultipartError, limit: usize) -> ServiceError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ServiceError::TooLarge(limit)
    } else {
        ServiceError::BadRequest(e.body_text())
    }
}

/// Maps pipeline failures onto service errors.
pub fn vision_error(e: VisionError) -> ServiceError {
    match e {
        VisionError::InvalidImage(m) => ServiceError::field("image", m),
        VisionError::InvalidConfig(m) => ServiceError::field("scale_factor", m),
        VisionError::NoStructure(m) => ServiceError::NoStructure(m),
        VisionError::Io(e) => ServiceError::Io(e),
    }
}

async fn extract(State(state): State<AppState>, mut form: Multipart) -> Result<Json<ExtractedParameters>, ServiceError> {
    let limit = state.config.max_upload_bytes;
    let (mut image, mut scale) = (None, None);
    while let Some(field) = form.next_field().await.map_err(|e| multipart_error(e, limit))? {
        match field.name() {
            Some("image") => image = Some(field.bytes().await.map_err(|e| multipart_error(e, limit))?),
            Some("scale_factor") => scale = Some(field.text().await.map_err(|e| multipart_error(e, limit))?),
            _ => {}
        }
    }
    let image = image.ok_or_else(|| ServiceError::field("image", "missing image part"))?;
    if image.len() > limit {
        return Err(ServiceError::TooLarge(limit));
    }
    let scale = scale.ok_or_else(|| ServiceError::field("scale_factor", "missing scale_factor part"))?;
    let scale: f64 = scale.trim().parse().map_err(|_| ServiceError::field("scale_factor", format!("not a number: {scale:?}")))?;
    let _slot = state.extract_slots.clone().acquire_owned().await.map_err(|e| ServiceError::Internal(e.to_string()))?;
    let pipeline = state.config.pipeline.clone();
    let out = tokio::task::spawn_blocking(move || {
        let rgb = vision::decode_image(&image)?;
        vision::extract_parameters(&rgb, scale, &pipeline)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(Json(out.map_err(vision_error)?))
}

/// The API router. Unknown routes answer 404; static assets are served from
/// `static_dir` when configured.
pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    let static_dir = state.config.static_dir.clone();
    let api = Router::new()
        .route("/api/predict", post(predict))
        .route("/api/compare", post(compare))
        .route("/api/models", get(list_models))
        // Leave room for multipart framing; the image part is checked against the cap itself.
        .route("/api/extract", post(extract).layer(DefaultBodyLimit::max(limit + 64 * 1024)))
        .route("/api/{*rest}", axum::routing::any(|| async { (StatusCode::NOT_FOUND, Json(json!({ "error": "no such route" }))) }))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.fallback(|| async { (StatusCode::NOT_FOUND, Json(json!({ "error": "no such route" }))) }),
    }
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(addr: SocketAddr, state: AppState) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_input_rules() {
        let base = DesignInput { beam_count: Some(12), mean_length_mm: Some(100.0), mean_angle_deg: Some(45.0), ..Default::default() };
        let p = base.to_parameters().unwrap();
        assert_eq!(p.geometry.beam_count, 12);
        assert_eq!(p.geometry.beam_diameter_mm, DEFAULT_BEAM_DIAMETER_MM);
        assert_eq!(p.material, MaterialProperties::default());

        let zero = DesignInput { beam_count: Some(0), ..base.clone() };
        assert!(matches!(zero.to_parameters(), Err(ServiceError::Field { ref field, .. }) if field == "beam_count"));
        let no_angle = DesignInput { mean_angle_deg: None, ..base.clone() };
        assert!(matches!(no_angle.to_parameters(), Err(ServiceError::Field { ref field, .. }) if field == "mean_angle_deg"));
        let mismatch = DesignInput { beam_lengths_mm: Some(vec![1.0, 2.0]), beam_count: Some(3), ..base.clone() };
        assert!(matches!(mismatch.to_parameters(), Err(ServiceError::Field { ref field, .. }) if field == "beam_count"));
        let bad_material = DesignInput { density_g_cm3: Some(-1.0), ..base };
        assert!(matches!(bad_material.to_parameters(), Err(ServiceError::Field { ref field, .. }) if field == "density_g_cm3"));
    }

    #[test]
    fn round_trips_parameters() {
        let d = DesignInput { beam_lengths_mm: Some(vec![80.0, 120.0]), mean_angle_deg: Some(30.0), ..Default::default() };
        let p = d.to_parameters().unwrap();
        assert_eq!(DesignInput::from_parameters(&p).to_parameters().unwrap(), p);
    }

    #[test]
    fn extraction_payload_is_a_valid_request() {
        let ex = json!({ "beam_count": 2, "beam_lengths_mm": [100.0, 150.0], "mean_angle_deg": 60.0, "angles_deg": [60.0], "scale_factor": 0.5, "segments": [] });
        let req: PredictRequest = serde_json::from_value(ex).unwrap();
        assert_eq!(req.design.to_parameters().unwrap().geometry.beam_count, 2);
    }

    #[test]
    fn status_codes() {
        assert_eq!(ServiceError::NoModel.status(), StatusCode::SERVICE_UNAVAILABLE);
        assert_eq!(ServiceError::NoStructure("x".into()).status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(ServiceError::TooLarge(1).status(), StatusCode::PAYLOAD_TOO_LARGE);
        assert_eq!(ServiceError::field("a", "b").status(), StatusCode::BAD_REQUEST);
    }
}
