//! HTTP JSON API over one immutable bundle.

use std::sync::Arc;

use alttrip_core::bundle::EngineBundle;
use alttrip_core::dataset::{Poi, PoiId};
use alttrip_core::planner::{recommend_topk, Itinerary, Method, PlanError, Query};
use alttrip_core::sampler::{check_constraints, ConstraintReport, ConstraintSet, SamplerError};
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

pub struct Failure(StatusCode, ApiError);

impl Failure {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self(status, ApiError { code: code.into(), message: message.into() })
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<JsonRejection> for Failure {
    fn from(r: JsonRejection) -> Self {
        Failure::new(StatusCode::BAD_REQUEST, "BadRequest", r.body_text())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let msg = e.to_string();
        let bad = StatusCode::BAD_REQUEST;
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            PlanError::ConstraintUnsupported => Failure::new(bad, "ConstraintUnsupported", msg),
            PlanError::InvalidQuery(_) => Failure::new(bad, "InvalidQuery", msg),
            PlanError::InvalidId(_) => Failure::new(bad, "InvalidId", msg),
            PlanError::NoEligiblePoi => Failure::new(unprocessable, "NoEligiblePoi", msg),
            PlanError::ExhaustedCandidates => Failure::new(unprocessable, "ExhaustedCandidates", msg),
            PlanError::Sampler(SamplerError::InfeasibleConstraints(_)) => {
                Failure::new(unprocessable, "InfeasibleConstraints", msg)
            }
            PlanError::Sampler(SamplerError::MissingTableEntry(_)) => {
                Failure::new(bad, "MissingTableEntry", msg)
            }
            PlanError::Sampler(SamplerError::InvalidConstraints(_)) => {
                Failure::new(bad, "InvalidConstraints", msg)
            }
            _ => Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", msg),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendRequest {
    pub s: PoiId,
    pub d: PoiId,
    pub k: usize,
    #[serde(rename = "L", default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub constraints: Option<ConstraintSet>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub itineraries: Vec<Itinerary>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub constraints: ConstraintSet,
    #[serde(default)]
    pub itinerary: Option<Vec<PoiId>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub valid: bool,
    #[serde(default)]
    pub error: Option<ApiError>,
    #[serde(default)]
    pub report: Option<ConstraintReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub dataset: String,
    pub n_pois: usize,
    pub catalog_hash: String,
}

pub type Shared = Arc<EngineBundle>;

pub fn router(bundle: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/pois", get(pois))
        .route("/recommend", post(recommend))
        .route("/constraints/validate", post(validate))
        .with_state(bundle)
}

async fn health(State(b): State<Shared>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        dataset: b.name.clone(),
        n_pois: b.catalog.len(),
        catalog_hash: b.catalog_hash.clone(),
    })
}

async fn pois(State(b): State<Shared>) -> Json<Vec<Poi>> {
    Json(b.catalog.pois().to_vec())
}

pub fn run_recommend(b: &EngineBundle, req: RecommendRequest) -> Result<RecommendResponse, PlanError> {
    let seed = req.seed.unwrap_or_else(rand::random);
    let mut query = Query::new(req.s, req.d, req.k).with_method(req.method).with_seed(seed);
    query.length = req.length;
    let set = recommend_topk(&b.model, &query, req.constraints.as_ref())?;
    Ok(RecommendResponse { itineraries: set.itineraries, seed })
}

async fn recommend(
    State(b): State<Shared>,
    body: Result<Json<RecommendRequest>, JsonRejection>,
) -> Result<Json<RecommendResponse>, Failure> {
    let Json(req) = body?;
    let out = tokio::task::spawn_blocking(move || run_recommend(&b, req))
        .await
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    Ok(Json(out))
}

async fn validate(
    State(b): State<Shared>,
    body: Result<Json<ValidateRequest>, JsonRejection>,
) -> Result<Json<ValidateResponse>, Failure> {
    let Json(req) = body?;
    if let Err(e) = req.constraints.validate(b.catalog.len()) {
        let Failure(_, err) = Failure::from(PlanError::Sampler(e));
        return Ok(Json(ValidateResponse { valid: false, error: Some(err), report: None }));
    }
    let report = match &req.itinerary {
        Some(it) => {
            if let Some(&bad) = it.iter().find(|&&p| p >= b.catalog.len()) {
                return Err(PlanError::InvalidId(bad).into());
            }
            Some(check_constraints(it, &req.constraints).map_err(|e| Failure::from(PlanError::Sampler(e)))?)
        }
        None => None,
    };
    Ok(Json(ValidateResponse { valid: true, error: None, report }))
}

pub async fn serve(bundle: EngineBundle, bind: &str) -> Result<(), std::io::Error> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("serving {} POIs on {}", bundle.catalog.len(), listener.local_addr()?);
    axum::serve(listener, router(Arc::new(bundle))).await
}
