use std::sync::Arc;

use alttrip::server::{router, ApiError, RecommendResponse, ValidateResponse};
use alttrip_core::bundle::EngineBundle;
use alttrip_core::dataset::Poi;
use alttrip_core::fixtures::spiral_catalog;
use alttrip_core::itrnet::{ItrNet, TrainConfig};
use alttrip_core::poigraph::EmbeddingTable;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let catalog = spiral_catalog(12);
    let z = Array2::from_shape_fn((12, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
    let cfg = TrainConfig { hidden_size: 8, mlp_dim: 6, ..TrainConfig::default() };
    let mut net = ItrNet::init(EmbeddingTable::new(z), cfg);
    net.max_route_len = 5;
    router(Arc::new(EngineBundle::new("toy", catalog, net).unwrap()))
}

async fn call(app: Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> T {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

#[tokio::test]
async fn lists_pois_and_health() {
    let (status, body) = call(app(), "GET", "/pois", None).await;
    assert_eq!(status, StatusCode::OK);
    let pois: Vec<Poi> = parse(&body);
    assert_eq!(pois.len(), 12);
    assert_eq!(pois[3].id, 3);
    let (status, body) = call(app(), "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse::<Value>(&body)["n_pois"], 12);
}

#[tokio::test]
async fn recommends_with_sampler() {
    let req = json!({"s": 0, "d": 9, "k": 3, "L": 5, "method": "sampler", "seed": 4});
    let (status, body) = call(app(), "POST", "/recommend", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let r: RecommendResponse = parse(&body);
    assert_eq!(r.seed, 4);
    assert_eq!(r.itineraries.len(), 3);
    for it in &r.itineraries {
        assert_eq!(it.pois.len(), 5);
        assert_eq!((it.pois[0], it.pois[4]), (0, 9));
    }
    let (_, again) = call(app(), "POST", "/recommend", Some(req)).await;
    assert_eq!(again, body);
}

#[tokio::test]
async fn echoes_drawn_seed() {
    let (status, body) = call(app(), "POST", "/recommend", Some(json!({"s": 1, "d": 2, "k": 2}))).await;
    assert_eq!(status, StatusCode::OK);
    let r: RecommendResponse = parse(&body);
    let replay = json!({"s": 1, "d": 2, "k": 2, "seed": r.seed});
    let (_, again) = call(app(), "POST", "/recommend", Some(replay)).await;
    assert_eq!(again, body);
}

#[tokio::test]
async fn lstm_with_constraints_is_rejected() {
    let req = json!({"s": 0, "d": 9, "k": 3, "method": "lstm", "constraints": {"must_see": [4]}});
    let (status, body) = call(app(), "POST", "/recommend", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse::<ApiError>(&body).code, "ConstraintUnsupported");
}

#[tokio::test]
async fn must_see_is_honoured() {
    let req = json!({"s": 0, "d": 9, "k": 3, "L": 6, "method": "sampler", "seed": 1,
                     "constraints": {"must_see": [4]}});
    let (status, body) = call(app(), "POST", "/recommend", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let r: RecommendResponse = parse(&body);
    assert!(r.itineraries.iter().all(|it| it.pois.contains(&4)));
}

#[tokio::test]
async fn infeasible_budget_and_bad_input() {
    let cost: Vec<Vec<f64>> = (0..12).map(|i| (0..12).map(|j| if i == j { 0.0 } else { 10.0 }).collect()).collect();
    let req = json!({"s": 0, "d": 9, "k": 1, "method": "sampler",
                     "constraints": {"budget": {"cost": cost, "limit": 5.0}}});
    let (status, body) = call(app(), "POST", "/recommend", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(parse::<ApiError>(&body).code, "InfeasibleConstraints");

    let (status, body) = call(app(), "POST", "/recommend", Some(json!({"s": 0, "d": 99, "k": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse::<ApiError>(&body).code, "InvalidId");

    let (status, body) = call(app(), "POST", "/recommend", Some(json!({"s": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse::<ApiError>(&body).code, "BadRequest");
}

#[tokio::test]
async fn validates_constraints() {
    let cost: Vec<Vec<f64>> = (0..12).map(|i| (0..12).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
    let req = json!({"constraints": {"budget": {"cost": cost, "limit": 3.0}}, "itinerary": [0, 1, 2, 3, 4]});
    let (status, body) = call(app(), "POST", "/constraints/validate", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let v: ValidateResponse = parse(&body);
    assert!(v.valid);
    assert!(!v.report.unwrap().satisfied);

    let req = json!({"constraints": {"budget": {"cost": [[0.0]], "limit": 3.0}}});
    let (_, body) = call(app(), "POST", "/constraints/validate", Some(req)).await;
    let v: ValidateResponse = parse(&body);
    assert!(!v.valid);
    assert_eq!(v.error.unwrap().code, "MissingTableEntry");
}
