//! Browser demo: trains on the bundled synthetic city at start-up and
//! exposes recommendation, the POI graphs, and per-slot distributions.

pub mod engine;

use wasm_bindgen::prelude::*;

use crate::engine::Demo;

#[wasm_bindgen]
pub struct DemoEngine {
    inner: Demo,
}

#[wasm_bindgen]
impl DemoEngine {
    #[wasm_bindgen(constructor)]
    pub fn new(epochs: u32, seed: u32) -> Result<DemoEngine, JsError> {
        Demo::from_fixture(epochs as usize, seed as u64)
            .map(|inner| DemoEngine { inner })
            .map_err(|e| JsError::new(&e))
    }

    pub fn pois(&self) -> String {
        self.inner.pois_json()
    }

    pub fn n_routes(&self) -> usize {
        self.inner.routes.len()
    }

    /// `request` is `{s, d, k, L?, method?, seed?, must_see?}`.
    pub fn recommend(&self, request: &str) -> Result<String, JsError> {
        self.inner.recommend(request).map_err(|e| JsError::new(&e))
    }

    pub fn adjacency(&self, kind: &str) -> Result<Vec<f64>, JsError> {
        self.inner.adjacency(kind).map_err(|e| JsError::new(&e))
    }

    pub fn slot_view(&self, itinerary: Vec<u32>, slot: usize) -> Result<String, JsError> {
        let it: Vec<usize> = itinerary.into_iter().map(|p| p as usize).collect();
        let view = self.inner.slot_view(&it, slot).map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
    }
}
