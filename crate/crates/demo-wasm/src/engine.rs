//! Host-side logic of the demo, kept free of browser types so it can be
//! tested natively.

use alttrip_core::dataset::{build_routes, read_visits, PoiCatalog, PoiId, Route, DEFAULT_GAP_HOURS};
use alttrip_core::itrnet::{combined_step_probs, train_itrnet, ItrNet, PoiMask, TrainConfig};
use alttrip_core::planner::{recommend_topk, Method, Query};
use alttrip_core::poigraph::{
    build_category_adjacency, build_distance_adjacency, embed_catalog, AdjacencyMatrix, GaeConfig,
};
use alttrip_core::sampler::ConstraintSet;
use serde::{Deserialize, Serialize};

const POIS_CSV: &str = include_str!("../../../data/synthetic/pois.csv");
const VISITS_CSV: &str = include_str!("../../../data/synthetic/visits.csv");

pub struct Demo {
    pub catalog: PoiCatalog,
    pub routes: Vec<Route>,
    pub net: ItrNet,
    category: AdjacencyMatrix,
    distance: AdjacencyMatrix,
}

#[derive(Debug, Deserialize)]
pub struct DemoRequest {
    pub s: PoiId,
    pub d: PoiId,
    pub k: usize,
    #[serde(rename = "L", default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub must_see: Vec<PoiId>,
}

#[derive(Debug, Serialize)]
pub struct SlotView {
    pub slot: usize,
    pub beta: f64,
    pub current: PoiId,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub combined: Vec<f64>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Demo {
    /// Trains embeddings and the sequence model on the bundled city.
    pub fn from_fixture(epochs: usize, seed: u64) -> Result<Self, String> {
        let catalog = PoiCatalog::from_reader(POIS_CSV.as_bytes()).map_err(err)?;
        let visits = read_visits(VISITS_CSV.as_bytes()).map_err(err)?;
        let routes = build_routes(&visits, catalog.len(), DEFAULT_GAP_HOURS).map_err(err)?;
        let table =
            embed_catalog(&catalog, &GaeConfig::category(seed), &GaeConfig::distance(seed + 1)).map_err(err)?;
        let cfg = TrainConfig { epochs, learning_rate: 0.005, seed, ..TrainConfig::default() };
        let (net, _) = train_itrnet(&routes, table, cfg).map_err(err)?;
        Ok(Self {
            category: build_category_adjacency(&catalog),
            distance: build_distance_adjacency(&catalog).map_err(err)?,
            catalog,
            routes,
            net,
        })
    }

    pub fn pois_json(&self) -> String {
        serde_json::to_string(self.catalog.pois()).expect("catalog serializes")
    }

    pub fn recommend(&self, request: &str) -> Result<String, String> {
        let req: DemoRequest = serde_json::from_str(request).map_err(err)?;
        let mut query = Query::new(req.s, req.d, req.k).with_method(req.method).with_seed(req.seed);
        query.length = req.length;
        let constraints = ConstraintSet { must_see: req.must_see, ..Default::default() };
        let set = recommend_topk(&self.net, &query, Some(&constraints)).map_err(err)?;
        serde_json::to_string(&set.itineraries).map_err(err)
    }

    /// Row-major adjacency values for `"category"` or `"distance"`.
    pub fn adjacency(&self, kind: &str) -> Result<Vec<f64>, String> {
        let m = match kind {
            "category" => &self.category,
            "distance" => &self.distance,
            other => return Err(format!("unknown graph {other:?}")),
        };
        Ok(m.values.iter().copied().collect())
    }

    /// Forward, backward and blended distributions for interior index
    /// `slot` of `itinerary`, with the rest of the itinerary masked.
    pub fn slot_view(&self, itinerary: &[PoiId], slot: usize) -> Result<SlotView, String> {
        let len = itinerary.len();
        if len < 3 || slot == 0 || slot >= len - 1 {
            return Err(format!("slot {slot} is not interior for length {len}"));
        }
        let (s, d) = (itinerary[0], itinerary[len - 1]);
        let mut mask = PoiMask::from_ids(self.net.n_pois(), itinerary.iter().copied());
        mask.remove(itinerary[slot]);
        let rev: Vec<PoiId> = itinerary[slot + 1..].iter().rev().copied().collect();
        let pf = self.net.forward_step_probs(&itinerary[..slot], s, d, &mask).map_err(err)?;
        let pb = self.net.backward_step_probs(&rev, s, d, &mask).map_err(err)?;
        let pc = combined_step_probs(&pf, &pb, slot + 1, len).map_err(err)?;
        Ok(SlotView {
            slot,
            beta: (slot + 1) as f64 / (len - 1) as f64,
            current: itinerary[slot],
            forward: pf.probs,
            backward: pb.probs,
            combined: pc.probs,
        })
    }
}
