//! Small synthetic catalogs and corpora shared by tests, the acceptance
//! suite and the browser demo.

use crate::dataset::{Poi, PoiCatalog, PoiId, Route};
use crate::itrnet::{train_itrnet, ItrNet, TrainConfig};
use crate::poigraph::{embed_catalog, EmbeddingTable, GaeConfig};

const CATEGORIES: [&str; 4] = ["museum", "park", "church", "market"];

/// `n` POIs on a spiral around central Edinburgh with cycling categories.
pub fn spiral_catalog(n: usize) -> PoiCatalog {
    let pois = (0..n)
        .map(|i| {
            let a = i as f64 * 2.399_963;
            let r = 0.002 + 0.0015 * (i as f64).sqrt();
            Poi {
                id: i,
                lat: 55.95 + r * a.sin(),
                lon: -3.19 + 1.8 * r * a.cos(),
                category: CATEGORIES[i % CATEGORIES.len()].to_string(),
            }
        })
        .collect();
    PoiCatalog::new(pois).expect("valid spiral catalog")
}

/// Graph embeddings with the default dimensions and a shortened schedule.
pub fn quick_embeddings(catalog: &PoiCatalog, seed: u64) -> EmbeddingTable {
    let cat = GaeConfig { epochs: 150, ..GaeConfig::category(seed) };
    let dist = GaeConfig { epochs: 150, ..GaeConfig::distance(seed.wrapping_add(1)) };
    embed_catalog(catalog, &cat, &dist).expect("embeddings for spiral catalog")
}

pub fn repeated_corpus(route: &[PoiId], copies: usize) -> Vec<Route> {
    (0..copies).map(|_| Route::from_unchecked(route.to_vec())).collect()
}

/// Training schedule used for toy corpora: paper dimensions, more epochs.
pub fn toy_train_config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 60, learning_rate: 0.005, patience: 60, seed, ..TrainConfig::default() }
}

/// A model trained on `copies` copies of one route over a spiral catalog.
pub fn memorized_model(n_pois: usize, route: &[PoiId], copies: usize, seed: u64) -> ItrNet {
    let catalog = spiral_catalog(n_pois);
    let emb = quick_embeddings(&catalog, seed);
    train_itrnet(&repeated_corpus(route, copies), emb, toy_train_config(seed))
        .expect("toy training")
        .0
}

/// Multi-route toy corpus over `n` POIs: a handful of recurring tours
/// between a few endpoint pairs.
pub fn toy_tours(n: usize) -> Vec<Vec<PoiId>> {
    assert!(n >= 12, "toy tours need at least 12 POIs");
    vec![
        vec![0, 3, 5, 7, 1],
        vec![0, 4, 6, 1],
        vec![0, 3, 8, 1],
        vec![2, 5, 9, 11, 10],
        vec![2, 6, 10],
        vec![2, 7, 4, 9, 10],
        vec![1, 8, 6, 3, 0],
        vec![11, 9, 5, 2],
    ]
}

/// A model trained on [`toy_tours`] (each tour repeated `copies` times).
pub fn toy_model(n_pois: usize, copies: usize, seed: u64) -> ItrNet {
    let catalog = spiral_catalog(n_pois);
    let emb = quick_embeddings(&catalog, seed);
    let routes: Vec<Route> =
        toy_tours(n_pois).iter().flat_map(|t| repeated_corpus(t, copies)).collect();
    train_itrnet(&routes, emb, toy_train_config(seed)).expect("toy training").0
}
