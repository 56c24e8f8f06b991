//! Category and distance POI graphs, graph autoencoders, and the fused
//! embedding table consumed by the sequence models.

use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PoiCatalog;
use crate::hash::content_hash;
use crate::optim::Adam;

const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("all pairwise distances are equal (d_max = d_min = {0}); distance graph is undefined")]
    DegenerateGeometry(f64),
    #[error("distance graph needs at least 2 POIs")]
    TooFewPois,
    #[error("loss kind {loss:?} does not match adjacency kind {kind:?}")]
    ConfigMismatch { kind: AdjacencyKind, loss: LossKind },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {0} (non-finite loss)")]
    NonFiniteLoss(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyKind {
    Category,
    Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub kind: AdjacencyKind,
    pub values: Array2<f64>,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// `A[i][j] = 1` when POIs `i` and `j` share a category.
pub fn build_category_adjacency(catalog: &PoiCatalog) -> AdjacencyMatrix {
    let pois = catalog.pois();
    let n = pois.len();
    let values =
        Array2::from_shape_fn((n, n), |(i, j)| f64::from(u8::from(pois[i].category == pois[j].category)));
    AdjacencyMatrix { kind: AdjacencyKind::Category, values }
}

/// Pairwise distances in kilometres on an equirectangular projection
/// centred at the catalog's mean latitude.
pub fn pairwise_distances_km(catalog: &PoiCatalog) -> Array2<f64> {
    let pois = catalog.pois();
    let n = pois.len();
    let mean_lat = pois.iter().map(|p| p.lat).sum::<f64>() / n.max(1) as f64;
    let cos_lat = mean_lat.to_radians().cos();
    let xy: Vec<(f64, f64)> = pois
        .iter()
        .map(|p| {
            (EARTH_RADIUS_KM * p.lon.to_radians() * cos_lat, EARTH_RADIUS_KM * p.lat.to_radians())
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (dx, dy) = (xy[i].0 - xy[j].0, xy[i].1 - xy[j].1);
        (dx * dx + dy * dy).sqrt()
    })
}

/// Distance-weighted graph: weight 1 for the closest pair, 0 for the
/// farthest, exponentially decaying in between. Diagonal is 1.
pub fn build_distance_adjacency(catalog: &PoiCatalog) -> Result<AdjacencyMatrix, GraphError> {
    distance_adjacency_from(&pairwise_distances_km(catalog))
}

/// Same as [`build_distance_adjacency`] over an explicit distance matrix.
pub fn distance_adjacency_from(dist: &Array2<f64>) -> Result<AdjacencyMatrix, GraphError> {
    let n = dist.nrows();
    if n < 2 {
        return Err(GraphError::TooFewPois);
    }
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d_min = d_min.min(dist[[i, j]]);
                d_max = d_max.max(dist[[i, j]]);
            }
        }
    }
    let span = d_max - d_min;
    if span <= 0.0 {
        return Err(GraphError::DegenerateGeometry(d_max));
    }
    // (e^(dmax-x) - 1) / (e^(dmax-dmin) - 1), rescaled by e^-(dmax-dmin)
    let floor = (-span).exp();
    let denom = -(-span).exp_m1();
    let values = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            1.0
        } else {
            (((d_min - dist[[i, j]]).exp() - floor) / denom).clamp(0.0, 1.0)
        }
    });
    Ok(AdjacencyMatrix { kind: AdjacencyKind::Distance, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl LossKind {
    pub fn for_kind(kind: AdjacencyKind) -> Self {
        match kind {
            AdjacencyKind::Category => LossKind::CrossEntropy,
            AdjacencyKind::Distance => LossKind::Mse,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    /// Stop once the best loss has not improved by this much for `patience` epochs.
    pub min_improvement: f64,
    pub patience: usize,
}

impl GaeConfig {
    pub fn category(seed: u64) -> Self {
        Self {
            embed_dim: 12,
            hidden_dim: 32,
            learning_rate: 0.05,
            epochs: 300,
            loss_kind: LossKind::CrossEntropy,
            seed,
            min_improvement: 1e-5,
            patience: 20,
        }
    }

    pub fn distance(seed: u64) -> Self {
        Self {
            embed_dim: 24,
            learning_rate: 0.01,
            loss_kind: LossKind::Mse,
            ..Self::category(seed)
        }
    }

    fn validate(&self) -> Result<(), GraphError> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(GraphError::InvalidConfig("dimensions must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GraphError::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One row of embedding per catalog POI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub z: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(z: Array2<f64>) -> Self {
        Self { z }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.z.row(i)
    }
}

/// Row-wise concatenation `[Zc | Zd]`.
pub fn fuse_embeddings(
    zc: &EmbeddingTable,
    zd: &EmbeddingTable,
) -> Result<EmbeddingTable, GraphError> {
    if zc.n() != zd.n() {
        return Err(GraphError::ShapeMismatch(format!("{} vs {} rows", zc.n(), zd.n())));
    }
    let z = concatenate(Axis(1), &[zc.z.view(), zd.z.view()])
        .map_err(|e| GraphError::ShapeMismatch(e.to_string()))?;
    Ok(EmbeddingTable { z })
}

/// `D^-1/2 A D^-1/2` with row sums as degrees.
pub fn normalized_adjacency(a: &Array2<f64>) -> Array2<f64> {
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| {
            let deg: f64 = r.sum();
            if deg > 0.0 {
                deg.sqrt().recip()
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_fn(a.dim(), |(i, j)| inv_sqrt[i] * a[[i, j]] * inv_sqrt[j])
}

/// Two-layer graph convolutional encoder with identity node features and
/// the `relu(Z Zᵀ)` decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAutoencoder {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

struct GaeForward {
    h1_pre: Array2<f64>,
    ph1: Array2<f64>,
    z: Array2<f64>,
    scores: Array2<f64>,
}

const CE_EPS: f64 = 1e-7;

impl GraphAutoencoder {
    pub fn init(n: usize, config: &GaeConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            w1: glorot(n, config.hidden_dim, &mut rng),
            w2: glorot(config.hidden_dim, config.embed_dim, &mut rng),
        }
    }

    fn forward(&self, p: &Array2<f64>) -> GaeForward {
        let h1_pre = p.dot(&self.w1);
        let h1 = h1_pre.mapv(relu);
        let ph1 = p.dot(&h1);
        let z = ph1.dot(&self.w2);
        let scores = z.dot(&z.t());
        GaeForward { h1_pre, ph1, z, scores }
    }

    /// Node embeddings for the normalized adjacency `p`.
    pub fn encode(&self, p: &Array2<f64>) -> Array2<f64> {
        self.forward(p).z
    }

    /// Loss and its gradients with respect to `w1` and `w2`.
    fn loss_and_grads(
        &self,
        p: &Array2<f64>,
        target: &Array2<f64>,
        loss: LossKind,
    ) -> (f64, Array2<f64>, Array2<f64>) {
        let f = self.forward(p);
        let count = target.len() as f64;
        let recon = f.scores.mapv(relu);
        let (value, d_recon) = reconstruction_loss(&recon, target, loss, count);
        let d_scores = &d_recon * &f.scores.mapv(|s| f64::from(u8::from(s > 0.0)));
        let d_z = (&d_scores + &d_scores.t()).dot(&f.z);
        let d_w2 = f.ph1.t().dot(&d_z);
        let d_h1 = p.t().dot(&d_z.dot(&self.w2.t()));
        let d_h1_pre = &d_h1 * &f.h1_pre.mapv(|s| f64::from(u8::from(s > 0.0)));
        let d_w1 = p.t().dot(&d_h1_pre);
        (value, d_w1, d_w2)
    }

    pub fn loss(&self, p: &Array2<f64>, target: &Array2<f64>, loss: LossKind) -> f64 {
        let recon = reconstruct(&self.encode(p));
        reconstruction_loss(&recon, target, loss, target.len() as f64).0
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// `relu(Z Zᵀ)`.
pub fn reconstruct(z: &Array2<f64>) -> Array2<f64> {
    z.dot(&z.t()).mapv(relu)
}

fn reconstruction_loss(
    recon: &Array2<f64>,
    target: &Array2<f64>,
    loss: LossKind,
    count: f64,
) -> (f64, Array2<f64>) {
    match loss {
        LossKind::Mse => {
            let diff = recon - target;
            let value = diff.mapv(|d| d * d).sum() / count;
            (value, diff.mapv(|d| 2.0 * d / count))
        }
        LossKind::CrossEntropy => {
            // reconstruction is clamped into (eps, 1 - eps) for the logs; the
            // gradient passes straight through the clamp
            let mut value = 0.0;
            let grad = ndarray::Zip::from(recon).and(target).map_collect(|&r, &a| {
                let p = r.clamp(CE_EPS, 1.0 - CE_EPS);
                value -= a * p.ln() + (1.0 - a) * (1.0 - p).ln();
                (-a / p + (1.0 - a) / (1.0 - p)) / count
            });
            (value / count, grad)
        }
    }
}

/// Result of one autoencoder run.
#[derive(Clone, Debug)]
pub struct GaeRun {
    pub embeddings: EmbeddingTable,
    pub model: GraphAutoencoder,
    /// Training loss before each epoch's update.
    pub loss_history: Vec<f64>,
    pub best_loss: f64,
}

/// Trains one graph autoencoder and returns the embeddings with the lowest
/// training loss seen (including the initialization).
pub fn train_gae(adjacency: &AdjacencyMatrix, config: &GaeConfig) -> Result<GaeRun, GraphError> {
    config.validate()?;
    if LossKind::for_kind(adjacency.kind) != config.loss_kind {
        return Err(GraphError::ConfigMismatch { kind: adjacency.kind, loss: config.loss_kind });
    }
    let n = adjacency.n();
    let p = normalized_adjacency(&adjacency.values);
    let mut model = GraphAutoencoder::init(n, config);
    let mut opt = Adam::new(config.learning_rate);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut history = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..=config.epochs {
        let (loss, mut g1, mut g2) = model.loss_and_grads(&p, &adjacency.values, config.loss_kind);
        if !loss.is_finite() {
            return Err(GraphError::NonFiniteLoss(epoch));
        }
        history.push(loss);
        if loss < best_loss - config.min_improvement {
            stale = 0;
        } else {
            stale += 1;
        }
        if loss < best_loss {
            best_loss = loss;
            best = model.clone();
        }
        if epoch == config.epochs || stale >= config.patience {
            break;
        }
        let (w1, w2) = (&mut model.w1, &mut model.w2);
        opt.step(
            &mut [w1.as_slice_mut().unwrap(), w2.as_slice_mut().unwrap()],
            &[g1.as_slice_mut().unwrap(), g2.as_slice_mut().unwrap()],
        );
    }
    log::debug!("gae {:?}: {} epochs, best loss {best_loss:.6}", adjacency.kind, history.len());
    Ok(GaeRun {
        embeddings: EmbeddingTable::new(best.encode(&p)),
        model: best,
        loss_history: history,
        best_loss,
    })
}

/// Both autoencoders plus fusion, with the default dimensions unless overridden.
pub fn embed_catalog(
    catalog: &PoiCatalog,
    category: &GaeConfig,
    distance: &GaeConfig,
) -> Result<EmbeddingTable, GraphError> {
    let zc = train_gae(&build_category_adjacency(catalog), category)?;
    let zd = train_gae(&build_distance_adjacency(catalog)?, distance)?;
    fuse_embeddings(&zc.embeddings, &zd.embeddings)
}

/// Embedding table plus provenance, as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCheckpoint {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub catalog_hash: String,
    pub embeddings: EmbeddingTable,
}

pub const EMBEDDING_FORMAT: &str = "alttrip-embeddings";

impl EmbeddingCheckpoint {
    pub fn new(
        embeddings: EmbeddingTable,
        catalog: &PoiCatalog,
        configs: &[&GaeConfig],
        kind: &str,
    ) -> Self {
        Self {
            format: EMBEDDING_FORMAT.into(),
            version: 1,
            n: embeddings.n(),
            d: embeddings.dim(),
            kind: kind.into(),
            seed: configs.first().map_or(0, |c| c.seed),
            config_hash: content_hash(configs),
            catalog_hash: content_hash(catalog),
            embeddings,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let json = serde_json::to_string(self).map_err(|e| GraphError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        let ck: Self =
            serde_json::from_str(&text).map_err(|e| GraphError::Checkpoint(e.to_string()))?;
        if ck.format != EMBEDDING_FORMAT {
            return Err(GraphError::Checkpoint(format!("unexpected format {:?}", ck.format)));
        }
        if ck.embeddings.n() != ck.n || ck.embeddings.dim() != ck.d {
            return Err(GraphError::Checkpoint("header does not match matrix shape".into()));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Poi;
    use ndarray::array;

    fn catalog(cats: &[&str]) -> PoiCatalog {
        PoiCatalog::new(
            cats.iter()
                .enumerate()
                .map(|(i, c)| Poi {
                    id: i,
                    lat: 55.9 + 0.001 * i as f64,
                    lon: -3.2 + 0.0013 * (i * i) as f64,
                    category: c.to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn category_blocks() {
        let a = build_category_adjacency(&catalog(&["park", "park", "museum"]));
        assert_eq!(a.values, array![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let same = build_category_adjacency(&catalog(&["x"; 4]));
        assert!(same.values.iter().all(|&v| v == 1.0));
        let distinct = build_category_adjacency(&catalog(&["a", "b", "c"]));
        assert_eq!(distinct.values, Array2::<f64>::eye(3));
    }

    #[test]
    fn distance_endpoints_on_a_line() {
        // three collinear points at 0, 1, 2
        let dist = Array2::from_shape_fn((3, 3), |(i, j)| (i as f64 - j as f64).abs());
        let a = distance_adjacency_from(&dist).unwrap().values;
        // direct closed form: (e^(dmax - x) - 1) / (e^(dmax - dmin) - 1) with dmin = 1, dmax = 2
        let oracle = |x: f64| ((2.0 - x).exp() - 1.0) / ((2.0f64 - 1.0).exp() - 1.0);
        assert!((a[[0, 1]] - 1.0).abs() < 1e-12);
        assert!((a[[0, 1]] - oracle(1.0)).abs() < 1e-12);
        assert_eq!(a[[0, 1]], a[[1, 2]]);
        assert!(a[[0, 2]].abs() < 1e-12);
        assert!((a[[0, 2]] - oracle(2.0)).abs() < 1e-12);
        assert_eq!(a.diag().to_vec(), vec![1.0; 3]);
    }

    #[test]
    fn distance_monotone_and_symmetric() {
        let dist = array![[0.0, 1.0, 3.0, 4.5], [1.0, 0.0, 2.0, 2.5], [3.0, 2.0, 0.0, 1.5], [
            4.5, 2.5, 1.5, 0.0
        ]];
        let a = distance_adjacency_from(&dist).unwrap().values;
        assert_eq!(a, a.t());
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                pairs.push((dist[[i, j]], a[[i, j]]));
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        assert!(pairs.windows(2).all(|w| w[0].1 > w[1].1));
    }

    #[test]
    fn large_distances_do_not_overflow() {
        let dist = array![[0.0, 900.0, 2000.0], [900.0, 0.0, 1500.0], [2000.0, 1500.0, 0.0]];
        let a = distance_adjacency_from(&dist).unwrap().values;
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(a[[0, 1]], 1.0);
        assert_eq!(a[[0, 2]], 0.0);
    }

    #[test]
    fn degenerate_geometry() {
        let dist = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        assert!(matches!(distance_adjacency_from(&dist), Err(GraphError::DegenerateGeometry(_))));
        assert!(matches!(
            distance_adjacency_from(&array![[0.0]]),
            Err(GraphError::TooFewPois)
        ));
    }

    #[test]
    fn fuse_dims_and_mismatch() {
        let zc = EmbeddingTable::new(Array2::ones((28, 12)));
        let zd = EmbeddingTable::new(Array2::zeros((28, 24)));
        let z = fuse_embeddings(&zc, &zd).unwrap();
        assert_eq!(z.dim(), 36);
        assert_eq!(z.z.row(3).to_vec()[..12], [1.0; 12]);
        let empty = EmbeddingTable::new(Array2::zeros((28, 0)));
        assert_eq!(fuse_embeddings(&empty, &zd).unwrap(), zd);
        let other = EmbeddingTable::new(Array2::zeros((29, 24)));
        assert!(matches!(fuse_embeddings(&zc, &other), Err(GraphError::ShapeMismatch(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = array![[1.0, 0.7, 0.1, 0.0], [0.7, 1.0, 0.4, 0.2], [0.1, 0.4, 1.0, 0.9], [
            0.0, 0.2, 0.9, 1.0
        ]];
        let p = normalized_adjacency(&a);
        let cfg = GaeConfig { embed_dim: 3, hidden_dim: 5, ..GaeConfig::distance(4) };
        for loss in [LossKind::Mse, LossKind::CrossEntropy] {
            let target = if loss == LossKind::Mse { a.clone() } else { a.mapv(|v| v.round()) };
            let model = GraphAutoencoder::init(4, &cfg);
            let (_, g1, g2) = model.loss_and_grads(&p, &target, loss);
            let h = 1e-6;
            for (which, grad) in [(0, &g1), (1, &g2)] {
                for idx in [(0, 0), (1, 2), (3, 1)] {
                    let mut plus = model.clone();
                    let mut minus = model.clone();
                    let (wp, wm) = if which == 0 {
                        (&mut plus.w1, &mut minus.w1)
                    } else {
                        (&mut plus.w2, &mut minus.w2)
                    };
                    if idx.0 >= wp.nrows() || idx.1 >= wp.ncols() {
                        continue;
                    }
                    wp[idx] += h;
                    wm[idx] -= h;
                    let fd = (plus.loss(&p, &target, loss) - minus.loss(&p, &target, loss)) / (2.0 * h);
                    assert!(
                        (fd - grad[idx]).abs() < 1e-5 * (1.0 + fd.abs()),
                        "{loss:?} w{} {idx:?}: fd {fd} vs analytic {}",
                        which + 1,
                        grad[idx]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let adj = build_category_adjacency(&catalog(&["a", "a", "b", "b", "c"]));
        let cfg = GaeConfig { learning_rate: 0.0, epochs: 5, ..GaeConfig::category(1) };
        let run = train_gae(&adj, &cfg).unwrap();
        let init = GraphAutoencoder::init(5, &cfg);
        assert_eq!(run.model, init);
        assert!(run.loss_history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn config_mismatch_rejected() {
        let adj = build_category_adjacency(&catalog(&["a", "b"]));
        assert!(matches!(
            train_gae(&adj, &GaeConfig::distance(0)),
            Err(GraphError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let cat = catalog(&["a", "b", "a", "c", "b", "a"]);
        let adj = build_distance_adjacency(&cat).unwrap();
        let cfg = GaeConfig { epochs: 30, ..GaeConfig::distance(9) };
        let r1 = train_gae(&adj, &cfg).unwrap();
        let r2 = train_gae(&adj, &cfg).unwrap();
        assert_eq!(r1.embeddings, r2.embeddings);
        assert!(r1.best_loss <= r1.loss_history[0]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let cat = catalog(&["a", "b", "a", "c"]);
        let cfg = GaeConfig { epochs: 10, ..GaeConfig::category(2) };
        let run = train_gae(&build_category_adjacency(&cat), &cfg).unwrap();
        let ck = EmbeddingCheckpoint::new(run.embeddings.clone(), &cat, &[&cfg], "category");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        ck.save(&path).unwrap();
        let back = EmbeddingCheckpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.embeddings.z.iter().zip(run.embeddings.z.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
