//! Source/destination-conditioned forward and backward LSTMs that score
//! every POI for an open slot of a partial itinerary.
//!
//! The forward model reads a prefix `(r_1, ..., r_{t-1})` and scores the
//! POI at slot `t`; the backward model reads the suffix in reverse,
//! `(r_T, ..., r_{t+1})`, and scores the same slot. Each step's input is the
//! embedding of the current POI concatenated with the source and
//! destination embeddings. Scores come from a two-layer perceptron over
//! `z_p ‖ h` followed by a softmax restricted to unmasked POIs.

mod lstm;
mod train;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lstm::{LstmCell, Scorer};
pub use train::{train_itrnet, TrainReport};

use crate::dataset::PoiId;
use crate::poigraph::EmbeddingTable;

#[derive(Debug, Error, PartialEq)]
pub enum ItrError {
    #[error("POI id {0} is outside the catalog")]
    InvalidId(PoiId),
    #[error("empty prefix/suffix")]
    EmptyPrefix,
    #[error("every POI is masked")]
    AllMasked,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("position t={t} invalid for length T={len}")]
    BadPosition { t: usize, len: usize },
    #[error("training diverged at epoch {0} (non-finite loss)")]
    NonFiniteLoss(usize),
    #[error("no training routes")]
    EmptyTrainingSet,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Combined,
}

/// A distribution over all catalog POIs for one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    pub probs: Vec<f64>,
    pub direction: Direction,
    /// Forward: the 1-based slot being predicted. Backward: the number of
    /// suffix POIs read. Combined: the slot `t`.
    pub position: usize,
    /// Softmax mass the unmasked POIs held before renormalization.
    pub support_mass: f64,
}

impl ProbVector {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, poi: PoiId) -> f64 {
        self.probs[poi]
    }

    /// Highest-probability POI with positive mass; ties go to the lowest id.
    pub fn argmax(&self) -> Option<PoiId> {
        argmax_positive(&self.probs)
    }

    /// Like [`ProbVector::argmax`] but ignoring the POIs in `skip`.
    pub fn argmax_excluding(&self, skip: &PoiMask) -> Option<PoiId> {
        let mut best: Option<(PoiId, f64)> = None;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 && !skip.contains(i) && best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub(crate) fn argmax_positive(values: &[f64]) -> Option<PoiId> {
    let mut best: Option<(PoiId, f64)> = None;
    for (i, &p) in values.iter().enumerate() {
        if p > 0.0 && best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i)
}

/// Set of POIs excluded from a distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoiMask {
    blocked: Vec<bool>,
}

impl PoiMask {
    pub fn none(n: usize) -> Self {
        Self { blocked: vec![false; n] }
    }

    pub fn from_ids(n: usize, ids: impl IntoIterator<Item = PoiId>) -> Self {
        let mut m = Self::none(n);
        for id in ids {
            m.insert(id);
        }
        m
    }

    /// Everything except `keep`.
    pub fn all_except(n: usize, keep: impl IntoIterator<Item = PoiId>) -> Self {
        let mut m = Self { blocked: vec![true; n] };
        for id in keep {
            m.blocked[id] = false;
        }
        m
    }

    pub fn insert(&mut self, id: PoiId) {
        self.blocked[id] = true;
    }

    pub fn remove(&mut self, id: PoiId) {
        self.blocked[id] = false;
    }

    pub fn contains(&self, id: PoiId) -> bool {
        self.blocked[id]
    }

    pub fn n(&self) -> usize {
        self.blocked.len()
    }

    pub fn count_open(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub mlp_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Share of training routes held out for early stopping (0 disables).
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            mlp_dim: 30,
            learning_rate: 0.001,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            validation_fraction: 0.1,
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ItrError> {
        if self.hidden_size == 0 || self.mlp_dim == 0 || self.batch_size == 0 {
            return Err(ItrError::InvalidConfig("sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ItrError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ItrError::InvalidConfig("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One direction: recurrent encoder plus scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqModel {
    pub lstm: LstmCell,
    pub scorer: Scorer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItrNet {
    pub embeddings: EmbeddingTable,
    pub forward: SeqModel,
    pub backward: SeqModel,
    pub config: TrainConfig,
    /// Longest route seen in training; the default half-itinerary bound.
    pub max_route_len: usize,
    pub embeddings_hash: String,
    pub corpus_hash: String,
}

impl ItrNet {
    /// Randomly initialized model over frozen `embeddings`.
    pub fn init(embeddings: EmbeddingTable, config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let e = embeddings.dim();
        let mut make = || SeqModel {
            lstm: LstmCell::init(3 * e, config.hidden_size, &mut rng),
            scorer: Scorer::init(e, config.hidden_size, config.mlp_dim, &mut rng),
        };
        let forward = make();
        let backward = make();
        Self {
            embeddings_hash: crate::hash::content_hash(&embeddings),
            embeddings,
            forward,
            backward,
            config,
            max_route_len: 3,
            corpus_hash: String::new(),
        }
    }

    pub fn n_pois(&self) -> usize {
        self.embeddings.n()
    }

    pub(crate) fn model(&self, dir: Direction) -> &SeqModel {
        match dir {
            Direction::Backward => &self.backward,
            _ => &self.forward,
        }
    }

    fn check_id(&self, id: PoiId) -> Result<(), ItrError> {
        if id < self.n_pois() {
            Ok(())
        } else {
            Err(ItrError::InvalidId(id))
        }
    }

    /// Starts an incremental encoder for one direction.
    pub fn cursor(&self, dir: Direction, s: PoiId, d: PoiId) -> Result<Cursor<'_>, ItrError> {
        self.check_id(s)?;
        self.check_id(d)?;
        let model = self.model(dir);
        let z = &self.embeddings.z;
        let mut context = z.row(s).to_vec();
        context.extend(z.row(d).iter());
        let h = model.lstm.hidden();
        Ok(Cursor {
            net: self,
            dir,
            projected: model.scorer.project_pois(z),
            context,
            h: vec![0.0; h],
            c: vec![0.0; h],
            steps: 0,
        })
    }

    /// Distribution of the POI that follows `prefix`.
    pub fn forward_step_probs(
        &self,
        prefix: &[PoiId],
        s: PoiId,
        d: PoiId,
        mask: &PoiMask,
    ) -> Result<ProbVector, ItrError> {
        self.step_probs(Direction::Forward, prefix, s, d, mask)
    }

    /// Distribution of the POI that precedes a suffix given in reverse
    /// order (`suffix_rev[0]` is the last POI of the itinerary).
    pub fn backward_step_probs(
        &self,
        suffix_rev: &[PoiId],
        s: PoiId,
        d: PoiId,
        mask: &PoiMask,
    ) -> Result<ProbVector, ItrError> {
        self.step_probs(Direction::Backward, suffix_rev, s, d, mask)
    }

    fn step_probs(
        &self,
        dir: Direction,
        seq: &[PoiId],
        s: PoiId,
        d: PoiId,
        mask: &PoiMask,
    ) -> Result<ProbVector, ItrError> {
        if seq.is_empty() {
            return Err(ItrError::EmptyPrefix);
        }
        if mask.n() != self.n_pois() {
            return Err(ItrError::ShapeMismatch(format!(
                "mask over {} POIs, model has {}",
                mask.n(),
                self.n_pois()
            )));
        }
        let mut cur = self.cursor(dir, s, d)?;
        for &p in seq {
            cur.push(p)?;
        }
        cur.probs(mask)
    }

    /// Negative log-likelihood of `itinerary` under the forward model,
    /// summed over slots 2..=|I|. Each slot is scored with the POIs already
    /// placed masked out. A zero-probability step gives `+inf`.
    pub fn route_perplexity(&self, itinerary: &[PoiId], s: PoiId, d: PoiId) -> Result<f64, ItrError> {
        if itinerary.len() < 2 {
            return Err(ItrError::EmptyPrefix);
        }
        for &p in itinerary {
            self.check_id(p)?;
        }
        let mut cur = self.cursor(Direction::Forward, s, d)?;
        let mut mask = PoiMask::none(self.n_pois());
        let mut total = 0.0;
        for w in itinerary.windows(2) {
            cur.push(w[0])?;
            mask.insert(w[0]);
            if mask.contains(w[1]) {
                return Ok(f64::INFINITY);
            }
            let p = cur.probs(&mask)?.get(w[1]);
            if p <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total -= p.ln();
        }
        Ok(total.max(0.0))
    }
}

/// Incremental LSTM state for one direction and one (s, d) query.
#[derive(Clone, Debug)]
pub struct Cursor<'a> {
    net: &'a ItrNet,
    dir: Direction,
    projected: Array2<f64>,
    context: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
    steps: usize,
}

impl Cursor<'_> {
    pub fn push(&mut self, poi: PoiId) -> Result<(), ItrError> {
        self.net.check_id(poi)?;
        let mut x = self.net.embeddings.z.row(poi).to_vec();
        x.extend_from_slice(&self.context);
        let (h, c) = self.net.model(self.dir).lstm.step(&x, &self.h, &self.c);
        self.h = h;
        self.c = c;
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn logits(&self) -> Vec<f64> {
        self.net.model(self.dir).scorer.logits(&self.projected, &self.h)
    }

    pub fn probs(&self, mask: &PoiMask) -> Result<ProbVector, ItrError> {
        if self.steps == 0 {
            return Err(ItrError::EmptyPrefix);
        }
        let (probs, support_mass) = masked_softmax(&self.logits(), mask)?;
        let position = match self.dir {
            Direction::Forward => self.steps + 1,
            _ => self.steps,
        };
        Ok(ProbVector { probs, direction: self.dir, position, support_mass })
    }
}

/// Softmax over unmasked entries; masked entries are exactly zero. Also
/// returns the share of full-softmax mass that the unmasked entries held.
pub fn masked_softmax(logits: &[f64], mask: &PoiMask) -> Result<(Vec<f64>, f64), ItrError> {
    let max_all = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_open = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| !mask.contains(*i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_open == f64::NEG_INFINITY {
        return Err(ItrError::AllMasked);
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask.contains(i) { 0.0 } else { (v - max_open).exp() })
        .collect();
    let open_sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= open_sum;
    }
    let full_sum: f64 = logits.iter().map(|&v| (v - max_all).exp()).sum();
    let support_mass = open_sum * (max_open - max_all).exp() / full_sum;
    Ok((probs, support_mass))
}

/// `P_c = β P_f + (1 - β) P_b` with `β = t / (T - 1)` for a 1-based slot `t`.
pub fn combined_step_probs(
    pf: &ProbVector,
    pb: &ProbVector,
    t: usize,
    len: usize,
) -> Result<ProbVector, ItrError> {
    if pf.len() != pb.len() {
        return Err(ItrError::ShapeMismatch(format!("{} vs {}", pf.len(), pb.len())));
    }
    if len < 2 || t < 1 || t > len - 1 {
        return Err(ItrError::BadPosition { t, len });
    }
    let beta = t as f64 / (len - 1) as f64;
    let mut probs: Vec<f64> =
        pf.probs.iter().zip(&pb.probs).map(|(f, b)| beta * f + (1.0 - beta) * b).collect();
    let sum: f64 = probs.iter().sum();
    if sum <= 0.0 {
        return Err(ItrError::AllMasked);
    }
    if (sum - 1.0).abs() > 1e-12 {
        for p in &mut probs {
            *p /= sum;
        }
    }
    Ok(ProbVector { probs, direction: Direction::Combined, position: t, support_mass: sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_net(n: usize, seed: u64) -> ItrNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        ItrNet::init(
            EmbeddingTable::new(z),
            TrainConfig { hidden_size: 6, mlp_dim: 5, seed, ..TrainConfig::default() },
        )
    }

    fn pv(probs: Vec<f64>, direction: Direction) -> ProbVector {
        ProbVector { probs, direction, position: 1, support_mass: 1.0 }
    }

    #[test]
    fn singleton_support_gets_all_mass() {
        let net = toy_net(7, 1);
        let mask = PoiMask::all_except(7, [4]);
        let p = net.forward_step_probs(&[0], 0, 6, &mask).unwrap();
        assert_eq!(p.probs[4], 1.0);
        assert!(p.probs.iter().enumerate().all(|(i, &v)| i == 4 || v == 0.0));
        let b = net.backward_step_probs(&[6], 0, 6, &mask).unwrap();
        assert_eq!(b.probs[4], 1.0);
    }

    #[test]
    fn unmasked_sums_to_one() {
        let net = toy_net(9, 2);
        let none = PoiMask::none(9);
        let f = net.forward_step_probs(&[0, 3, 5], 0, 8, &none).unwrap();
        let b = net.backward_step_probs(&[8, 2], 0, 8, &none).unwrap();
        for p in [&f, &b] {
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((p.support_mass - 1.0).abs() < 1e-12);
        }
        assert_eq!(f.position, 4);
    }

    #[test]
    fn zero_scorer_output_is_uniform() {
        let mut net = toy_net(5, 3);
        net.forward.scorer.w2.fill(0.0);
        let mask = PoiMask::from_ids(5, [0, 4]);
        let p = net.forward_step_probs(&[0], 0, 4, &mask).unwrap();
        for i in 1..4 {
            assert!((p.probs[i] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_prefix_and_bad_ids() {
        let net = toy_net(4, 4);
        let none = PoiMask::none(4);
        assert_eq!(net.forward_step_probs(&[], 0, 3, &none), Err(ItrError::EmptyPrefix));
        assert_eq!(net.forward_step_probs(&[9], 0, 3, &none), Err(ItrError::InvalidId(9)));
        assert_eq!(net.backward_step_probs(&[3], 0, 11, &none), Err(ItrError::InvalidId(11)));
        let all = PoiMask::all_except(4, []);
        assert_eq!(net.forward_step_probs(&[0], 0, 3, &all), Err(ItrError::AllMasked));
    }

    #[test]
    fn combined_endpoints_and_midpoint() {
        let f = pv(vec![1.0, 0.0], Direction::Forward);
        let b = pv(vec![0.0, 1.0], Direction::Backward);
        assert_eq!(combined_step_probs(&f, &b, 1, 3).unwrap().probs, vec![0.5, 0.5]);
        assert_eq!(combined_step_probs(&f, &b, 4, 5).unwrap().probs, f.probs);
        let same = combined_step_probs(&f, &f, 1, 4).unwrap();
        assert_eq!(same.probs, f.probs);
        assert!(matches!(combined_step_probs(&f, &b, 0, 3), Err(ItrError::BadPosition { .. })));
        assert!(matches!(combined_step_probs(&f, &b, 3, 3), Err(ItrError::BadPosition { .. })));
        let short = pv(vec![1.0], Direction::Forward);
        assert!(matches!(combined_step_probs(&f, &short, 1, 3), Err(ItrError::ShapeMismatch(_))));
    }

    #[test]
    fn perplexity_uniform_closed_form() {
        let n = 6;
        let mut net = toy_net(n, 5);
        net.forward.scorer.w2.fill(0.0);
        // slot k (k = 2..=L) sees n - (k - 1) open POIs
        let it = [0, 2, 3, 5];
        let expected: f64 = (1..it.len()).map(|k| ((n - k) as f64).ln()).sum();
        let ppl = net.route_perplexity(&it, 0, 5).unwrap();
        assert!((ppl - expected).abs() < 1e-12, "{ppl} vs {expected}");
    }

    #[test]
    fn perplexity_of_repeat_is_infinite() {
        let net = toy_net(5, 6);
        assert_eq!(net.route_perplexity(&[0, 2, 0, 4], 0, 4).unwrap(), f64::INFINITY);
    }

    #[test]
    fn masked_softmax_support_mass() {
        let logits = [0.0, (2.0f64).ln(), 0.0];
        let (p, mass) = masked_softmax(&logits, &PoiMask::from_ids(3, [1])).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
        assert!((mass - 0.5).abs() < 1e-15);
    }
}
