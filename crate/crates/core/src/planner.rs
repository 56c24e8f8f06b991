//! Query-time generation of k alternative itineraries.
//!
//! Each round picks a prominent POI (the most relevant among the least
//! used so far), builds an itinerary through it with the LSTM pair or the
//! sampler, and updates the occurrence counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PoiId;
use crate::itrnet::{Direction, ItrError, ItrNet, PoiMask};
use crate::sampler::{sample_itinerary, ConstraintSet, SamplerConfig, SamplerError};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("POI id {0} is not in the catalog")]
    InvalidId(PoiId),
    #[error("no POI is eligible as prominent")]
    NoEligiblePoi,
    #[error("the lstm method does not support constraints; use the sampler")]
    ConstraintUnsupported,
    #[error("no candidate POI left for a required slot")]
    ExhaustedCandidates,
    #[error(transparent)]
    Model(#[from] ItrError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Lstm,
    Sampler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub s: PoiId,
    pub d: PoiId,
    pub k: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
}

impl Query {
    pub fn new(s: PoiId, d: PoiId, k: usize) -> Self {
        Self { s, d, k, length: None, method: Method::Lstm, seed: 0 }
    }

    pub fn with_length(mut self, len: usize) -> Self {
        self.length = Some(len);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n_pois: usize) -> Result<(), PlanError> {
        for id in [self.s, self.d] {
            if id >= n_pois {
                return Err(PlanError::InvalidId(id));
            }
        }
        if self.s == self.d {
            return Err(PlanError::InvalidQuery("source and destination must differ".into()));
        }
        if self.k == 0 {
            return Err(PlanError::InvalidQuery("k must be at least 1".into()));
        }
        if let Some(l) = self.length {
            if l < 3 {
                return Err(PlanError::InvalidQuery("L must be at least 3".into()));
            }
            if l > n_pois {
                return Err(PlanError::InvalidQuery(format!("L = {l} exceeds the {n_pois} catalog POIs")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub pois: Vec<PoiId>,
    pub perplexity: f64,
    pub prominent: PoiId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSet {
    pub query: Query,
    pub itineraries: Vec<Itinerary>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceCounter {
    pub counts: Vec<usize>,
}

impl OccurrenceCounter {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn record(&mut self, itinerary: &[PoiId]) {
        for &p in itinerary {
            self.counts[p] += 1;
        }
    }

    pub fn get(&self, p: PoiId) -> usize {
        self.counts[p]
    }
}

/// Average of the forward and backward probabilities of each POI filling
/// the single interior slot of `(s, ·, d)`. `s` and `d` score zero.
pub fn relevancy_scores(net: &ItrNet, s: PoiId, d: PoiId) -> Result<Vec<f64>, PlanError> {
    let n = net.n_pois();
    for id in [s, d] {
        if id >= n {
            return Err(PlanError::InvalidId(id));
        }
    }
    if s == d {
        return Err(PlanError::InvalidQuery("source and destination must differ".into()));
    }
    let mask = PoiMask::from_ids(n, [s, d]);
    let pf = net.forward_step_probs(&[s], s, d, &mask)?;
    let pb = net.backward_step_probs(&[d], s, d, &mask)?;
    Ok(pf.probs.iter().zip(&pb.probs).map(|(f, b)| 0.5 * (f + b)).collect())
}

/// Highest-scoring POI among those with the fewest occurrences, excluding
/// `s` and `d`. Ties go to the lowest id.
pub fn pick_prominent(
    scores: &[f64],
    occ: &OccurrenceCounter,
    s: PoiId,
    d: PoiId,
) -> Result<PoiId, PlanError> {
    let eligible = || (0..scores.len()).filter(|&p| p != s && p != d);
    let min = eligible().map(|p| occ.get(p)).min().ok_or(PlanError::NoEligiblePoi)?;
    let mut best: Option<PoiId> = None;
    for p in eligible().filter(|&p| occ.get(p) == min) {
        if best.is_none_or(|b| scores[p] > scores[b]) {
            best = Some(p);
        }
    }
    best.ok_or(PlanError::NoEligiblePoi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfDirection {
    /// From the anchor back to the source, with the backward model.
    BackwardFirstHalf,
    /// From the anchor on to the destination, with the forward model.
    ForwardSecondHalf,
}

/// Length of a half itinerary, counting the anchor and the endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfLength {
    /// The endpoint goes to the slot where the model rates it most likely.
    Free { max_len: usize },
    Exact(usize),
}

impl HalfLength {
    fn max(self) -> usize {
        match self {
            HalfLength::Free { max_len } => max_len,
            HalfLength::Exact(n) => n,
        }
    }
}

/// Builds one half itinerary around `anchor`, in travel order.
///
/// `context` is the already built other half in travel order (empty when
/// this half is built first); it is fed to the encoder before the anchor
/// and its POIs are excluded. The endpoint is placed at the slot where the
/// model gives it the highest probability and is never chosen as an
/// intermediate POI.
pub fn generate_half(
    net: &ItrNet,
    anchor: PoiId,
    s: PoiId,
    d: PoiId,
    direction: HalfDirection,
    length: HalfLength,
    context: &[PoiId],
) -> Result<Vec<PoiId>, PlanError> {
    let n = net.n_pois();
    if length.max() < 2 {
        return Err(PlanError::InvalidQuery("a half itinerary holds at least 2 POIs".into()));
    }
    let (dir, own_end, other_end) = match direction {
        HalfDirection::BackwardFirstHalf => (Direction::Backward, s, d),
        HalfDirection::ForwardSecondHalf => (Direction::Forward, d, s),
    };
    let mut cur = net.cursor(dir, s, d)?;
    let mut mask = PoiMask::from_ids(n, context.iter().copied());
    mask.insert(other_end);
    mask.insert(anchor);
    mask.remove(own_end);
    let feed: Vec<PoiId> = match dir {
        Direction::Backward => context.iter().rev().copied().collect(),
        _ => context.to_vec(),
    };
    for &p in feed.iter().filter(|&&p| p != anchor) {
        cur.push(p)?;
    }
    cur.push(anchor)?;
    let end_mask = PoiMask::from_ids(n, [own_end]);
    let open = PoiMask::none(n);

    let max_len = length.max();
    let mut intermediates: Vec<PoiId> = Vec::new();
    let mut end_probs: Vec<f64> = Vec::new();
    // end_probs[i] is the probability of the endpoint at distance i + 1
    // from the anchor, given i intermediates
    for i in 0..max_len - 1 {
        let probs = match cur.probs(&mask) {
            Ok(p) => p,
            Err(ItrError::AllMasked) => break,
            Err(e) => return Err(e.into()),
        };
        // read from the unmasked distribution: renormalizing after masking
        // earlier intermediates would favour later slots
        end_probs.push(cur.probs(&open)?.get(own_end));
        if i + 2 == max_len {
            break;
        }
        let Some(next) = probs.argmax_excluding(&end_mask) else { break };
        intermediates.push(next);
        mask.insert(next);
        cur.push(next)?;
    }
    let n_mid = match length {
        HalfLength::Exact(k) => {
            if intermediates.len() < k - 2 {
                return Err(PlanError::ExhaustedCandidates);
            }
            k - 2
        }
        HalfLength::Free { .. } => {
            if end_probs.is_empty() {
                return Err(PlanError::ExhaustedCandidates);
            }
            // first maximum: the shortest half among equally likely ones
            let mut best = 0;
            for (i, &p) in end_probs.iter().enumerate() {
                if p > end_probs[best] {
                    best = i;
                }
            }
            best
        }
    };
    let mut half = vec![anchor];
    half.extend_from_slice(&intermediates[..n_mid]);
    half.push(own_end);
    if direction == HalfDirection::BackwardFirstHalf {
        half.reverse();
    }
    Ok(half)
}

fn join(first: &[PoiId], second: &[PoiId]) -> Vec<PoiId> {
    let mut out = first.to_vec();
    out.extend_from_slice(&second[1..]);
    out
}

/// Both construction orders for one prominent POI, before selection.
#[derive(Debug, PartialEq)]
pub struct LstmCandidates {
    pub backward_first: Result<Itinerary, PlanError>,
    pub forward_first: Result<Itinerary, PlanError>,
}

pub fn lstm_candidates(
    net: &ItrNet,
    prominent: PoiId,
    s: PoiId,
    d: PoiId,
    length: Option<usize>,
) -> Result<LstmCandidates, PlanError> {
    let n = net.n_pois();
    for id in [prominent, s, d] {
        if id >= n {
            return Err(PlanError::InvalidId(id));
        }
    }
    if prominent == s || prominent == d || s == d {
        return Err(PlanError::InvalidQuery("prominent, s and d must be distinct".into()));
    }
    let first_len = match length {
        Some(l) => HalfLength::Free { max_len: l - 1 },
        None => HalfLength::Free { max_len: net.max_route_len.max(2) },
    };
    let second_len = |first: &[PoiId]| match length {
        Some(l) => HalfLength::Exact(l + 1 - first.len()),
        None => first_len,
    };
    let build = |order: HalfDirection| -> Result<Itinerary, PlanError> {
        let pois = match order {
            HalfDirection::BackwardFirstHalf => {
                let a = generate_half(net, prominent, s, d, order, first_len, &[])?;
                let b = generate_half(
                    net,
                    prominent,
                    s,
                    d,
                    HalfDirection::ForwardSecondHalf,
                    second_len(&a),
                    &a,
                )?;
                join(&a, &b)
            }
            HalfDirection::ForwardSecondHalf => {
                let b = generate_half(net, prominent, s, d, order, first_len, &[])?;
                let a = generate_half(
                    net,
                    prominent,
                    s,
                    d,
                    HalfDirection::BackwardFirstHalf,
                    second_len(&b),
                    &b,
                )?;
                join(&a, &b)
            }
        };
        let perplexity = net.route_perplexity(&pois, s, d)?;
        Ok(Itinerary { pois, perplexity, prominent })
    };
    Ok(LstmCandidates {
        backward_first: build(HalfDirection::BackwardFirstHalf),
        forward_first: build(HalfDirection::ForwardSecondHalf),
    })
}

/// The lower-perplexity of the two construction orders (backward-first on
/// ties). With a fixed `length` the result has exactly that many POIs.
pub fn generate_itinerary_lstm(
    net: &ItrNet,
    prominent: PoiId,
    s: PoiId,
    d: PoiId,
    length: Option<usize>,
) -> Result<Itinerary, PlanError> {
    let c = lstm_candidates(net, prominent, s, d, length)?;
    match (c.backward_first, c.forward_first) {
        (Ok(a), Ok(b)) => Ok(if b.perplexity < a.perplexity { b } else { a }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Default iteration budget when the sampler runs without a fixed length.
pub fn free_sampler_iterations(net: &ItrNet) -> usize {
    (5 * net.max_route_len.saturating_sub(2)).max(5)
}

fn sampler_config(net: &ItrNet, query: &Query, round: usize) -> SamplerConfig {
    let seed = query.seed.wrapping_add(round as u64);
    match query.length {
        Some(l) => SamplerConfig::fixed_length(l, seed),
        None => SamplerConfig::free_length(free_sampler_iterations(net), seed),
    }
}

/// Top-k alternative itineraries for `query`.
pub fn recommend_topk(
    net: &ItrNet,
    query: &Query,
    constraints: Option<&ConstraintSet>,
) -> Result<RecommendationSet, PlanError> {
    query.validate(net.n_pois())?;
    let constraints = constraints.cloned().unwrap_or_default();
    if query.method == Method::Lstm && !constraints.is_empty() {
        return Err(PlanError::ConstraintUnsupported);
    }
    let scores = relevancy_scores(net, query.s, query.d)?;
    let mut occ = OccurrenceCounter::new(net.n_pois());
    let mut itineraries = Vec::with_capacity(query.k);
    for round in 0..query.k {
        let prominent = pick_prominent(&scores, &occ, query.s, query.d)?;
        let it = match query.method {
            Method::Lstm => generate_itinerary_lstm(net, prominent, query.s, query.d, query.length)?,
            Method::Sampler => sample_itinerary(
                net,
                prominent,
                query.s,
                query.d,
                &constraints,
                &sampler_config(net, query, round),
            )?,
        };
        occ.record(&it.pois);
        itineraries.push(it);
    }
    Ok(RecommendationSet { query: query.clone(), itineraries })
}
