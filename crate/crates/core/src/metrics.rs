//! Popularity and diversity scores for recommendation sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PoiId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("recommendation set is empty")]
    EmptyRecommendation,
    #[error("diversity needs at least two itineraries")]
    SingletonSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityMetric {
    F1,
    PairsF1,
}

/// Range of trade-off weights the combined score is calibrated for.
pub const ALPHA_RANGE: (f64, f64) = (0.1, 0.9);

fn harmonic(common: usize, n_pred: usize, n_true: usize) -> f64 {
    if common == 0 || n_pred == 0 || n_true == 0 {
        return 0.0;
    }
    let p = common as f64 / n_pred as f64;
    let r = common as f64 / n_true as f64;
    2.0 * p * r / (p + r)
}

fn poi_set(seq: &[PoiId], include_endpoints: bool) -> BTreeSet<PoiId> {
    if include_endpoints || seq.len() < 2 {
        seq.iter().copied().collect()
    } else {
        seq[1..seq.len() - 1].iter().copied().collect()
    }
}

/// F1 between the POI sets of a route and an itinerary.
pub fn f1_score(route: &[PoiId], itinerary: &[PoiId], include_endpoints: bool) -> f64 {
    let a = poi_set(route, include_endpoints);
    let b = poi_set(itinerary, include_endpoints);
    harmonic(a.intersection(&b).count(), b.len(), a.len())
}

fn ordered_pairs(seq: &[PoiId]) -> BTreeSet<(PoiId, PoiId)> {
    let mut out = BTreeSet::new();
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            out.insert((seq[i], seq[j]));
        }
    }
    out
}

/// F1 over ordered pairs `(u, v)` where `u` comes somewhere before `v`.
pub fn pairs_f1_score(route: &[PoiId], itinerary: &[PoiId]) -> f64 {
    let a = ordered_pairs(route);
    let b = ordered_pairs(itinerary);
    harmonic(a.intersection(&b).count(), b.len(), a.len())
}

/// Mean score over every (recommended, ground truth) pair.
pub fn popularity_score<R: AsRef<[PoiId]>, G: AsRef<[PoiId]>>(
    recommended: &[R],
    ground_truth: &[G],
    metric: PopularityMetric,
) -> Result<f64, MetricError> {
    if ground_truth.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    if recommended.is_empty() {
        return Err(MetricError::EmptyRecommendation);
    }
    let mut total = 0.0;
    for rec in recommended {
        for gt in ground_truth {
            total += match metric {
                PopularityMetric::F1 => f1_score(gt.as_ref(), rec.as_ref(), true),
                PopularityMetric::PairsF1 => pairs_f1_score(gt.as_ref(), rec.as_ref()),
            };
        }
    }
    Ok(total / (recommended.len() * ground_truth.len()) as f64)
}

/// Mean dissimilarity `1 - F1` over all ordered pairs of distinct
/// itineraries, comparing interiors only.
pub fn diversity_score<R: AsRef<[PoiId]>>(recommended: &[R]) -> Result<f64, MetricError> {
    let k = recommended.len();
    if k < 2 {
        return Err(MetricError::SingletonSet);
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += 1.0 - f1_score(recommended[i].as_ref(), recommended[j].as_ref(), false);
            }
        }
    }
    Ok(total / (k * (k - 1)) as f64)
}

/// `alpha * pop + (1 - alpha) * div`. Weights outside [`ALPHA_RANGE`] are
/// computed but logged.
pub fn combined_score(pop: f64, div: f64, alpha: f64) -> f64 {
    if !(ALPHA_RANGE.0..=ALPHA_RANGE.1).contains(&alpha) {
        log::warn!("alpha {alpha} is outside [{}, {}]", ALPHA_RANGE.0, ALPHA_RANGE.1);
    }
    alpha * pop + (1.0 - alpha) * div
}
