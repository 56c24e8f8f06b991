//! Cross-validated evaluation: train on all folds but one, query every
//! (source, destination) pair of the held-out fold, score against all
//! historical routes for that pair.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FoldAssignment, PoiId, Route};
use crate::itrnet::ItrNet;
use crate::metrics::{combined_score, diversity_score, popularity_score, PopularityMetric};
use crate::planner::{recommend_topk, Method, Query};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold {fold}: training failed: {message}")]
    Training { fold: usize, message: String },
    #[error("fold {0} does not exist")]
    InvalidFold(usize),
    #[error("fold assignment covers {assigned} routes, dataset has {routes}")]
    FoldMismatch { assigned: usize, routes: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    #[serde(rename = "L")]
    pub length: Option<usize>,
    pub method: Method,
    pub alphas: Vec<f64>,
    pub seed: u64,
    /// Folds to hold out; all of them when `None`.
    pub folds: Option<Vec<usize>>,
}

impl EvalConfig {
    pub fn new(k: usize, length: Option<usize>, method: Method) -> Self {
        Self { k, length, method, alphas: vec![0.1, 0.3, 0.5, 0.7, 0.9], seed: 0, folds: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub fold: usize,
    pub s: PoiId,
    pub d: PoiId,
    pub k: usize,
    #[serde(rename = "L")]
    pub length: Option<usize>,
    pub f1: Option<f64>,
    pub pairs_f1: Option<f64>,
    /// Absent for k = 1.
    pub diversity: Option<f64>,
    /// One entry per configured alpha, absent when diversity is.
    pub combined: Vec<Option<f64>>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub queries: usize,
    pub failed: usize,
    pub f1: Option<f64>,
    pub pairs_f1: Option<f64>,
    pub diversity: Option<f64>,
    pub combined: Vec<Option<f64>>,
    pub mean_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub config: EvalConfig,
    pub config_hash: String,
    pub fold_seed: u64,
    pub records: Vec<QueryRecord>,
    pub per_fold: Vec<(usize, ScoreSummary)>,
    /// Mean of the per-fold means.
    pub overall: ScoreSummary,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(records: &[&QueryRecord], n_alphas: usize) -> ScoreSummary {
    let ok: Vec<&&QueryRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    ScoreSummary {
        queries: records.len(),
        failed: records.len() - ok.len(),
        f1: mean(ok.iter().filter_map(|r| r.f1)),
        pairs_f1: mean(ok.iter().filter_map(|r| r.pairs_f1)),
        diversity: mean(ok.iter().filter_map(|r| r.diversity)),
        combined: (0..n_alphas).map(|i| mean(ok.iter().filter_map(|r| r.combined[i]))).collect(),
        mean_seconds: mean(ok.iter().map(|r| r.seconds)),
    }
}

fn average_summaries(parts: &[ScoreSummary], n_alphas: usize) -> ScoreSummary {
    ScoreSummary {
        queries: parts.iter().map(|p| p.queries).sum(),
        failed: parts.iter().map(|p| p.failed).sum(),
        f1: mean(parts.iter().filter_map(|p| p.f1)),
        pairs_f1: mean(parts.iter().filter_map(|p| p.pairs_f1)),
        diversity: mean(parts.iter().filter_map(|p| p.diversity)),
        combined: (0..n_alphas).map(|i| mean(parts.iter().filter_map(|p| p.combined[i]))).collect(),
        mean_seconds: mean(parts.iter().filter_map(|p| p.mean_seconds)),
    }
}

/// Scores one query against its ground truth.
pub fn score_query(
    net: &ItrNet,
    query: &Query,
    ground_truth: &[Route],
    alphas: &[f64],
    fold: usize,
) -> QueryRecord {
    let start = Instant::now();
    let result = recommend_topk(net, query, None);
    let seconds = start.elapsed().as_secs_f64();
    let mut record = QueryRecord {
        fold,
        s: query.s,
        d: query.d,
        k: query.k,
        length: query.length,
        f1: None,
        pairs_f1: None,
        diversity: None,
        combined: vec![None; alphas.len()],
        seconds,
        error: None,
    };
    let set = match result {
        Ok(set) => set,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let recs: Vec<&[PoiId]> = set.itineraries.iter().map(|i| i.pois.as_slice()).collect();
    let gt: Vec<&[PoiId]> = ground_truth.iter().map(Route::pois).collect();
    match popularity_score(&recs, &gt, PopularityMetric::F1) {
        Ok(f1) => {
            record.f1 = Some(f1);
            record.pairs_f1 = popularity_score(&recs, &gt, PopularityMetric::PairsF1).ok();
            record.diversity = diversity_score(&recs).ok();
            if let Some(div) = record.diversity {
                record.combined = alphas.iter().map(|&a| Some(combined_score(f1, div, a))).collect();
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs the held-out evaluation. `train` builds a model from the training
/// routes of one fold.
pub fn evaluate_folds<F, E>(
    dataset: &Dataset,
    folds: &FoldAssignment,
    config: &EvalConfig,
    mut train: F,
) -> Result<EvaluationReport, EvalError>
where
    F: FnMut(usize, &[Route]) -> Result<ItrNet, E>,
    E: Display,
{
    if folds.assignment.len() != dataset.routes.len() {
        return Err(EvalError::FoldMismatch {
            assigned: folds.assignment.len(),
            routes: dataset.routes.len(),
        });
    }
    let all: Vec<usize> = (0..folds.n_folds()).collect();
    let selected = config.folds.clone().unwrap_or(all);
    if let Some(&bad) = selected.iter().find(|&&f| f >= folds.n_folds()) {
        return Err(EvalError::InvalidFold(bad));
    }
    let truth = dataset.ground_truth();
    let mut records = Vec::new();
    let mut per_fold = Vec::new();
    for &fold in &selected {
        let (train_idx, test_idx) = folds.split(fold);
        let train_routes: Vec<Route> = train_idx.iter().map(|&i| dataset.routes[i].clone()).collect();
        let net = train(fold, &train_routes)
            .map_err(|e| EvalError::Training { fold, message: e.to_string() })?;
        let pairs: BTreeSet<(PoiId, PoiId)> =
            test_idx.iter().map(|&i| dataset.routes[i].endpoints()).collect();
        let start = records.len();
        for (s, d) in pairs {
            let mut query = Query::new(s, d, config.k).with_method(config.method).with_seed(config.seed);
            query.length = config.length;
            records.push(score_query(&net, &query, truth.get(s, d), &config.alphas, fold));
        }
        let fold_records: Vec<&QueryRecord> = records[start..].iter().collect();
        per_fold.push((fold, summarize(&fold_records, config.alphas.len())));
    }
    let parts: Vec<ScoreSummary> = per_fold.iter().map(|(_, s)| s.clone()).collect();
    Ok(EvaluationReport {
        dataset: dataset.name.clone(),
        config: config.clone(),
        config_hash: crate::hash::content_hash(config),
        fold_seed: folds.seed,
        overall: average_summaries(&parts, config.alphas.len()),
        records,
        per_fold,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl EvaluationReport {
    /// One row per query.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> =
            ["fold", "s", "d", "k", "L", "f1", "pairs_f1", "diversity"].map(String::from).to_vec();
        header.extend(self.config.alphas.iter().map(|a| format!("comb_{a}")));
        header.extend(["seconds", "error"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.fold.to_string(),
                r.s.to_string(),
                r.d.to_string(),
                r.k.to_string(),
                r.length.map_or_else(String::new, |l| l.to_string()),
                cell(r.f1),
                cell(r.pairs_f1),
                cell(r.diversity),
            ];
            row.extend(r.combined.iter().map(|c| cell(*c)));
            row.push(format!("{:.6}", r.seconds));
            row.push(r.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
