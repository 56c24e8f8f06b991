//! Constraint-aware itinerary generation by stochastic editing.
//!
//! A chain starts from a feasible seed itinerary through the prominent POI.
//! Each iteration picks an interior slot and one of four edits (insert,
//! delete, replace, swap-and-replace), drawing new POIs from the combined
//! forward/backward distribution. A candidate is accepted when it satisfies
//! every constraint and either lowers the perplexity or the chain has
//! rejected the two previous candidates. The lowest-perplexity accepted
//! itinerary is returned.

mod constraints;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraints::{
    check_constraints, itinerary_cost, simulate_schedule, Budget, ConstraintReport, ConstraintSet,
    TimeWindows, Violation,
};

use crate::dataset::PoiId;
use crate::itrnet::{combined_step_probs, ItrError, ItrNet, PoiMask, ProbVector};
use crate::planner::Itinerary;

/// Randomized seed attempts before a constraint set is declared infeasible.
pub const SEED_RESTARTS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("no itinerary satisfying the constraints was found: {0}")]
    InfeasibleConstraints(String),
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("no candidate POI left for the slot")]
    ExhaustedCandidates,
    #[error("missing table entry: {0}")]
    MissingTableEntry(String),
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ItrError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Insert,
    Delete,
    Replace,
    SwapReplace,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] =
        [MoveKind::Insert, MoveKind::Delete, MoveKind::Replace, MoveKind::SwapReplace];
}

/// Relative selection weights for the four edits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveWeights {
    pub insert: f64,
    pub delete: f64,
    pub replace: f64,
    pub swap_replace: f64,
}

impl MoveWeights {
    pub fn uniform() -> Self {
        Self { insert: 1.0, delete: 1.0, replace: 1.0, swap_replace: 1.0 }
    }

    /// Length-preserving edits only, each with probability 1/2.
    pub fn fixed_length() -> Self {
        Self { insert: 0.0, delete: 0.0, replace: 0.5, swap_replace: 0.5 }
    }

    pub fn get(&self, m: MoveKind) -> f64 {
        match m {
            MoveKind::Insert => self.insert,
            MoveKind::Delete => self.delete,
            MoveKind::Replace => self.replace,
            MoveKind::SwapReplace => self.swap_replace,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub seed: u64,
    pub fixed_length: Option<usize>,
    pub weights: MoveWeights,
    /// In fixed-length mode, chance of a swap when the picked slot holds a
    /// protected POI (otherwise the iteration is skipped).
    pub protected_swap_probability: f64,
    pub seed_restarts: usize,
}

impl SamplerConfig {
    /// `5 (L - 2)` iterations of replace / swap-and-replace.
    pub fn fixed_length(len: usize, seed: u64) -> Self {
        Self {
            iterations: 5 * len.saturating_sub(2),
            seed,
            fixed_length: Some(len),
            weights: MoveWeights::fixed_length(),
            protected_swap_probability: 0.5,
            seed_restarts: SEED_RESTARTS,
        }
    }

    /// All four edits with equal weight.
    pub fn free_length(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            fixed_length: None,
            weights: MoveWeights::uniform(),
            protected_swap_probability: 0.5,
            seed_restarts: SEED_RESTARTS,
        }
    }

    fn validate(&self) -> Result<(), SamplerError> {
        let w = &self.weights;
        let all = [w.insert, w.delete, w.replace, w.swap_replace];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || all.iter().sum::<f64>() <= 0.0 {
            return Err(SamplerError::InvalidConfig("move weights must be >= 0 with a positive sum".into()));
        }
        if self.fixed_length.is_some_and(|l| l < 3) {
            return Err(SamplerError::InvalidConfig("fixed length must be >= 3".into()));
        }
        if self.fixed_length.is_some() && (w.insert > 0.0 || w.delete > 0.0) {
            return Err(SamplerError::InvalidConfig(
                "insert/delete change the length and must have weight 0 in fixed-length mode".into(),
            ));
        }
        Ok(())
    }
}

/// One chain step, for inspection and tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// `None` when the iteration was skipped without proposing a candidate.
    pub proposal: Option<MoveKind>,
    pub slot: usize,
    pub candidate: Vec<PoiId>,
    pub candidate_perplexity: f64,
    pub satisfied: bool,
    pub stall_before: usize,
    pub accepted: bool,
    pub current_perplexity: f64,
    pub best_perplexity: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerTrace {
    pub seed: Vec<PoiId>,
    pub seed_perplexity: f64,
    pub steps: Vec<TraceStep>,
}

struct Query<'a> {
    net: &'a ItrNet,
    s: PoiId,
    d: PoiId,
    protected: PoiMask,
}

impl Query<'_> {
    /// Combined distribution for slot `slot` (0-based) of an itinerary of
    /// length `len`, given the POIs before it and after it.
    fn slot_probs(
        &self,
        before: &[PoiId],
        after: &[PoiId],
        slot: usize,
        len: usize,
        mask: &PoiMask,
    ) -> Result<ProbVector, SamplerError> {
        let rev: Vec<PoiId> = after.iter().rev().copied().collect();
        let pf = self.net.forward_step_probs(before, self.s, self.d, mask);
        let pb = self.net.backward_step_probs(&rev, self.s, self.d, mask);
        match (pf, pb) {
            (Ok(pf), Ok(pb)) => Ok(combined_step_probs(&pf, &pb, slot + 1, len)?),
            (Err(ItrError::AllMasked), _) | (_, Err(ItrError::AllMasked)) => {
                Err(SamplerError::ExhaustedCandidates)
            }
            (Err(e), _) | (_, Err(e)) => Err(e.into()),
        }
    }

    fn loop_mask(&self, itinerary: &[PoiId], keep: Option<PoiId>) -> PoiMask {
        let mut mask = PoiMask::from_ids(self.net.n_pois(), itinerary.iter().copied());
        mask.insert(self.s);
        mask.insert(self.d);
        if let Some(k) = keep {
            mask.remove(k);
        }
        mask
    }
}

fn sample_from(p: &ProbVector, rng: &mut impl Rng) -> Result<PoiId, SamplerError> {
    let dist = WeightedIndex::new(&p.probs).map_err(|_| SamplerError::ExhaustedCandidates)?;
    Ok(dist.sample(rng))
}

/// Applies one edit at interior index `t` (0-based, `1..len-1`).
pub fn apply_move(
    net: &ItrNet,
    current: &[PoiId],
    mv: MoveKind,
    t: usize,
    protected: &PoiMask,
    rng: &mut impl Rng,
) -> Result<Vec<PoiId>, SamplerError> {
    let len = current.len();
    if len < 3 || t == 0 || t >= len - 1 {
        return Err(SamplerError::IllegalMove(format!("slot {t} is not interior for length {len}")));
    }
    let q = Query { net, s: current[0], d: current[len - 1], protected: protected.clone() };
    match mv {
        MoveKind::Insert => {
            let mask = q.loop_mask(current, None);
            let new_len = len + 1;
            // new POI lands at index t + 1, i.e. 1-based slot t + 2
            let p = q.slot_probs(&current[..=t], &current[t + 1..], t + 1, new_len, &mask)?;
            let poi = sample_from(&p, rng)?;
            let mut out = current.to_vec();
            out.insert(t + 1, poi);
            Ok(out)
        }
        MoveKind::Delete => {
            if q.protected.contains(current[t]) {
                return Err(SamplerError::IllegalMove(format!("POI {} is protected", current[t])));
            }
            if len <= 3 {
                return Err(SamplerError::IllegalMove("cannot shorten below 3 POIs".into()));
            }
            let mut out = current.to_vec();
            out.remove(t);
            Ok(out)
        }
        MoveKind::Replace => {
            if q.protected.contains(current[t]) {
                return Err(SamplerError::IllegalMove(format!("POI {} is protected", current[t])));
            }
            replace_at(&q, current.to_vec(), t, rng)
        }
        MoveKind::SwapReplace => {
            let others: Vec<usize> = (1..len - 1).filter(|&i| i != t).collect();
            let &other = others
                .choose(rng)
                .ok_or_else(|| SamplerError::IllegalMove("swap needs two interior POIs".into()))?;
            let mut out = current.to_vec();
            out.swap(t, other);
            if q.protected.contains(out[t]) {
                Ok(out)
            } else {
                replace_at(&q, out, t, rng)
            }
        }
    }
}

fn replace_at(
    q: &Query<'_>,
    mut seq: Vec<PoiId>,
    t: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PoiId>, SamplerError> {
    let mask = q.loop_mask(&seq, Some(seq[t]));
    let p = q.slot_probs(&seq[..t], &seq[t + 1..], t, seq.len(), &mask)?;
    seq[t] = sample_from(&p, rng)?;
    Ok(seq)
}

/// Builds a first itinerary through `prominent` that satisfies
/// `constraints`. Without a fixed length this is `(s, prominent, d)` plus
/// any must-see POIs. With a fixed length the protected POIs take random
/// interior slots and the rest are filled from the combined distribution:
/// by argmax on the first attempt, by sampling on restarts.
pub fn seed_itinerary(
    net: &ItrNet,
    prominent: PoiId,
    s: PoiId,
    d: PoiId,
    constraints: &ConstraintSet,
    fixed_length: Option<usize>,
    restarts: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PoiId>, SamplerError> {
    if prominent == s || prominent == d {
        return Err(SamplerError::IllegalMove("prominent POI must differ from s and d".into()));
    }
    let n = net.n_pois();
    constraints.validate(n)?;
    let mut protected_list = vec![prominent];
    protected_list.extend(constraints.must_see_interior(s, d).into_iter().filter(|&p| p != prominent));
    let q = Query { net, s, d, protected: PoiMask::from_ids(n, protected_list.iter().copied()) };

    if let Some(len) = fixed_length {
        if protected_list.len() > len.saturating_sub(2) {
            return Err(SamplerError::InfeasibleConstraints(format!(
                "{} protected POIs do not fit in {} interior slots",
                protected_list.len(),
                len.saturating_sub(2)
            )));
        }
    }

    let mut last_violation = String::from("no attempt made");
    for attempt in 0..restarts.max(1) {
        let candidate = match fixed_length {
            None => {
                let mut interior = protected_list.clone();
                if attempt > 0 {
                    interior.shuffle(rng);
                }
                let mut seq = vec![s];
                seq.extend(interior);
                seq.push(d);
                seq
            }
            Some(len) => match fill_fixed(&q, &protected_list, len, attempt > 0, rng) {
                Ok(seq) => seq,
                Err(SamplerError::ExhaustedCandidates) => {
                    return Err(SamplerError::InfeasibleConstraints(format!(
                        "catalog too small for length {len}"
                    )))
                }
                Err(e) => return Err(e),
            },
        };
        let report = check_constraints(&candidate, constraints)?;
        if report.satisfied {
            return Ok(candidate);
        }
        last_violation = format!("{:?}", report.violations);
    }
    Err(SamplerError::InfeasibleConstraints(last_violation))
}

fn fill_fixed(
    q: &Query<'_>,
    protected: &[PoiId],
    len: usize,
    sample: bool,
    rng: &mut impl Rng,
) -> Result<Vec<PoiId>, SamplerError> {
    let mut slots: Vec<Option<PoiId>> = vec![None; len];
    slots[0] = Some(q.s);
    slots[len - 1] = Some(q.d);
    let mut free: Vec<usize> = (1..len - 1).collect();
    free.shuffle(rng);
    for (&poi, &slot) in protected.iter().zip(&free) {
        slots[slot] = Some(poi);
    }
    for t in 1..len - 1 {
        if slots[t].is_some() {
            continue;
        }
        let placed: Vec<PoiId> = slots.iter().flatten().copied().collect();
        let before: Vec<PoiId> = slots[..t].iter().map(|p| p.expect("left of t is filled")).collect();
        let after: Vec<PoiId> = slots[t + 1..].iter().flatten().copied().collect();
        let mask = q.loop_mask(&placed, None);
        let p = q.slot_probs(&before, &after, t, len, &mask)?;
        let poi = if sample {
            sample_from(&p, rng)?
        } else {
            p.argmax().ok_or(SamplerError::ExhaustedCandidates)?
        };
        slots[t] = Some(poi);
    }
    Ok(slots.into_iter().map(|p| p.expect("all slots filled")).collect())
}

/// Runs the editing chain and returns the best accepted itinerary.
pub fn sample_itinerary(
    net: &ItrNet,
    prominent: PoiId,
    s: PoiId,
    d: PoiId,
    constraints: &ConstraintSet,
    config: &SamplerConfig,
) -> Result<Itinerary, SamplerError> {
    sample_itinerary_traced(net, prominent, s, d, constraints, config).map(|(it, _)| it)
}

/// [`sample_itinerary`] that also returns the per-iteration trace.
pub fn sample_itinerary_traced(
    net: &ItrNet,
    prominent: PoiId,
    s: PoiId,
    d: PoiId,
    constraints: &ConstraintSet,
    config: &SamplerConfig,
) -> Result<(Itinerary, SamplerTrace), SamplerError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seed = seed_itinerary(
        net,
        prominent,
        s,
        d,
        constraints,
        config.fixed_length,
        config.seed_restarts,
        &mut rng,
    )?;
    let mut protected = PoiMask::from_ids(net.n_pois(), constraints.must_see_interior(s, d));
    protected.insert(prominent);

    let seed_ppl = net.route_perplexity(&seed, s, d)?;
    let mut trace = SamplerTrace { seed: seed.clone(), seed_perplexity: seed_ppl, steps: Vec::new() };
    let mut current = seed.clone();
    let mut current_ppl = seed_ppl;
    let mut best = seed;
    let mut best_ppl = seed_ppl;
    let mut stall = 0usize;

    for iteration in 1..=config.iterations {
        let t = rng.gen_range(1..current.len() - 1);
        let proposal = choose_move(&current, t, &protected, config, &mut rng);
        let candidate = match proposal {
            Some(mv) => match apply_move(net, &current, mv, t, &protected, &mut rng) {
                Ok(c) => Some(c),
                Err(SamplerError::ExhaustedCandidates) | Err(SamplerError::IllegalMove(_)) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        let Some(candidate) = candidate else {
            trace.steps.push(TraceStep {
                iteration,
                proposal: None,
                slot: t,
                candidate: current.clone(),
                candidate_perplexity: current_ppl,
                satisfied: true,
                stall_before: stall,
                accepted: false,
                current_perplexity: current_ppl,
                best_perplexity: best_ppl,
            });
            continue;
        };
        let ppl = net.route_perplexity(&candidate, s, d)?;
        let satisfied = check_constraints(&candidate, constraints)?.satisfied;
        let stall_before = stall;
        let accepted = satisfied && (ppl < current_ppl || stall >= 2);
        if accepted {
            current = candidate.clone();
            current_ppl = ppl;
            stall = 0;
            if ppl < best_ppl {
                best_ppl = ppl;
                best = candidate.clone();
            }
        } else {
            stall += 1;
        }
        trace.steps.push(TraceStep {
            iteration,
            proposal,
            slot: t,
            candidate,
            candidate_perplexity: ppl,
            satisfied,
            stall_before,
            accepted,
            current_perplexity: current_ppl,
            best_perplexity: best_ppl,
        });
    }
    Ok((Itinerary { pois: best, perplexity: best_ppl, prominent }, trace))
}

fn choose_move(
    current: &[PoiId],
    t: usize,
    protected: &PoiMask,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Option<MoveKind> {
    let is_protected = protected.contains(current[t]);
    let interior = current.len() - 2;
    if config.fixed_length.is_some() && is_protected {
        return (interior >= 2 && rng.gen_bool(config.protected_swap_probability))
            .then_some(MoveKind::SwapReplace);
    }
    let allowed: Vec<(MoveKind, f64)> = MoveKind::ALL
        .iter()
        .filter(|&&m| match m {
            MoveKind::Insert => true,
            MoveKind::Delete => !is_protected && current.len() > 3,
            MoveKind::Replace => !is_protected,
            MoveKind::SwapReplace => interior >= 2,
        })
        .map(|&m| (m, config.weights.get(m)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    if allowed.is_empty() {
        return None;
    }
    let dist = WeightedIndex::new(allowed.iter().map(|(_, w)| *w)).ok()?;
    Some(allowed[dist.sample(rng)].0)
}
