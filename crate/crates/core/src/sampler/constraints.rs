//! User constraints on itineraries: travel budget, must-see POIs, and
//! opening hours with a total time limit.

use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::dataset::PoiId;

/// Pairwise travel cost with an upper bound on the summed legs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub cost: Vec<Vec<f64>>,
    pub limit: f64,
}

/// Opening hours, stay durations and travel times, all in the same unit
/// (minutes in the CLI and service).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindows {
    pub open: Vec<f64>,
    pub close: Vec<f64>,
    pub stay: Vec<f64>,
    pub travel: Vec<Vec<f64>>,
    pub start: f64,
    /// Bound on elapsed time from `start` until the visit at the
    /// destination ends.
    pub limit: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub must_see: Vec<PoiId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeWindows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OverBudget { cost: f64, limit: f64 },
    MissingMustSee { poi: PoiId },
    ClosedOnArrival { poi: PoiId, arrival: f64, close: f64 },
    OverTime { elapsed: f64, limit: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

impl ConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.budget.is_none() && self.must_see.is_empty() && self.time.is_none()
    }

    /// Must-see POIs other than the query endpoints, deduplicated in order.
    pub fn must_see_interior(&self, s: PoiId, d: PoiId) -> Vec<PoiId> {
        let mut out: Vec<PoiId> = Vec::new();
        for &p in &self.must_see {
            if p != s && p != d && !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Checks table shapes and value ranges against a catalog of `n` POIs.
    pub fn validate(&self, n: usize) -> Result<(), SamplerError> {
        let square = |m: &Vec<Vec<f64>>, what: &str| -> Result<(), SamplerError> {
            if m.len() < n || m.iter().any(|r| r.len() < n) {
                return Err(SamplerError::MissingTableEntry(format!(
                    "{what} matrix must be at least {n}x{n}"
                )));
            }
            if m.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(SamplerError::InvalidConstraints(format!(
                    "{what} entries must be finite and >= 0"
                )));
            }
            Ok(())
        };
        if let Some(b) = &self.budget {
            if !(b.limit > 0.0) {
                return Err(SamplerError::InvalidConstraints("budget limit must be > 0".into()));
            }
            square(&b.cost, "cost")?;
        }
        if let Some(&p) = self.must_see.iter().find(|&&p| p >= n) {
            return Err(SamplerError::MissingTableEntry(format!("must-see POI {p} not in catalog")));
        }
        if let Some(t) = &self.time {
            if !(t.limit > 0.0) {
                return Err(SamplerError::InvalidConstraints("time limit must be > 0".into()));
            }
            for (v, what) in [(&t.open, "open"), (&t.close, "close"), (&t.stay, "stay")] {
                if v.len() < n {
                    return Err(SamplerError::MissingTableEntry(format!(
                        "{what} needs {n} entries, got {}",
                        v.len()
                    )));
                }
            }
            if t.stay.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(SamplerError::InvalidConstraints("stay durations must be >= 0".into()));
            }
            square(&t.travel, "travel")?;
        }
        Ok(())
    }
}

fn table(m: &[Vec<f64>], a: PoiId, b: PoiId, what: &str) -> Result<f64, SamplerError> {
    m.get(a)
        .and_then(|r| r.get(b))
        .copied()
        .ok_or_else(|| SamplerError::MissingTableEntry(format!("{what}[{a}][{b}]")))
}

fn entry(v: &[f64], a: PoiId, what: &str) -> Result<f64, SamplerError> {
    v.get(a).copied().ok_or_else(|| SamplerError::MissingTableEntry(format!("{what}[{a}]")))
}

/// Sum of leg costs along `itinerary`.
pub fn itinerary_cost(itinerary: &[PoiId], cost: &[Vec<f64>]) -> Result<f64, SamplerError> {
    itinerary.windows(2).map(|w| table(cost, w[0], w[1], "cost")).sum()
}

/// Simulates the itinerary from `start`: travel, wait for opening if early,
/// stay. Returns the elapsed time and any closed-on-arrival POIs.
pub fn simulate_schedule(
    itinerary: &[PoiId],
    tw: &TimeWindows,
) -> Result<(f64, Vec<Violation>), SamplerError> {
    let mut clock = tw.start;
    let mut violations = Vec::new();
    for (i, &poi) in itinerary.iter().enumerate() {
        if i > 0 {
            clock += table(&tw.travel, itinerary[i - 1], poi, "travel")?;
        }
        let (open, close) = (entry(&tw.open, poi, "open")?, entry(&tw.close, poi, "close")?);
        if clock > close {
            violations.push(Violation::ClosedOnArrival { poi, arrival: clock, close });
        }
        clock = clock.max(open) + entry(&tw.stay, poi, "stay")?;
    }
    Ok((clock - tw.start, violations))
}

pub fn check_constraints(
    itinerary: &[PoiId],
    constraints: &ConstraintSet,
) -> Result<ConstraintReport, SamplerError> {
    let mut violations = Vec::new();
    if let Some(b) = &constraints.budget {
        let cost = itinerary_cost(itinerary, &b.cost)?;
        if cost > b.limit {
            violations.push(Violation::OverBudget { cost, limit: b.limit });
        }
    }
    for &p in &constraints.must_see {
        if !itinerary.contains(&p) {
            violations.push(Violation::MissingMustSee { poi: p });
        }
    }
    if let Some(t) = &constraints.time {
        let (elapsed, closed) = simulate_schedule(itinerary, t)?;
        violations.extend(closed);
        if elapsed > t.limit {
            violations.push(Violation::OverTime { elapsed, limit: t.limit });
        }
    }
    Ok(ConstraintReport { satisfied: violations.is_empty(), violations })
}
