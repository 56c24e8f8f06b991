//! `constraints.json` with matrices either inline or in CSV files.
//!
//! Matrix CSVs have a `poi_id` header column followed by one column per POI
//! id; each row starts with the row's POI id. Per-POI tables use the
//! columns `poi_id,open,close,stay`. Relative paths are resolved against
//! the JSON file's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use alttrip_core::dataset::PoiId;
use alttrip_core::sampler::{Budget, ConstraintSet, TimeWindows};
use serde::Deserialize;

use crate::AppError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetSpec {
    limit: f64,
    #[serde(default)]
    cost: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    cost_matrix_ref: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSpec {
    start: f64,
    limit: f64,
    #[serde(default)]
    open: Option<Vec<f64>>,
    #[serde(default)]
    close: Option<Vec<f64>>,
    #[serde(default)]
    stay: Option<Vec<f64>>,
    #[serde(default)]
    travel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    hours_ref: Option<PathBuf>,
    #[serde(default)]
    travel_matrix_ref: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsSpec {
    #[serde(default)]
    budget: Option<BudgetSpec>,
    #[serde(default)]
    must_see: Vec<PoiId>,
    #[serde(default)]
    time: Option<TimeSpec>,
}

fn data_err(path: &Path, msg: impl std::fmt::Display) -> AppError {
    AppError::Data(format!("{}: {msg}", path.display()))
}

/// Reads a square matrix keyed by POI id into an `n x n` table.
pub fn read_matrix_csv(path: &Path, n: usize) -> Result<Vec<Vec<f64>>, AppError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(path, e))?;
    let headers = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    if headers.get(0).map(str::trim) != Some("poi_id") {
        return Err(data_err(path, "first column must be poi_id"));
    }
    let cols: Vec<PoiId> = headers
        .iter()
        .skip(1)
        .map(|h| h.trim().parse::<PoiId>().map_err(|_| data_err(path, format!("bad column id {h:?}"))))
        .collect::<Result<_, _>>()?;
    let mut out = vec![vec![f64::NAN; n]; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        let row: PoiId = rec[0].trim().parse().map_err(|_| data_err(path, format!("bad row id {:?}", &rec[0])))?;
        for (j, &col) in cols.iter().enumerate() {
            if row >= n || col >= n {
                return Err(data_err(path, format!("POI id {} not in catalog", row.max(col))));
            }
            let v = rec.get(j + 1).ok_or_else(|| data_err(path, "short row"))?;
            out[row][col] = v.trim().parse().map_err(|_| data_err(path, format!("bad value {v:?}")))?;
        }
    }
    if let Some((i, j)) = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| out[i][j].is_nan()) {
        return Err(data_err(path, format!("no entry for ({i}, {j})")));
    }
    Ok(out)
}

/// Reads `poi_id,open,close,stay` rows.
pub fn read_hours_csv(path: &Path, n: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), AppError> {
    #[derive(Deserialize)]
    struct Row {
        poi_id: PoiId,
        open: f64,
        close: f64,
        stay: f64,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(path, e))?;
    let mut rows: HashMap<PoiId, Row> = HashMap::new();
    for r in rdr.deserialize() {
        let r: Row = r.map_err(|e| data_err(path, e))?;
        rows.insert(r.poi_id, r);
    }
    let mut open = Vec::with_capacity(n);
    let mut close = Vec::with_capacity(n);
    let mut stay = Vec::with_capacity(n);
    for id in 0..n {
        let r = rows.get(&id).ok_or_else(|| data_err(path, format!("no hours for POI {id}")))?;
        open.push(r.open);
        close.push(r.close);
        stay.push(r.stay);
    }
    Ok((open, close, stay))
}

fn either<T>(
    inline: Option<T>,
    reference: Option<&PathBuf>,
    base: &Path,
    what: &str,
    read: impl FnOnce(&Path) -> Result<T, AppError>,
) -> Result<T, AppError> {
    match (inline, reference) {
        (Some(v), None) => Ok(v),
        (None, Some(p)) => read(&base.join(p)),
        (Some(_), Some(_)) => Err(AppError::Data(format!("{what}: give either inline values or a file, not both"))),
        (None, None) => Err(AppError::Data(format!("{what} is missing"))),
    }
}

pub fn parse_constraints(json: &str, base: &Path, n: usize) -> Result<ConstraintSet, AppError> {
    let spec: ConstraintsSpec =
        serde_json::from_str(json).map_err(|e| AppError::Data(format!("constraints: {e}")))?;
    let budget = spec
        .budget
        .map(|b| {
            let cost = either(b.cost, b.cost_matrix_ref.as_ref(), base, "budget cost", |p| read_matrix_csv(p, n))?;
            Ok::<_, AppError>(Budget { cost, limit: b.limit })
        })
        .transpose()?;
    let time = spec
        .time
        .map(|t| {
            let (open, close, stay) = match (t.open, t.close, t.stay, t.hours_ref.as_ref()) {
                (Some(o), Some(c), Some(s), None) => (o, c, s),
                (None, None, None, Some(p)) => read_hours_csv(&base.join(p), n)?,
                _ => {
                    return Err(AppError::Data(
                        "time: give open, close and stay inline, or hours_ref".into(),
                    ))
                }
            };
            let travel =
                either(t.travel, t.travel_matrix_ref.as_ref(), base, "time travel", |p| read_matrix_csv(p, n))?;
            Ok(TimeWindows { open, close, stay, travel, start: t.start, limit: t.limit })
        })
        .transpose()?;
    let set = ConstraintSet { budget, must_see: spec.must_see, time };
    set.validate(n).map_err(|e| AppError::Data(e.to_string()))?;
    Ok(set)
}

pub fn load_constraints(path: &Path, n: usize) -> Result<ConstraintSet, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_constraints(&text, base, n)
}
