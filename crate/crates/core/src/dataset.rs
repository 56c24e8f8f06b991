//! POI catalogs, check-in ingestion, route reconstruction, folds and
//! ground-truth indexing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a POI inside its catalog, in `0..N`.
pub type PoiId = usize;

/// Default gap that separates two trajectories of the same user.
pub const DEFAULT_GAP_HOURS: f64 = 8.0;

/// Shortest historical route kept after preprocessing.
pub const MIN_ROUTE_LEN: usize = 3;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("duplicate POI id {0}")]
    DuplicateId(PoiId),
    #[error("POI ids are not contiguous: missing id {0}")]
    NonContiguousIds(PoiId),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("visit references unknown POI {poi} (catalog has {n_pois})")]
    UnknownPoi { poi: i64, n_pois: usize },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("need at least {needed} routes for {needed} folds, got {got}")]
    TooFewRoutes { needed: usize, got: usize },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: PoiId,
    pub lat: f64,
    pub lon: f64,
    pub category: String,
}

/// The POIs of one city, indexed by contiguous ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoiCatalog {
    pois: Vec<Poi>,
}

impl PoiCatalog {
    /// Builds a catalog from rows in any order. Ids must cover `0..N` exactly.
    pub fn new(mut pois: Vec<Poi>) -> Result<Self, DatasetError> {
        if pois.is_empty() {
            return Err(DatasetError::EmptyCatalog);
        }
        pois.sort_by_key(|p| p.id);
        for (row, p) in pois.iter().enumerate() {
            if !(-90.0..=90.0).contains(&p.lat) || !(-180.0..=180.0).contains(&p.lon) {
                return Err(DatasetError::Parse {
                    row,
                    message: format!("coordinates out of range for POI {}", p.id),
                });
            }
            if p.category.trim().is_empty() {
                return Err(DatasetError::Parse {
                    row,
                    message: format!("empty category for POI {}", p.id),
                });
            }
        }
        for w in pois.windows(2) {
            if w[0].id == w[1].id {
                return Err(DatasetError::DuplicateId(w[0].id));
            }
        }
        for (expected, p) in pois.iter().enumerate() {
            if p.id != expected {
                return Err(DatasetError::NonContiguousIds(expected));
            }
        }
        Ok(Self { pois })
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn get(&self, id: PoiId) -> Option<&Poi> {
        self.pois.get(id)
    }

    pub fn contains(&self, id: PoiId) -> bool {
        id < self.pois.len()
    }

    /// Reads `poi_id,lat,lon,category` rows.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        #[derive(Deserialize)]
        struct Row {
            poi_id: i64,
            lat: f64,
            lon: f64,
            category: String,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut pois = Vec::new();
        for (row, rec) in rdr.deserialize::<Row>().enumerate() {
            let rec = rec.map_err(|e| DatasetError::Parse { row: row + 1, message: e.to_string() })?;
            if rec.poi_id < 0 {
                return Err(DatasetError::Parse {
                    row: row + 1,
                    message: format!("negative poi_id {}", rec.poi_id),
                });
            }
            pois.push(Poi {
                id: rec.poi_id as PoiId,
                lat: rec.lat,
                lon: rec.lon,
                category: rec.category,
            });
        }
        Self::new(pois)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["poi_id", "lat", "lon", "category"]).map_err(csv_io)?;
        for p in &self.pois {
            wtr.write_record([
                p.id.to_string(),
                p.lat.to_string(),
                p.lon.to_string(),
                p.category.clone(),
            ])
            .map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> DatasetError {
    DatasetError::Io(std::io::Error::other(e.to_string()))
}

/// Loads a `pois.csv` file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<PoiCatalog, DatasetError> {
    PoiCatalog::from_reader(File::open(path)?)
}

/// One check-in: user, POI, Unix seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub user: i64,
    pub poi: i64,
    pub ts: i64,
}

pub fn read_visits<R: Read>(reader: R) -> Result<Vec<Visit>, DatasetError> {
    #[derive(Deserialize)]
    struct Row {
        user_id: i64,
        poi_id: i64,
        ts: i64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(row, rec)| {
            rec.map(|r| Visit { user: r.user_id, poi: r.poi_id, ts: r.ts })
                .map_err(|e| DatasetError::Parse { row: row + 1, message: e.to_string() })
        })
        .collect()
}

/// Loads a `visits.csv` file.
pub fn load_visits(path: impl AsRef<Path>) -> Result<Vec<Visit>, DatasetError> {
    read_visits(File::open(path)?)
}

/// An ordered, duplicate-free POI sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(Vec<PoiId>);

impl Route {
    /// Checks the historical-route invariants: length >= 3, no repeats, ids < `n_pois`.
    pub fn new(pois: Vec<PoiId>, n_pois: usize) -> Result<Self, DatasetError> {
        if pois.len() < MIN_ROUTE_LEN {
            return Err(DatasetError::InvalidRoute(format!(
                "length {} < {MIN_ROUTE_LEN}",
                pois.len()
            )));
        }
        let mut seen = HashSet::with_capacity(pois.len());
        for &p in &pois {
            if p >= n_pois {
                return Err(DatasetError::InvalidRoute(format!("POI {p} outside catalog")));
            }
            if !seen.insert(p) {
                return Err(DatasetError::InvalidRoute(format!("POI {p} repeated")));
            }
        }
        Ok(Self(pois))
    }

    /// Wraps a sequence without validation. Callers guarantee the invariants.
    pub fn from_unchecked(pois: Vec<PoiId>) -> Self {
        Self(pois)
    }

    pub fn pois(&self) -> &[PoiId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn source(&self) -> PoiId {
        self.0[0]
    }

    pub fn destination(&self) -> PoiId {
        self.0[self.0.len() - 1]
    }

    pub fn endpoints(&self) -> (PoiId, PoiId) {
        (self.source(), self.destination())
    }

    pub fn into_inner(self) -> Vec<PoiId> {
        self.0
    }
}

impl AsRef<[PoiId]> for Route {
    fn as_ref(&self) -> &[PoiId] {
        &self.0
    }
}

/// Reconstructs historical routes from raw check-ins.
///
/// Visits are grouped per user and sorted by time. A gap strictly greater
/// than `gap_hours` starts a new trajectory. Repeated POIs inside a
/// trajectory keep their first occurrence only, and trajectories with fewer
/// than three distinct POIs are dropped. Output is ordered by user id, then
/// by time.
pub fn build_routes(
    visits: &[Visit],
    n_pois: usize,
    gap_hours: f64,
) -> Result<Vec<Route>, DatasetError> {
    let gap_secs = gap_hours * 3600.0;
    let mut by_user: BTreeMap<i64, Vec<(i64, PoiId)>> = BTreeMap::new();
    for v in visits {
        if v.poi < 0 || v.poi as usize >= n_pois {
            return Err(DatasetError::UnknownPoi { poi: v.poi, n_pois });
        }
        by_user.entry(v.user).or_default().push((v.ts, v.poi as PoiId));
    }

    let mut routes = Vec::new();
    for (_, mut rows) in by_user {
        // stable: equal timestamps keep file order
        rows.sort_by_key(|&(ts, _)| ts);
        let mut current: Vec<PoiId> = Vec::new();
        let mut last_ts: Option<i64> = None;
        for (ts, poi) in rows {
            if let Some(prev) = last_ts {
                if (ts - prev) as f64 > gap_secs {
                    flush_trajectory(&mut current, &mut routes);
                }
            }
            current.push(poi);
            last_ts = Some(ts);
        }
        flush_trajectory(&mut current, &mut routes);
    }
    Ok(routes)
}

fn flush_trajectory(current: &mut Vec<PoiId>, routes: &mut Vec<Route>) {
    let mut seen = HashSet::new();
    let deduped: Vec<PoiId> = current.drain(..).filter(|p| seen.insert(*p)).collect();
    if deduped.len() >= MIN_ROUTE_LEN {
        routes.push(Route(deduped));
    }
}

/// Route index to fold id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds()];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Indices of routes in fold `fold` and of all remaining routes.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<_>, Vec<_>) =
            (0..self.assignment.len()).partition(|&i| self.assignment[i] == fold);
        (train, test)
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Shuffles route indices with `seed` and deals them round-robin into folds.
pub fn split_folds(
    n_routes: usize,
    n_folds: usize,
    seed: u64,
) -> Result<FoldAssignment, DatasetError> {
    if n_folds == 0 || n_routes < n_folds {
        return Err(DatasetError::TooFewRoutes { needed: n_folds.max(1), got: n_routes });
    }
    let mut order: Vec<usize> = (0..n_routes).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n_routes];
    for (slot, &route) in order.iter().enumerate() {
        assignment[route] = slot % n_folds;
    }
    Ok(FoldAssignment { seed, assignment })
}

/// Historical routes grouped by their (source, destination) pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruthIndex {
    by_endpoints: BTreeMap<(PoiId, PoiId), Vec<Route>>,
}

impl GroundTruthIndex {
    pub fn build<'a>(routes: impl IntoIterator<Item = &'a Route>) -> Self {
        let mut by_endpoints: BTreeMap<(PoiId, PoiId), Vec<Route>> = BTreeMap::new();
        for r in routes {
            by_endpoints.entry(r.endpoints()).or_default().push(r.clone());
        }
        Self { by_endpoints }
    }

    pub fn len(&self) -> usize {
        self.by_endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_endpoints.is_empty()
    }

    pub fn get(&self, s: PoiId, d: PoiId) -> &[Route] {
        self.by_endpoints.get(&(s, d)).map_or(&[], Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = (PoiId, PoiId)> + '_ {
        self.by_endpoints.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(PoiId, PoiId), &Vec<Route>)> {
        self.by_endpoints.iter()
    }
}

pub fn ground_truth_index(routes: &[Route]) -> GroundTruthIndex {
    GroundTruthIndex::build(routes)
}

/// A catalog with its reconstructed routes, as written by `alttrip ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub catalog: PoiCatalog,
    pub routes: Vec<Route>,
}

#[derive(Serialize, Deserialize)]
struct RoutesFile {
    name: String,
    routes: Vec<Route>,
}

impl Dataset {
    /// Reads `pois.csv` and `visits.csv` and applies the preprocessing rules.
    pub fn ingest(
        name: &str,
        pois: impl AsRef<Path>,
        visits: impl AsRef<Path>,
        gap_hours: f64,
    ) -> Result<Self, DatasetError> {
        let catalog = load_catalog(pois)?;
        let visits = load_visits(visits)?;
        let routes = build_routes(&visits, catalog.len(), gap_hours)?;
        Ok(Self { name: name.to_string(), catalog, routes })
    }

    pub fn ground_truth(&self) -> GroundTruthIndex {
        GroundTruthIndex::build(&self.routes)
    }

    pub fn max_route_len(&self) -> usize {
        self.routes.iter().map(Route::len).max().unwrap_or(0)
    }

    /// Writes `pois.csv` and `routes.json` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.catalog.to_writer(File::create(dir.join("pois.csv"))?)?;
        let f = RoutesFile { name: self.name.clone(), routes: self.routes.clone() };
        std::fs::write(dir.join("routes.json"), serde_json::to_string(&f)?)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let dir = dir.as_ref();
        let catalog = load_catalog(dir.join("pois.csv"))?;
        let f: RoutesFile = serde_json::from_str(&std::fs::read_to_string(dir.join("routes.json"))?)?;
        let routes = f
            .routes
            .into_iter()
            .map(|r| Route::new(r.into_inner(), catalog.len()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { name: f.name, catalog, routes })
    }
}

/// Number of distinct (source, destination) pairs among `routes`.
pub fn unique_pairs(routes: &[Route]) -> usize {
    routes.iter().map(Route::endpoints).collect::<HashSet<_>>().len()
}

/// How often each POI id appears across `routes`.
pub fn poi_frequencies(routes: &[Route], n_pois: usize) -> Vec<usize> {
    let mut counts = vec![0; n_pois];
    for r in routes {
        for &p in r.pois() {
            counts[p] += 1;
        }
    }
    counts
}

/// Counts how many routes share each exact POI sequence.
pub fn route_multiplicity(routes: &[Route]) -> HashMap<&[PoiId], usize> {
    let mut m = HashMap::new();
    for r in routes {
        *m.entry(r.pois()).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visit(user: i64, poi: i64, ts: i64) -> Visit {
        Visit { user, poi, ts }
    }

    const H: i64 = 3600;

    #[test]
    fn singleton_catalog() {
        let csv = "poi_id,lat,lon,category\n0,55.9,-3.2,park\n";
        let c = PoiCatalog::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn duplicate_id_rejected() {
        let csv = "poi_id,lat,lon,category\n3,1,1,a\n3,2,2,b\n";
        assert!(matches!(
            PoiCatalog::from_reader(csv.as_bytes()),
            Err(DatasetError::DuplicateId(3))
        ));
    }

    #[test]
    fn empty_and_malformed_catalogs() {
        let empty = "poi_id,lat,lon,category\n";
        assert!(matches!(
            PoiCatalog::from_reader(empty.as_bytes()),
            Err(DatasetError::EmptyCatalog)
        ));
        let bad = "poi_id,lat,lon,category\n0,abc,1,a\n";
        assert!(matches!(
            PoiCatalog::from_reader(bad.as_bytes()),
            Err(DatasetError::Parse { .. })
        ));
        let gap = "poi_id,lat,lon,category\n0,1,1,a\n2,1,1,a\n";
        assert!(matches!(
            PoiCatalog::from_reader(gap.as_bytes()),
            Err(DatasetError::NonContiguousIds(1))
        ));
    }

    #[test]
    fn loop_removal_keeps_first_occurrence() {
        let v = [visit(1, 1, 0), visit(1, 2, 2 * H), visit(1, 1, 4 * H), visit(1, 3, 6 * H)];
        let routes = build_routes(&v, 10, 8.0).unwrap();
        assert_eq!(routes, vec![Route(vec![1, 2, 3])]);
    }

    #[test]
    fn long_gap_splits_and_short_fragment_dropped() {
        let v = [
            visit(1, 1, 0),
            visit(1, 2, H),
            visit(1, 3, 10 * H),
            visit(1, 4, 11 * H),
            visit(1, 5, 12 * H),
        ];
        let routes = build_routes(&v, 10, 8.0).unwrap();
        assert_eq!(routes, vec![Route(vec![3, 4, 5])]);
    }

    #[test]
    fn exact_gap_stays_in_trajectory() {
        let v = [visit(7, 0, 0), visit(7, 1, 8 * H), visit(7, 2, 16 * H)];
        assert_eq!(build_routes(&v, 3, 8.0).unwrap(), vec![Route(vec![0, 1, 2])]);
        let v = [visit(7, 0, 0), visit(7, 1, 8 * H + 1), visit(7, 2, 9 * H)];
        assert!(build_routes(&v, 3, 8.0).unwrap().is_empty());
    }

    #[test]
    fn unsorted_visits_and_unknown_poi() {
        let v = [visit(2, 5, 300), visit(2, 4, 200), visit(2, 3, 100)];
        assert_eq!(build_routes(&v, 6, 8.0).unwrap(), vec![Route(vec![3, 4, 5])]);
        let v = [visit(2, 9, 0)];
        assert!(matches!(build_routes(&v, 6, 8.0), Err(DatasetError::UnknownPoi { poi: 9, .. })));
    }

    #[test]
    fn folds_balanced_and_deterministic() {
        let a = split_folds(634, 5, 11).unwrap();
        let mut sizes = a.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![126, 127, 127, 127, 127]);
        assert_eq!(a, split_folds(634, 5, 11).unwrap());
        let b = split_folds(5, 5, 3).unwrap();
        assert_eq!(b.fold_sizes(), vec![1; 5]);
        assert!(matches!(split_folds(4, 5, 0), Err(DatasetError::TooFewRoutes { .. })));
        let round = FoldAssignment::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn ground_truth_grouping() {
        let routes = vec![Route(vec![1, 2, 3]), Route(vec![1, 4, 3])];
        let gt = ground_truth_index(&routes);
        assert_eq!(gt.len(), 1);
        assert_eq!(gt.get(1, 3).len(), 2);
        assert!(ground_truth_index(&[]).is_empty());
    }

    #[test]
    fn route_validation() {
        assert!(Route::new(vec![0, 1], 5).is_err());
        assert!(Route::new(vec![0, 1, 0], 5).is_err());
        assert!(Route::new(vec![0, 1, 7], 5).is_err());
        assert!(Route::new(vec![0, 1, 2], 5).is_ok());
    }

    #[test]
    fn dataset_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = PoiCatalog::new(vec![
            Poi { id: 0, lat: 1.0, lon: 2.0, category: "a".into() },
            Poi { id: 1, lat: 1.5, lon: 2.5, category: "b".into() },
            Poi { id: 2, lat: 1.25, lon: 2.75, category: "a".into() },
        ])
        .unwrap();
        let ds = Dataset { name: "t".into(), catalog, routes: vec![Route(vec![0, 1, 2])] };
        ds.save_dir(dir.path()).unwrap();
        assert_eq!(Dataset::load_dir(dir.path()).unwrap(), ds);
    }
}
