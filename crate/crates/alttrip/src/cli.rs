use std::path::{Path, PathBuf};

use alttrip_core::bundle::{load_bundle, save_bundle, EngineBundle};
use alttrip_core::dataset::{split_folds, unique_pairs, Dataset, DEFAULT_GAP_HOURS};
use alttrip_core::eval::{evaluate_folds, EvalConfig};
use alttrip_core::hash::content_hash;
use alttrip_core::itrnet::{train_itrnet, TrainConfig};
use alttrip_core::planner::Method;
use alttrip_core::poigraph::{embed_catalog, EmbeddingCheckpoint, EmbeddingTable, GaeConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::constraints_file::load_constraints;
use crate::server::{run_recommend, RecommendRequest};
use crate::AppError;

#[derive(Debug, Parser)]
#[command(name = "alttrip", version, about = "Alternative itinerary recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build routes from raw visits and write a dataset directory.
    Ingest {
        #[arg(long)]
        pois: PathBuf,
        #[arg(long)]
        visits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "dataset")]
        name: String,
        #[arg(long, default_value_t = DEFAULT_GAP_HOURS)]
        gap_hours: f64,
    },
    /// Train the category and distance graph autoencoders.
    TrainEmbeddings {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Category and distance embedding sizes.
        #[arg(long, default_value = "12,24")]
        dims: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the forward/backward sequence model and write a bundle.
    TrainItrnet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    Recommend {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "L")]
        length: Option<usize>,
        #[arg(long, value_enum, default_value_t = MethodArg::Lstm)]
        method: MethodArg,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validated evaluation on a dataset directory.
    Evaluate {
        /// Dataset directory; an `emb.bin` inside is reused if present.
        #[arg(long)]
        bundle_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "L")]
        length: Option<usize>,
        #[arg(long, value_enum, default_value_t = MethodArg::Lstm)]
        method: MethodArg,
        /// `start:end:step` or a comma list.
        #[arg(long, default_value = "0.1:0.9:0.2")]
        alphas: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        fold_seed: u64,
        /// Hold out only these folds (comma list).
        #[arg(long)]
        only_folds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    Serve {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Lstm,
    Sampler,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lstm => Method::Lstm,
            MethodArg::Sampler => Method::Sampler,
        }
    }
}

pub fn parse_dims(s: &str) -> Result<(usize, usize), AppError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parse = |p: &str| p.parse::<usize>().ok().filter(|&v| v > 0);
    match parts.as_slice() {
        [a, b] => match (parse(a), parse(b)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(AppError::Usage(format!("--dims: expected two positive integers, got {s:?}"))),
        },
        _ => Err(AppError::Usage(format!("--dims: expected CATEGORY,DISTANCE, got {s:?}"))),
    }
}

pub fn parse_alphas(s: &str) -> Result<Vec<f64>, AppError> {
    let bad = || AppError::Usage(format!("--alphas: cannot parse {s:?}"));
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            // round to kill accumulated float noise such as 0.30000000000000004
            (0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn gae_configs(dims: (usize, usize), epochs: Option<usize>, seed: u64) -> (GaeConfig, GaeConfig) {
    let mut cat = GaeConfig { embed_dim: dims.0, ..GaeConfig::category(seed) };
    let mut dist = GaeConfig { embed_dim: dims.1, ..GaeConfig::distance(seed.wrapping_add(1)) };
    if let Some(e) = epochs {
        cat.epochs = e;
        dist.epochs = e;
    }
    (cat, dist)
}

fn load_embeddings(path: &Path, dataset: &Dataset) -> Result<EmbeddingTable, AppError> {
    let ck = EmbeddingCheckpoint::load(path)?;
    if ck.catalog_hash != content_hash(&dataset.catalog) {
        return Err(AppError::Data(format!(
            "{} was trained on a different catalog",
            path.display()
        )));
    }
    Ok(ck.embeddings)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AppError::Other(e.to_string()))?;
    use std::io::Write;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest { pois, visits, out, name, gap_hours } => {
            let ds = Dataset::ingest(&name, pois, visits, gap_hours)?;
            ds.save_dir(&out)?;
            print_json(&serde_json::json!({
                "n_pois": ds.catalog.len(),
                "n_routes": ds.routes.len(),
                "n_unique_pairs": unique_pairs(&ds.routes),
                "max_route_len": ds.max_route_len(),
                "out": out,
            }))
        }
        Command::TrainEmbeddings { data, out, dims, epochs, seed } => {
            let dims = parse_dims(&dims)?;
            let ds = Dataset::load_dir(&data)?;
            let (cat, dist) = gae_configs(dims, epochs, seed);
            let table = embed_catalog(&ds.catalog, &cat, &dist)?;
            EmbeddingCheckpoint::new(table, &ds.catalog, &[&cat, &dist], "fused").save(&out)?;
            log::info!("wrote {}", out.display());
            Ok(())
        }
        Command::TrainItrnet { data, emb, out, train } => {
            let ds = Dataset::load_dir(&data)?;
            let table = load_embeddings(&emb, &ds)?;
            let (net, report) = train_itrnet(&ds.routes, table, train.config())?;
            log::info!(
                "trained {} epochs, kept epoch {}",
                report.epoch_losses.len(),
                report.best_epoch
            );
            let bundle = EngineBundle::new(&ds.name, ds.catalog, net)?;
            save_bundle(&bundle, &out)?;
            Ok(())
        }
        Command::Recommend { bundle, s, d, k, length, method, constraints, seed } => {
            let b = load_bundle(&bundle)?;
            let constraints = constraints
                .map(|p| load_constraints(&p, b.catalog.len()))
                .transpose()?;
            let req = RecommendRequest { s, d, k, length, method: method.into(), constraints, seed };
            print_json(&run_recommend(&b, req)?)
        }
        Command::Evaluate {
            bundle_dir,
            k,
            length,
            method,
            alphas,
            folds,
            fold_seed,
            only_folds,
            out,
            train,
        } => {
            let alphas = parse_alphas(&alphas)?;
            let ds = Dataset::load_dir(&bundle_dir)?;
            let emb_path = bundle_dir.join("emb.bin");
            let table = if emb_path.exists() {
                load_embeddings(&emb_path, &ds)?
            } else {
                let (cat, dist) = gae_configs((12, 24), None, train.seed);
                embed_catalog(&ds.catalog, &cat, &dist)?
            };
            let assignment = split_folds(ds.routes.len(), folds, fold_seed)?;
            let only = only_folds
                .map(|s| {
                    s.split(',')
                        .map(|f| f.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| AppError::Usage(format!("--only-folds: cannot parse {s:?}")))
                })
                .transpose()?;
            let config = EvalConfig {
                k,
                length,
                method: method.into(),
                alphas,
                seed: train.seed,
                folds: only,
            };
            let cfg = train.config();
            let report = evaluate_folds(&ds, &assignment, &config, |fold, routes| {
                log::info!("fold {fold}: training on {} routes", routes.len());
                train_itrnet(routes, table.clone(), cfg.clone()).map(|(net, _)| net)
            })?;
            report.write_csv(std::fs::File::create(&out)?)?;
            std::fs::write(out.with_extension("json"), report.to_json()?)?;
            print_json(&report.overall)
        }
        Command::Serve { bundle, bind } => {
            let b = load_bundle(&bundle)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(b, &bind))
                .map_err(|e| AppError::Other(format!("cannot serve on {bind}: {e}")))
        }
    }
}
