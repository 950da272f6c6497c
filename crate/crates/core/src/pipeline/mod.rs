//! Staged workflow: synth → split → train → build-index → tune-lambda →
//! evaluate → report. Each stage reads its inputs from the run directory and
//! writes its artifacts back there, recording them in `manifest.json`.

mod config;
mod evaluate;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    ClassFilter, DataConfig, EvaluateSection, ExplainSection, GaussianSection, GeneratorChoice,
    ModelConfig, PerturbSection, RunConfig, SplitConfig, SyntheticSection, TrainSection,
    WeightingChoice,
};
pub use evaluate::{evaluate, summarize, EvaluateOutcome, Exclusion, ScoreRow, SummaryRow};
pub use report::report;

use crate::data::{self, Dataset, Split};
use crate::error::{Error, Result};
use crate::neighbourhood::{self, MedoidIndex, PerturbConfig};
use crate::net::{self, ModelBundle};
use crate::rng::derive_seed;

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

pub const DATASET_FILE: &str = "dataset.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const MODEL_FILE: &str = "model.json";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const F1_FILE: &str = "f1_report.csv";
pub const INDEX_FILE: &str = "medoid_index.json";
pub const TUNING_FILE: &str = "lambda_tuning.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const HISTOGRAM_FILE: &str = "histograms.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.csv";
pub const NEIGHBOURHOOD_FILE: &str = "neighbourhoods.csv";
pub const ATTRIBUTION_FILE: &str = "attributions.csv";
pub const ATTRIBUTION_META_FILE: &str = "attributions_meta.json";
pub const REPORT_FILE: &str = "report.md";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Split,
    Train,
    BuildIndex,
    TuneLambda,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Synth,
        Stage::Split,
        Stage::Train,
        Stage::BuildIndex,
        Stage::TuneLambda,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::BuildIndex => "build-index",
            Stage::TuneLambda => "tune-lambda",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub artifacts: Vec<String>,
    pub counts: BTreeMap<String, usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Every artifact listed by any stage.
    pub fn artifacts(&self) -> impl Iterator<Item = &str> {
        self.stages
            .values()
            .flat_map(|s| s.artifacts.iter().map(String::as_str))
    }
}

fn record_stage(cfg: &RunConfig, stage: Stage, record: StageRecord) -> Result<()> {
    let paths = RunPaths::new(&cfg.out_dir);
    let path = paths.file(MANIFEST_FILE);
    let mut manifest = match RunManifest::load(&path) {
        Ok(m) => m,
        Err(Error::MissingFile(_)) => RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            stages: BTreeMap::new(),
        },
        Err(e) => return Err(e),
    };
    manifest.config = cfg.clone();
    manifest.stages.insert(stage.name().into(), record);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<RunPaths> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    Ok(RunPaths::new(&cfg.out_dir))
}

fn timed<T>(
    cfg: &RunConfig,
    stage: Stage,
    f: impl FnOnce(&RunPaths) -> Result<(T, Vec<&'static str>, BTreeMap<String, usize>)>,
) -> Result<T> {
    let paths = ensure_out_dir(cfg)?;
    let start = Instant::now();
    let (value, artifacts, counts) = f(&paths)?;
    record_stage(
        cfg,
        stage,
        StageRecord {
            artifacts: artifacts.into_iter().map(String::from).collect(),
            counts,
            seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    Ok(value)
}

fn counts<const N: usize>(items: [(&str, usize); N]) -> BTreeMap<String, usize> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Writes `dataset.csv` from the configured CSV or the synthetic generator.
pub fn synth(cfg: &RunConfig) -> Result<Dataset> {
    timed(cfg, Stage::Synth, |paths| {
        let data = match &cfg.data.csv {
            Some(path) => data::load_csv(path, &cfg.data.label_column, &cfg.data.group_column)?,
            None => data::generate_synthetic(&cfg.synthetic_spec())?,
        };
        data::write_csv(&paths.file(DATASET_FILE), &data)?;
        let c = counts([("rows", data.len()), ("minority", data.minority_count())]);
        Ok((data, vec![DATASET_FILE], c))
    })
}

pub fn load_dataset(paths: &RunPaths) -> Result<Dataset> {
    data::load_csv(&paths.file(DATASET_FILE), "label", "group")
}

pub fn split(cfg: &RunConfig) -> Result<Split> {
    timed(cfg, Stage::Split, |paths| {
        let data = load_dataset(paths)?;
        let split = data::stratified_group_split(&data, &cfg.split_spec())?;
        data::write_split_manifest(&paths.file(SPLIT_FILE), &data, &split)?;
        let c = counts([
            ("train", split.train.len()),
            ("val", split.val.len()),
            ("test", split.test.len()),
        ]);
        Ok((split, vec![SPLIT_FILE], c))
    })
}

fn load_split(paths: &RunPaths, data: &Dataset) -> Result<Split> {
    let path = paths.file(SPLIT_FILE);
    let split = data::read_split_manifest(&path)?;
    let n = split.train.len() + split.val.len() + split.test.len();
    if n != data.len() || split.assignment(data.len()).iter().any(Option::is_none) {
        return Err(Error::Corrupt {
            path,
            reason: format!("split covers {n} rows, dataset has {}", data.len()),
        });
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Row {
    pub split: String,
    pub class: u8,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

pub fn train(cfg: &RunConfig) -> Result<Vec<F1Row>> {
    timed(cfg, Stage::Train, |paths| {
        let data = load_dataset(paths)?;
        let split = load_split(paths, &data)?;
        let stats = data::fit_standardize(&data, &split.train)?;
        let z = data::apply_standardize(&data, &stats)?;
        let init = net::MlpModel::init(
            &cfg.model_dims(data.n_features()),
            derive_seed(cfg.seed, 0, "init"),
        )?;
        let train_rows = z.subset(&split.train)?;
        let outcome = net::train(&init, &train_rows, &cfg.loss, &cfg.train_config())?;
        let bundle = ModelBundle {
            model: outcome.model,
            standardization: Some(stats),
            feature_names: data.feature_names().to_vec(),
        };
        net::save_model(&paths.file(MODEL_FILE), &bundle)?;
        net::write_loss_history(&paths.file(LOSS_FILE), &outcome.loss_history)?;

        let mut rows = Vec::new();
        for (name, idx) in [
            ("train", &split.train),
            ("val", &split.val),
            ("test", &split.test),
        ] {
            let sub = z.subset(idx)?;
            let preds = net::predict_all(&bundle.model, &sub, cfg.model.threshold)?;
            for class in [0u8, 1] {
                let r = net::class_report(&preds, sub.labels(), class)?;
                rows.push(F1Row {
                    split: name.into(),
                    class,
                    f1: r.f1,
                    precision: r.precision,
                    recall: r.recall,
                    support: r.support,
                });
            }
        }
        write_rows(&paths.file(F1_FILE), &rows)?;
        let c = counts([
            ("train_rows", split.train.len()),
            ("epochs", outcome.loss_history.len()),
        ]);
        Ok((rows, vec![MODEL_FILE, LOSS_FILE, F1_FILE], c))
    })
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Everything a post-training stage needs, in standardized space.
pub(crate) struct Trained {
    pub data: Dataset,
    pub z: Dataset,
    pub split: Split,
    pub bundle: ModelBundle,
}

pub(crate) fn load_trained(paths: &RunPaths) -> Result<Trained> {
    let data = load_dataset(paths)?;
    let split = load_split(paths, &data)?;
    let bundle = net::load_model(&paths.file(MODEL_FILE))?;
    if bundle.model.n_inputs() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: bundle.model.n_inputs(),
            found: data.n_features(),
        });
    }
    let z = match &bundle.standardization {
        Some(stats) => data::apply_standardize(&data, stats)?,
        None => data.clone(),
    };
    Ok(Trained {
        data,
        z,
        split,
        bundle,
    })
}

fn make_index(cfg: &RunConfig, t: &Trained) -> Result<MedoidIndex> {
    let val: Vec<Vec<f64>> = t.split.val.iter().map(|&r| t.z.row(r).to_vec()).collect();
    let mut index = neighbourhood::build_medoid_index(
        &val,
        cfg.perturb.k_nn,
        derive_seed(cfg.seed, 0, "index"),
    )?;
    index.remap_rows(&t.split.val);
    Ok(index)
}

pub fn build_index(cfg: &RunConfig) -> Result<MedoidIndex> {
    timed(cfg, Stage::BuildIndex, |paths| {
        let t = load_trained(paths)?;
        let index = make_index(cfg, &t)?;
        neighbourhood::save_index(&paths.file(INDEX_FILE), &index)?;
        let c = counts([
            ("validation_rows", t.split.val.len()),
            ("medoids", index.len()),
        ]);
        Ok((index, vec![INDEX_FILE], c))
    })
}

pub(crate) fn load_or_build_index(
    cfg: &RunConfig,
    paths: &RunPaths,
    t: &Trained,
) -> Result<MedoidIndex> {
    match neighbourhood::load_index(&paths.file(INDEX_FILE)) {
        Err(Error::MissingFile(_)) => make_index(cfg, t),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub lambda: f64,
    pub accepted: usize,
    pub attempted: usize,
    pub rate: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub rows: Vec<TuningRow>,
    /// Largest λ meeting the acceptance threshold.
    pub chosen: Option<f64>,
    pub n_points: usize,
}

/// Raw class-preservation rate of medoid perturbations, pooled over the
/// given anchors: `n_target` unfiltered draws per anchor.
pub fn acceptance_rate(
    model: &net::MlpModel,
    anchors: &[(usize, &[f64])],
    index: &MedoidIndex,
    base: &PerturbConfig,
    global_seed: u64,
) -> Result<(usize, usize)> {
    use rayon::prelude::*;
    let per: Vec<(usize, usize)> = anchors
        .par_iter()
        .map(|&(id, x)| {
            let cfg = PerturbConfig {
                seed: derive_seed(global_seed, id as u64, "tune"),
                ..base.clone()
            };
            neighbourhood::class_preservation(model, x, index, &cfg, base.n_target)
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

/// Measures acceptance for each λ in the grid on validation minority rows.
pub fn tune_lambda(cfg: &RunConfig) -> Result<TuningOutcome> {
    timed(cfg, Stage::TuneLambda, |paths| {
        let t = load_trained(paths)?;
        let index = load_or_build_index(cfg, paths, &t)?;
        let anchors: Vec<(usize, &[f64])> = t
            .split
            .val
            .iter()
            .filter(|&&r| t.z.label(r) == 1)
            .map(|&r| (r, t.z.row(r)))
            .collect();
        if anchors.is_empty() {
            return Err(Error::NoPointsToEvaluate);
        }
        let mut grid = cfg.perturb.lambda_grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut rows = Vec::with_capacity(grid.len());
        for &lambda in &grid {
            let base = PerturbConfig {
                lambda,
                ..cfg.perturb_config(0)
            };
            let (accepted, attempted) =
                acceptance_rate(&t.bundle.model, &anchors, &index, &base, cfg.seed)?;
            rows.push(TuningRow {
                lambda,
                accepted,
                attempted,
                rate: accepted as f64 / attempted as f64,
                chosen: false,
            });
        }
        let chosen = rows
            .iter()
            .rposition(|r| r.rate >= cfg.perturb.min_acceptance)
            .map(|i| {
                rows[i].chosen = true;
                rows[i].lambda
            });
        write_rows(&paths.file(TUNING_FILE), &rows)?;
        let c = counts([("points", anchors.len()), ("grid", rows.len())]);
        Ok((
            TuningOutcome {
                rows,
                chosen,
                n_points: anchors.len(),
            },
            vec![TUNING_FILE],
            c,
        ))
    })
}

/// Result of running every stage; `tuning.chosen` is `None` when no λ met
/// the acceptance threshold.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub tuning: TuningOutcome,
    pub evaluation: EvaluateOutcome,
}

pub fn run_all(cfg: &RunConfig) -> Result<RunOutcome> {
    synth(cfg)?;
    split(cfg)?;
    train(cfg)?;
    build_index(cfg)?;
    let tuning = tune_lambda(cfg)?;
    let evaluation = evaluate(cfg)?;
    report(cfg)?;
    Ok(RunOutcome { tuning, evaluation })
}
