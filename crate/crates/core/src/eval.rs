//! Scoring clusterings against ground truth, and the batch experiment runner.
//!
//! Both scores are F-measures `2 t+ / (2 t+ + f- + f+)`: [`f_sn`] counts
//! observations labelled signal, [`f_trans`] counts consecutive-pair
//! transitions inside clusters. When all three counts are zero the score is 1.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Clustering, ObservationId};
use crate::model::ClutterIntensity;
use crate::solver::{infer, SolverKind};
use crate::synth::{self, AnalysisParams, GeneratorConfig, GeneratorKind, ModelKind, SynthData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub t_plus: usize,
    pub f_plus: usize,
    pub f_minus: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Metrics {
    pub fn from_counts(t_plus: usize, f_plus: usize, f_minus: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let f_measure = if t_plus + f_plus + f_minus == 0 {
            1.0
        } else {
            2.0 * t_plus as f64 / (2 * t_plus + f_minus + f_plus) as f64
        };
        Self {
            t_plus,
            f_plus,
            f_minus,
            precision: ratio(t_plus, t_plus + f_plus),
            recall: ratio(t_plus, t_plus + f_minus),
            f_measure,
        }
    }

    fn from_sets<T: Ord>(truth: &BTreeSet<T>, predicted: &BTreeSet<T>) -> Self {
        let t_plus = truth.intersection(predicted).count();
        Self::from_counts(t_plus, predicted.len() - t_plus, truth.len() - t_plus)
    }
}

fn check_ids(truth: &Clustering, predicted: &Clustering) -> Result<()> {
    let (a, b) = (truth.ids(), predicted.ids());
    if a == b {
        return Ok(());
    }
    let missing: Vec<_> = a.difference(&b).take(5).collect();
    let extra: Vec<_> = b.difference(&a).take(5).collect();
    Err(Error::IdMismatch(format!(
        "ids only in truth: {missing:?}, ids only in prediction: {extra:?}"
    )))
}

/// Signal/noise F-measure: positives are observations assigned to any cluster.
pub fn f_sn(truth: &Clustering, predicted: &Clustering) -> Result<Metrics> {
    check_ids(truth, predicted)?;
    let signal = |c: &Clustering| -> BTreeSet<ObservationId> { c.clusters().iter().flatten().copied().collect() };
    Ok(Metrics::from_sets(&signal(truth), &signal(predicted)))
}

/// Transition F-measure: positives are ordered pairs that are consecutive
/// within a cluster.
pub fn f_trans(truth: &Clustering, predicted: &Clustering) -> Result<Metrics> {
    check_ids(truth, predicted)?;
    let pairs = |c: &Clustering| -> BTreeSet<(ObservationId, ObservationId)> { c.transitions().collect() };
    Ok(Metrics::from_sets(&pairs(truth), &pairs(predicted)))
}

/// Which ground truth transitions are scored on segregated data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthTransitions {
    /// Each constant-tone chain is its own cluster.
    #[default]
    PerChain,
    /// The two chains of a stream form one `ABAB` cluster.
    Interleaved,
}

/// A factorial experiment. Every combination of the list-valued fields is
/// run `runs` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub generators: Vec<GeneratorKind>,
    /// Analysis models; `None` analyses each generator with its matched model.
    pub models: Option<Vec<ModelKind>>,
    pub snr_db: Vec<f64>,
    pub num_streams: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    /// `true` resolves clutter from the true SNR, `false` from `assumed_snr_db`.
    pub snr_known: Vec<bool>,
    pub assumed_snr_db: f64,
    pub runs: usize,
    pub master_seed: u64,
    /// Base generator settings; kind, streams, SNR and seed are overridden.
    pub generator: GeneratorConfig,
    pub analysis: AnalysisParams,
    pub truth: TruthTransitions,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            generators: vec![GeneratorKind::Coherent],
            models: None,
            snr_db: vec![0.0, -6.0, -12.0, -18.0, -24.0],
            num_streams: vec![1, 2, 4],
            solvers: vec![SolverKind::Optimal],
            snr_known: vec![true],
            assumed_snr_db: 0.0,
            runs: 20,
            master_seed: 1,
            generator: GeneratorConfig::default(),
            analysis: AnalysisParams::default(),
            truth: TruthTransitions::PerChain,
        }
    }
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        empty("generators", self.generators.len())?;
        empty("snr_db", self.snr_db.len())?;
        empty("num_streams", self.num_streams.len())?;
        empty("solvers", self.solvers.len())?;
        empty("snr_known", self.snr_known.len())?;
        if let Some(models) = &self.models {
            empty("models", models.len())?;
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.num_streams.contains(&0) {
            return Err(Error::Config("num_streams entries must be at least 1".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) || self.assumed_snr_db.is_nan() {
            return Err(Error::Config("SNR values must not be NaN".into()));
        }
        self.generator.validate()
    }

    fn models_for(&self, generator: GeneratorKind) -> Vec<ModelKind> {
        self.models.clone().unwrap_or_else(|| vec![generator.matched_model()])
    }
}

/// Seed for one dataset. It depends on the generator, SNR, stream count and
/// run index but not on the model, solver or clutter assumption, so those
/// are compared on identical data.
pub fn derive_seed(master: u64, generator: GeneratorKind, snr_db: f64, num_streams: usize, run: usize) -> u64 {
    let parts = [generator as u64, snr_db.to_bits(), num_streams as u64, run as u64];
    parts.iter().fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One inference on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub generator: GeneratorKind,
    pub snr_db: f64,
    pub num_streams: usize,
    pub solver: SolverKind,
    pub snr_known: bool,
    pub seed: u64,
    pub f_sn: f64,
    pub f_trans: f64,
    pub model: ModelKind,
    pub run: usize,
    pub k: usize,
    pub log_ratio: f64,
}

/// Mean and standard error over the runs of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub generator: GeneratorKind,
    pub model: ModelKind,
    pub snr_db: f64,
    pub num_streams: usize,
    pub solver: SolverKind,
    pub snr_known: bool,
    pub runs: usize,
    pub f_sn_mean: f64,
    pub f_sn_se: f64,
    pub f_trans_mean: f64,
    pub f_trans_se: f64,
    pub k_mean: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ExperimentReport {
    fn summarize(runs: Vec<RunRecord>) -> Self {
        type Key = (usize, usize, u64, usize, usize, bool);
        let mut order: Vec<Key> = Vec::new();
        let mut groups: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
        for r in &runs {
            let key = (
                r.generator as usize,
                r.model as usize,
                r.snr_db.to_bits(),
                r.num_streams,
                r.solver as usize,
                r.snr_known,
            );
            let group = groups.entry(key).or_default();
            if group.is_empty() {
                order.push(key);
            }
            group.push(r);
        }
        let cells = order
            .iter()
            .map(|key| {
                let group = &groups[key];
                let first = group[0];
                let col = |f: fn(&RunRecord) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
                let (f_sn_mean, f_sn_se) = mean_se(&col(|r| r.f_sn));
                let (f_trans_mean, f_trans_se) = mean_se(&col(|r| r.f_trans));
                let (k_mean, _) = mean_se(&col(|r| r.k as f64));
                CellSummary {
                    generator: first.generator,
                    model: first.model,
                    snr_db: first.snr_db,
                    num_streams: first.num_streams,
                    solver: first.solver,
                    snr_known: first.snr_known,
                    runs: group.len(),
                    f_sn_mean,
                    f_sn_se,
                    f_trans_mean,
                    f_trans_se,
                    k_mean,
                }
            })
            .collect();
        Self { runs, cells }
    }

    /// Per-run rows.
    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "generator", "snr_db", "num_streams", "solver", "snr_known", "seed", "f_sn", "f_trans", "model", "run",
            "k", "log_ratio",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.generator.name().to_string(),
                r.snr_db.to_string(),
                r.num_streams.to_string(),
                r.solver.to_string(),
                r.snr_known.to_string(),
                r.seed.to_string(),
                r.f_sn.to_string(),
                r.f_trans.to_string(),
                r.model.name().to_string(),
                r.run.to_string(),
                r.k.to_string(),
                r.log_ratio.to_string(),
            ])?;
        }
        finish(w)
    }

    /// One row per grid cell.
    pub fn aggregate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "generator", "model", "snr_db", "num_streams", "solver", "snr_known", "runs", "f_sn_mean", "f_sn_se",
            "f_trans_mean", "f_trans_se", "k_mean",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.generator.name().to_string(),
                c.model.name().to_string(),
                c.snr_db.to_string(),
                c.num_streams.to_string(),
                c.solver.to_string(),
                c.snr_known.to_string(),
                c.runs.to_string(),
                c.f_sn_mean.to_string(),
                c.f_sn_se.to_string(),
                c.f_trans_mean.to_string(),
                c.f_trans_se.to_string(),
                c.k_mean.to_string(),
            ])?;
        }
        finish(w)
    }

    /// Writes `runs.csv` and `aggregate.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv()?)?;
        std::fs::write(dir.join("aggregate.csv"), self.aggregate_csv()?)?;
        Ok(())
    }

    pub fn cell(
        &self,
        generator: GeneratorKind,
        model: ModelKind,
        snr_db: f64,
        num_streams: usize,
        solver: SolverKind,
        snr_known: bool,
    ) -> Option<&CellSummary> {
        self.cells.iter().find(|c| {
            c.generator == generator
                && c.model == model
                && c.snr_db == snr_db
                && c.num_streams == num_streams
                && c.solver == solver
                && c.snr_known == snr_known
        })
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Dataset identity within a grid.
#[derive(Clone, Copy, Debug)]
struct Dataset {
    generator: GeneratorKind,
    snr_db: f64,
    num_streams: usize,
    run: usize,
}

/// Generates the dataset for one run of a grid.
pub fn dataset(
    grid: &ExperimentGrid,
    generator: GeneratorKind,
    snr_db: f64,
    num_streams: usize,
    run: usize,
) -> Result<(SynthData, u64)> {
    let seed = derive_seed(grid.master_seed, generator, snr_db, num_streams, run);
    let config = GeneratorConfig {
        kind: generator,
        num_streams,
        snr_db,
        seed,
        ..grid.generator.clone()
    };
    Ok((synth::generate(&config)?, seed))
}

fn run_dataset(grid: &ExperimentGrid, d: Dataset) -> Result<Vec<RunRecord>> {
    let (data, seed) = dataset(grid, d.generator, d.snr_db, d.num_streams, d.run)?;
    let truth = match grid.truth {
        TruthTransitions::PerChain => data.truth.clone(),
        TruthTransitions::Interleaved => data.interleaved_truth()?,
    };
    let mut records = Vec::new();
    for model_kind in grid.models_for(d.generator) {
        for &solver in &grid.solvers {
            for &known in &grid.snr_known {
                let assumed = if known { d.snr_db } else { grid.assumed_snr_db };
                let config = synth::analysis_model(
                    model_kind,
                    &grid.generator,
                    &grid.analysis,
                    ClutterIntensity::SnrDb(assumed),
                    data.clutter_region,
                )?;
                let model = config.resolve(data.events.len(), data.duration)?;
                let inference = infer(&data.events, &model, solver)?;
                records.push(RunRecord {
                    generator: d.generator,
                    snr_db: d.snr_db,
                    num_streams: d.num_streams,
                    solver,
                    snr_known: known,
                    seed,
                    f_sn: f_sn(&truth, &inference.clustering)?.f_measure,
                    f_trans: f_trans(&truth, &inference.clustering)?.f_measure,
                    model: model_kind,
                    run: d.run,
                    k: inference.clustering.num_clusters(),
                    log_ratio: inference.log_ratio,
                });
            }
        }
    }
    Ok(records)
}

/// Runs every cell of `grid` on `jobs` worker threads (`0` picks the number
/// of CPUs). Output order and values do not depend on `jobs`.
pub fn run_experiment(grid: &ExperimentGrid, jobs: usize) -> Result<ExperimentReport> {
    grid.validate()?;
    let mut datasets = Vec::new();
    for &generator in &grid.generators {
        for &snr_db in &grid.snr_db {
            for &num_streams in &grid.num_streams {
                for run in 0..grid.runs {
                    datasets.push(Dataset { generator, snr_db, num_streams, run });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let per_dataset: Vec<Vec<RunRecord>> =
        pool.install(|| datasets.par_iter().map(|&d| run_dataset(grid, d)).collect::<Result<_>>())?;

    // cell-major order: all runs of a cell are contiguous
    let mut runs: Vec<RunRecord> = per_dataset.into_iter().flatten().collect();
    let model_rank = |r: &RunRecord| {
        grid.models_for(r.generator).iter().position(|m| *m == r.model).unwrap_or(0)
    };
    let solver_rank = |r: &RunRecord| grid.solvers.iter().position(|s| *s == r.solver).unwrap_or(0);
    let known_rank = |r: &RunRecord| grid.snr_known.iter().position(|k| *k == r.snr_known).unwrap_or(0);
    let generator_rank = |r: &RunRecord| grid.generators.iter().position(|g| *g == r.generator).unwrap_or(0);
    let snr_rank = |r: &RunRecord| grid.snr_db.iter().position(|s| *s == r.snr_db).unwrap_or(0);
    let streams_rank = |r: &RunRecord| grid.num_streams.iter().position(|n| *n == r.num_streams).unwrap_or(0);
    runs.sort_by_key(|r| {
        (
            generator_rank(r),
            model_rank(r),
            snr_rank(r),
            streams_rank(r),
            solver_rank(r),
            known_rank(r),
            r.run,
        )
    });
    Ok(ExperimentReport::summarize(runs))
}
