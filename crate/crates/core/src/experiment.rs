//! Seeded batches of pipeline runs and their tabular reports.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle_graph::CycleGraph;
use crate::hierarchy::HierarchyLevels;
use crate::partition::Partition;
use crate::tree::SpanningTree;
use crate::metric::{random_band_metric, uniform_plane_metric, MetricError, MetricInstance};
use crate::oracle::exact_mst;
use crate::pipeline::{run_pipeline, Executor, PipelineConfig, PipelineError, PipelineOutput};
use crate::schedule::{PHASE_BORUVKA, PHASE_COMPRESS, PHASE_INTERSECT, PHASE_JOIN, PHASE_MPX};
use crate::tree::TreeError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}", path.display())]
    Metric { path: PathBuf, source: MetricError },
    #[error("{}", path.display())]
    Graph { path: PathBuf, source: crate::cycle_graph::CycleGraphError },
    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
    #[error("instance {instance}, seed {seed}: {source}")]
    Pipeline { instance: String, seed: u64, source: PipelineError },
    #[error("instance {instance}, seed {seed}: {source}")]
    Invariant { instance: String, seed: u64, source: TreeError },
    #[error("report: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Empty(&'static str),
}

impl ExperimentError {
    /// True for failures of the algorithm's guarantees rather than of input.
    pub fn is_invariant(&self) -> bool {
        matches!(self, ExperimentError::Invariant { .. } | ExperimentError::Pipeline { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Where an instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSource {
    /// A metric file.
    File { path: PathBuf },
    /// Uniform points in the unit square.
    Plane { n: usize, scale: f64, seed: u64 },
    /// Weights drawn from `[lo, 2 lo]`.
    Band { n: usize, lo: u64, seed: u64 },
    /// The (1,2)-metric of disjoint cycles.
    Cycles { lengths: Vec<usize> },
}

impl InstanceSource {
    pub fn id(&self) -> String {
        match self {
            InstanceSource::File { path } => path.display().to_string(),
            InstanceSource::Plane { n, scale, seed } => format!("plane-n{n}-s{scale}-g{seed}"),
            InstanceSource::Band { n, lo, seed } => format!("band-n{n}-lo{lo}-g{seed}"),
            InstanceSource::Cycles { lengths } => {
                let l: Vec<String> = lengths.iter().map(usize::to_string).collect();
                format!("cycles-{}", l.join("-"))
            }
        }
    }

    pub fn load(&self) -> Result<MetricInstance, ExperimentError> {
        Ok(match self {
            InstanceSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                MetricInstance::from_text(&text).map_err(|source| ExperimentError::Metric { path: path.clone(), source })?
            }
            InstanceSource::Plane { n, scale, seed } => uniform_plane_metric(*n, *scale, *seed),
            InstanceSource::Band { n, lo, seed } => random_band_metric(*n, *lo, *seed),
            InstanceSource::Cycles { lengths } => CycleGraph::from_lengths(lengths, &[])
                .map_err(|source| ExperimentError::Graph { path: PathBuf::from(self.id()), source })?
                .to_metric(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instances: Vec<InstanceSource>,
    pub seeds: Vec<u64>,
    /// Timed repetitions per run; the fastest is reported.
    pub repetitions: u32,
    /// Values of epsilon to sweep; empty means `pipeline.epsilon` alone.
    pub epsilons: Vec<f64>,
    pub pipeline: PipelineConfig,
    /// Runs executed at once.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instances: Vec::new(),
            seeds: vec![0],
            repetitions: 1,
            epsilons: Vec::new(),
            pipeline: PipelineConfig::default(),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    fn epsilons(&self) -> Vec<f64> {
        if self.epsilons.is_empty() {
            vec![self.pipeline.epsilon]
        } else {
            self.epsilons.clone()
        }
    }
}

/// One pipeline run. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub seed: u64,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: u64,
    pub top_level: u32,
    pub compress_rounds: u64,
    pub boruvka_rounds: u64,
    pub executor: Executor,
    pub tree_weight: u64,
    pub exact_weight: u64,
    pub ratio: f64,
    pub rounds_mpx: u64,
    pub rounds_intersect: u64,
    pub rounds_compress: u64,
    pub rounds_boruvka: u64,
    pub rounds_join: u64,
    pub rounds_total: u64,
    pub closed_form_total: u64,
    pub peak_machine_io: u64,
    pub space: u64,
    pub wall_ms: f64,
}

pub const CSV_COLUMNS: [&str; 23] = [
    "instance",
    "seed",
    "n",
    "epsilon",
    "delta",
    "alpha",
    "top_level",
    "compress_rounds",
    "boruvka_rounds",
    "executor",
    "tree_weight",
    "exact_weight",
    "ratio",
    "rounds_mpx",
    "rounds_intersect",
    "rounds_compress",
    "rounds_boruvka",
    "rounds_join",
    "rounds_total",
    "closed_form_total",
    "peak_machine_io",
    "space",
    "wall_ms",
];

impl ReportRow {
    pub fn from_output(
        instance: &str,
        metric: &MetricInstance,
        cfg: &PipelineConfig,
        out: &PipelineOutput,
        exact_weight: u64,
        wall_ms: f64,
    ) -> Result<Self, PipelineError> {
        let cluster = cfg.cluster(metric.n())?;
        let tree_weight = out.tree.total_weight();
        Ok(ReportRow {
            instance: instance.to_string(),
            seed: cfg.seed,
            n: metric.n(),
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            alpha: out.params.alpha,
            top_level: out.params.top,
            compress_rounds: out.params.compress_rounds,
            boruvka_rounds: out.params.boruvka_rounds,
            executor: cfg.executor,
            tree_weight,
            exact_weight,
            ratio: if exact_weight == 0 { 1.0 } else { tree_weight as f64 / exact_weight as f64 },
            rounds_mpx: out.ledger.rounds(PHASE_MPX),
            rounds_intersect: out.ledger.rounds(PHASE_INTERSECT),
            rounds_compress: out.ledger.rounds(PHASE_COMPRESS),
            rounds_boruvka: out.ledger.rounds(PHASE_BORUVKA),
            rounds_join: out.ledger.rounds(PHASE_JOIN),
            rounds_total: out.ledger.total_rounds(),
            closed_form_total: out.params.closed_form(&cluster).total_rounds(),
            peak_machine_io: out.ledger.peak_machine_io,
            space: cluster.space,
            wall_ms,
        })
    }

    fn order_key(&self) -> (&str, u64, u64, u64, Executor) {
        (&self.instance, self.seed, self.epsilon.to_bits(), self.delta.to_bits(), self.executor)
    }
}

/// One run: the pipeline output, and its row once the tree is checked
/// against the metric and the level caps.
pub fn run_one(
    instance: &str,
    metric: &MetricInstance,
    cfg: &PipelineConfig,
    exact_weight: u64,
    repetitions: u32,
) -> Result<(PipelineOutput, ReportRow), ExperimentError> {
    let wrap = |source| ExperimentError::Pipeline { instance: instance.to_string(), seed: cfg.seed, source };
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        let o = run_pipeline(metric, cfg).map_err(wrap)?;
        best = best.min(start.elapsed().as_secs_f64() * 1e3);
        out = Some(o);
    }
    let out = out.expect("at least one repetition");
    out.tree
        .validate_against(metric, Some(out.params.alpha))
        .map_err(|source| ExperimentError::Invariant { instance: instance.to_string(), seed: cfg.seed, source })?;
    let row = ReportRow::from_output(instance, metric, cfg, &out, exact_weight, best).map_err(wrap)?;
    Ok((out, row))
}

/// Every (instance, epsilon, seed) combination, spread over `workers`
/// threads. Rows come back in canonical order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, ExperimentError> {
    if cfg.instances.is_empty() {
        return Err(ExperimentError::Empty("no instances"));
    }
    if cfg.seeds.is_empty() {
        return Err(ExperimentError::Empty("no seeds"));
    }
    let mut loaded = Vec::with_capacity(cfg.instances.len());
    for src in &cfg.instances {
        let m = src.load()?;
        let exact = exact_mst(&m).total_weight();
        loaded.push((src.id(), m, exact));
    }
    let mut jobs = Vec::new();
    for i in 0..loaded.len() {
        for &eps in &cfg.epsilons() {
            for &seed in &cfg.seeds {
                jobs.push((i, cfg.pipeline.clone().with_epsilon(eps).with_seed(seed)));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..cfg.workers.clamp(1, jobs.len()) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, pc)) = jobs.get(j) else { break };
                let (id, m, exact) = &loaded[*i];
                let r = run_one(id, m, pc, *exact, cfg.repetitions).map(|(_, row)| row);
                results.lock().unwrap().push((j, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(j, _)| *j);
    let mut rows = results.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>, _>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// Stable sort by instance, then seed, then the remaining run parameters.
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

/// Writes the rows in canonical order: a header and one line per row for
/// CSV, one object per line for JSON-lines.
pub fn emit_report<W: Write>(rows: &[ReportRow], format: ReportFormat, out: W) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::Empty("no rows to report"));
    }
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
        }
        ReportFormat::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for r in &rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n").map_err(|e| ExperimentError::Csv(e.into()))?;
            }
            out.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
        }
    }
    Ok(())
}

pub fn read_report(text: &str, format: ReportFormat) -> Result<Vec<ReportRow>, ExperimentError> {
    match format {
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            Ok(r.deserialize().collect::<Result<_, _>>()?)
        }
        ReportFormat::Jsonl => {
            text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
        }
    }
}

/// Everything needed to rerun a report exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub config: ExperimentConfig,
}

/// Writes the report to `path` and its config next to it as
/// `<path>.meta.json`.
pub fn write_report(rows: &[ReportRow], format: ReportFormat, path: &Path, cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    emit_report(rows, format, f)?;
    let meta_path = meta_path(path);
    let meta = ReportMeta { version: VERSION.to_string(), config: cfg.clone() };
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Re-checks a dumped tree, and optionally the hierarchy it was grown
/// against: tree shape and metric weights, per-level caps, a refining
/// chain of levels, and tree edges up to level `k` joining exactly the
/// clusters of level `k`. Returns one message per violation.
pub fn verify_artifacts(metric: &MetricInstance, tree: &SpanningTree, hierarchy: Option<&HierarchyLevels>, alpha: Option<u64>) -> Vec<String> {
    let mut bad = Vec::new();
    let alpha = alpha.or(hierarchy.map(|h| h.alpha));
    if let Err(e) = tree.validate_against(metric, alpha) {
        bad.push(format!("tree: {e}"));
    }
    let Some(h) = hierarchy else { return bad };
    if h.n() != metric.n() {
        bad.push(format!("hierarchy has {} vertices, metric {}", h.n(), metric.n()));
        return bad;
    }
    if let Some(k) = h.chain_violation() {
        bad.push(format!("hierarchy level {k} does not refine the next"));
    }
    let top = h.top();
    if let Some(e) = tree.edges().iter().find(|e| e.level > top) {
        bad.push(format!("tree edge ({},{}) has level {} above the top {top}", e.edge.u, e.edge.v, e.level));
    }
    let mut joined = Partition::singletons(metric.n());
    for k in 0..=top {
        joined = joined.join_edges(tree.edges().iter().filter(|e| e.level == k).map(|e| (e.edge.u as usize, e.edge.v as usize)));
        if joined != h.level(k) {
            bad.push(format!("tree edges up to level {k} do not join the level-{k} clusters"));
        }
    }
    bad
}
