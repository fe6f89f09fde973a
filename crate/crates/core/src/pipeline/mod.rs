//! The level-by-level tree builder.
//!
//! For every level `k` with threshold `t = alpha^k` a coin-flip Borůvka grows
//! the components of the level below into those of the compressed hierarchy,
//! using edges of weight at most `alpha t` inside each target set, and any
//! components still apart are then joined to one designated component of
//! their set.

mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{build_hierarchies, canonical_labels, exact_hierarchy, HierarchyConfig, HierarchyError, HierarchyLevels};
use crate::metric::{EdgeRef, MetricInstance};
use crate::mpc::{ClusterConfig, MpcError, RoundLedger};
use crate::partition::Partition;
use crate::rng::{Key, Stream};
use crate::schedule::{Params, BORUVKA_ROUND_OPS, BORUVKA_SETUP_OPS, PHASE_BORUVKA};
use crate::tree::{SpanningTree, TreeEdge, TreeError};

pub use sim::run_pipeline_simulated;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("level {level}: components plus joined edges do not give the target partition")]
    LevelMismatch { level: u32 },
    #[error("assembled edges are not a spanning tree: {0}")]
    NotATree(TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Executor {
    Direct,
    Sim,
}

/// Borůvka edge threshold at level `k`: `alpha^{k+1}` or `alpha^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeThreshold {
    AlphaT,
    T,
}

/// Where the target partitions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchySource {
    /// Decompose, intersect and compress.
    Randomized,
    /// Threshold components of the whole metric.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub c_alpha: f64,
    pub c_mpx: f64,
    pub c_sort: f64,
    pub c_tree: f64,
    pub delta: f64,
    pub seed: u64,
    pub alpha_override: Option<u64>,
    pub compress_rounds: Option<u64>,
    pub boruvka_rounds: Option<u64>,
    pub executor: Executor,
    pub enforce_space: bool,
    pub threshold: EdgeThreshold,
    pub hierarchy: HierarchySource,
    /// Borůvka with id-bit coins, run until no eligible edge is left.
    pub completion: bool,
    pub audit: bool,
}

pub const DEFAULT_C_MPX: f64 = 1.0;

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: 0.2,
            c_alpha: 1.0,
            c_mpx: DEFAULT_C_MPX,
            c_sort: 4.0,
            c_tree: 1.0,
            delta: 0.5,
            seed: 0,
            alpha_override: None,
            compress_rounds: None,
            boruvka_rounds: None,
            executor: Executor::Direct,
            enforce_space: false,
            threshold: EdgeThreshold::AlphaT,
            hierarchy: HierarchySource::Randomized,
            completion: false,
            audit: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0,1], got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        for (name, c) in [("c_alpha", self.c_alpha), ("c_mpx", self.c_mpx), ("c_sort", self.c_sort), ("c_tree", self.c_tree)] {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("{name} must be positive, got {c}"));
            }
        }
        if self.alpha_override.is_some_and(|a| a < 2) {
            return bad("alpha must be at least 2".into());
        }
        if self.boruvka_rounds == Some(0) {
            return bad("Borůvka needs at least one round".into());
        }
        if self.executor == Executor::Sim && self.hierarchy == HierarchySource::Exact {
            return bad("the exact hierarchy is only available to the direct executor".into());
        }
        Ok(())
    }

    pub fn params(&self, metric: &MetricInstance) -> Params {
        let mut p = match self.alpha_override {
            Some(a) => Params::with_alpha(a, metric.max_weight(), self.epsilon),
            None => Params::derive(metric.n(), metric.max_weight(), self.epsilon, self.c_alpha),
        };
        if let Some(r) = self.compress_rounds {
            p.compress_rounds = r;
        }
        if let Some(t) = self.boruvka_rounds {
            p.boruvka_rounds = t;
        }
        p
    }

    pub fn cluster(&self, n: usize) -> Result<ClusterConfig, PipelineError> {
        Ok(ClusterConfig::new(n, self.delta)?.with_constants(self.c_sort, self.c_tree).enforced(self.enforce_space))
    }

    pub(crate) fn edge_threshold(&self, params: &Params, k: u32) -> u64 {
        match self.threshold {
            EdgeThreshold::AlphaT => params.threshold(k + 1),
            EdgeThreshold::T => params.threshold(k),
        }
    }

    pub(crate) fn boruvka_coin(&self, n: usize, level: u32) -> impl Fn(u64, u32) -> bool + '_ {
        let bits = completion_bits(n);
        move |round, comp| {
            if self.completion {
                completion_coin(bits, round, comp)
            } else {
                boruvka_coin(self.seed, level, round, comp)
            }
        }
    }

    pub(crate) fn boruvka_rounds(&self, params: &Params) -> BoruvkaRounds {
        if self.completion {
            BoruvkaRounds::UntilDone
        } else {
            BoruvkaRounds::Fixed(params.boruvka_rounds)
        }
    }
}

pub fn boruvka_coin(seed: u64, level: u32, round: u64, comp: u32) -> bool {
    Key::new(seed, Stream::Boruvka).with(level as u64).with(round).with(comp as u64).coin()
}

pub(crate) fn completion_bits(n: usize) -> u32 {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1)
}

/// Bit `round mod bits` of the component id. Any two distinct ids differ in
/// some bit, so a window of `bits` rounds without a merge is impossible
/// while eligible edges remain.
pub fn completion_coin(bits: u32, round: u64, comp: u32) -> bool {
    (comp >> (round % bits as u64)) & 1 == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoruvkaRounds {
    Fixed(u64),
    UntilDone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoruvkaOutcome {
    pub edges: Vec<EdgeRef>,
    pub survivors: Partition,
    pub rounds: u64,
}

/// Edges of weight at most `threshold` inside `constraint` sets and not
/// inside `initial` clusters, in `(weight, id)` order.
fn constrained_edges(metric: &MetricInstance, initial: &Partition, constraint: &Partition, threshold: u64) -> Vec<EdgeRef> {
    let n = metric.n();
    let mut out = Vec::new();
    for u in 0..n {
        let row = metric.row(u);
        for v in u + 1..n {
            if row[v] <= threshold && constraint.same(u, v) && !initial.same(u, v) {
                out.push(EdgeRef::new(u, v, row[v], n));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Coin-flip Borůvka. Each round every component picks its lightest
/// eligible outgoing edge; a component with coin 0 whose edge leads to a
/// component with coin 1 adds the edge and joins. Decisions use the
/// components and coins of the round start.
pub fn modified_boruvka(
    metric: &MetricInstance,
    initial: &Partition,
    constraint: &Partition,
    threshold: u64,
    rounds: BoruvkaRounds,
    coin: impl Fn(u64, u32) -> bool,
) -> Result<BoruvkaOutcome, PipelineError> {
    if initial.n() != metric.n() || constraint.n() != metric.n() {
        return Err(HierarchyError::SizeMismatch.into());
    }
    if !initial.refines(constraint) {
        return Err(HierarchyError::RefinementViolation.into());
    }
    let n = metric.n();
    let mut edges = constrained_edges(metric, initial, constraint, threshold);
    let mut label = initial.leader_labels();
    let mut best: Vec<Option<(EdgeRef, u32)>> = vec![None; n];
    let mut out = Vec::new();
    let mut round = 0u64;
    loop {
        edges.retain(|e| label[e.u as usize] != label[e.v as usize]);
        match rounds {
            BoruvkaRounds::Fixed(t) if round >= t => break,
            BoruvkaRounds::UntilDone if edges.is_empty() => break,
            _ => {}
        }
        best.iter_mut().for_each(|b| *b = None);
        // edges are sorted, so the first edge seen by a component is its lightest
        for e in &edges {
            let (a, b) = (label[e.u as usize], label[e.v as usize]);
            for (x, y) in [(a, b), (b, a)] {
                if best[x as usize].is_none() {
                    best[x as usize] = Some((*e, y));
                }
            }
        }
        let mut target = vec![u32::MAX; n];
        for x in 0..n as u32 {
            if let Some((e, y)) = best[x as usize] {
                if !coin(round, x) && coin(round, y) {
                    out.push(e);
                    target[x as usize] = y;
                }
            }
        }
        let cand: Vec<u32> = label.iter().map(|&l| if target[l as usize] != u32::MAX { target[l as usize] } else { l }).collect();
        label = canonical_labels(&cand);
        round += 1;
    }
    Ok(BoruvkaOutcome { edges: out, survivors: Partition::from_dense_labels(&label), rounds: round })
}

/// In every constraint set holding several survivors, links each survivor
/// to the one with the smallest id by the lightest edge between them.
pub fn join_remaining(metric: &MetricInstance, survivors: &Partition, constraint: &Partition) -> Vec<EdgeRef> {
    let n = metric.n();
    let label = survivors.leader_labels();
    let mut best: Vec<Option<EdgeRef>> = vec![None; n];
    let mut out = Vec::new();
    for set in constraint.clusters() {
        // the smallest vertex of the set lies in the survivor with the smallest id
        let star = label[set[0] as usize];
        for &v in &set {
            let lv = label[v as usize];
            if lv == star {
                continue;
            }
            for &u in &set {
                if label[u as usize] != star {
                    continue;
                }
                let e = metric.edge(u as usize, v as usize);
                let slot = &mut best[lv as usize];
                if slot.is_none_or(|b| e < b) {
                    *slot = Some(e);
                }
            }
        }
        for &v in &set {
            if let Some(e) = best[v as usize].take() {
                out.push(e);
            }
        }
    }
    out
}

/// Per-level statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: u32,
    pub threshold: u64,
    pub edge_threshold: u64,
    pub components_below: usize,
    pub components: usize,
    pub boruvka_edges: usize,
    pub join_edges: usize,
    /// Joined edges heavier than the edge threshold.
    pub heavy_join_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub tree: SpanningTree,
    pub ledger: RoundLedger,
    pub params: Params,
    pub levels: Vec<LevelReport>,
    /// Raw decomposition clusters over their diameter bound, per level; empty unless audited.
    pub diameter_violations: Vec<usize>,
}

/// Runs the tree-building loop given the target hierarchy.
pub(crate) fn grow_tree(
    metric: &MetricInstance,
    cfg: &PipelineConfig,
    params: &Params,
    hat: &HierarchyLevels,
) -> Result<(Vec<TreeEdge>, Vec<LevelReport>, u64), PipelineError> {
    let n = metric.n();
    let mut below = Partition::singletons(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut reports = Vec::new();
    let mut boruvka_rounds = 0;
    for k in 0..=params.top {
        let target = hat.level(k);
        let theta = cfg.edge_threshold(params, k);
        let b = modified_boruvka(metric, &below, &target, theta, cfg.boruvka_rounds(params), cfg.boruvka_coin(n, k))?;
        let joined = join_remaining(metric, &b.survivors, &target);
        let check = b.survivors.join_edges(joined.iter().map(|e| (e.u as usize, e.v as usize)));
        if check != target {
            return Err(PipelineError::LevelMismatch { level: k });
        }
        boruvka_rounds += b.rounds;
        reports.push(LevelReport {
            level: k,
            threshold: params.threshold(k),
            edge_threshold: theta,
            components_below: below.len(),
            components: target.len(),
            boruvka_edges: b.edges.len(),
            join_edges: joined.len(),
            heavy_join_edges: joined.iter().filter(|e| e.weight > theta).count(),
        });
        edges.extend(b.edges.into_iter().chain(joined).map(|edge| TreeEdge { edge, level: k }));
        below = target;
    }
    Ok((edges, reports, boruvka_rounds))
}

/// The ledger both executors charge. Completion mode replaces the fixed
/// Borůvka round count by the rounds actually run plus one closing check.
pub(crate) fn charged_ledger(
    cfg: &PipelineConfig,
    params: &Params,
    cluster: &ClusterConfig,
    boruvka_rounds_run: u64,
) -> RoundLedger {
    let mut ledger = params.closed_form(cluster);
    if cfg.completion {
        let per_op = cluster.sort_rounds() + cluster.tree_rounds();
        let ops = params.levels() * (BORUVKA_SETUP_OPS + 2) + BORUVKA_ROUND_OPS * boruvka_rounds_run;
        ledger.rounds_by_phase.insert(PHASE_BORUVKA.to_string(), ops * per_op);
    }
    ledger
}

pub(crate) fn assemble(n: usize, edges: Vec<TreeEdge>) -> Result<SpanningTree, PipelineError> {
    let tree = SpanningTree::new(n, edges);
    tree.validate(None).map_err(PipelineError::NotATree)?;
    Ok(tree)
}

/// The partitions the tree is grown against, as both executors build them.
pub fn target_hierarchy(metric: &MetricInstance, cfg: &PipelineConfig) -> HierarchyLevels {
    let params = cfg.params(metric);
    match cfg.hierarchy {
        HierarchySource::Exact => exact_hierarchy(metric, &params),
        HierarchySource::Randomized => {
            build_hierarchies(metric, &params, &HierarchyConfig { seed: cfg.seed, c_mpx: cfg.c_mpx, audit: false }).compressed
        }
    }
}

/// Direct sequential executor.
pub fn run_pipeline(metric: &MetricInstance, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    if cfg.executor == Executor::Sim {
        return run_pipeline_simulated(metric, cfg);
    }
    let n = metric.n();
    let params = cfg.params(metric);
    let cluster = cfg.cluster(n)?;
    let (hat, diameter_violations) = match cfg.hierarchy {
        HierarchySource::Exact => (exact_hierarchy(metric, &params), Vec::new()),
        HierarchySource::Randomized => {
            let h = build_hierarchies(metric, &params, &HierarchyConfig { seed: cfg.seed, c_mpx: cfg.c_mpx, audit: cfg.audit });
            (h.compressed, h.diameter_violations)
        }
    };
    let (edges, levels, rounds_run) = grow_tree(metric, cfg, &params, &hat)?;
    let tree = assemble(n, edges)?;
    let ledger = charged_ledger(cfg, &params, &cluster, rounds_run);
    Ok(PipelineOutput { tree, ledger, params, levels, diameter_violations })
}
