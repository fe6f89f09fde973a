//! Ordering the vertices of a cycle with an approximate-MST routine as a
//! black box.
//!
//! Vertices are randomly relabeled before every call, so isomorphic edges are
//! removed with equal probability. Removal frequencies after a two-switch
//! reveal whether the switch cut off a short cycle, which in turn tells
//! whether two vertices are close. Close pairs give neighborhoods, and
//! neighborhoods let every cycle be broken into shorter ones until the pieces
//! are small enough to read off directly.

mod classify;
mod order;
mod switch;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle_graph::{ComponentKind, CycleGraph, CycleGraphError};
use crate::oracle::{exact_mst, removed_edges};
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::rng::Key;

pub use classify::{group_and_classify, group_edges, CaseLabel, Classification, Flag, GroupSummary, SwitchContext};
pub use order::{
    break_cycles, detect_neighborhoods, inverse_epsilon, near_pairs, order_cycle, pad_to_power, solve_one_vs_two, true_neighborhoods,
    is_valid_order, CycleOrder, Detection, LevelSummary, Neighborhood, PairDiagnostic, Solve, Verdict,
};
pub use switch::{predict_switch, two_switch, SwitchCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("switched edges share vertex {0}")]
    SharedVertex(u32),
    #[error("a two-switch needs two distinct edges")]
    SameEdge,
    #[error(transparent)]
    Graph(#[from] CycleGraphError),
    #[error("oracle output is not the complement of a spanning forest")]
    OracleMisbehaved,
    #[error("removal groups match no known case")]
    AmbiguousGrouping,
    #[error("neighborhood of vertex {0} is not a path of the expected size")]
    InvalidNeighborhood(u32),
    #[error("cycle length {len} is not divisible by {k}")]
    IndivisibleLength { len: usize, k: usize },
    #[error("1/epsilon must be an integer of at least 2, got {0}")]
    NonIntegralInverse(f64),
    #[error("{n} vertices is not a power of {k}")]
    NotAPower { n: usize, k: usize },
    #[error("ordering failed: {0}")]
    Failure(String),
}

/// A routine that, given a graph of disjoint cycles and paths, builds a
/// spanning tree of the (1,2)-metric the graph induces and reports which
/// graph edges it left out.
pub trait MstOracle {
    fn epsilon(&self) -> f64;

    fn removed(&self, graph: &CycleGraph) -> Vec<(u32, u32)>;

    /// Repeated runs on one graph. The default relabels and calls `removed`.
    fn sampler<'a>(&'a self, graph: &'a CycleGraph, layout: &'a CycleLayout) -> Box<dyn RemovalSampler + 'a> {
        Box::new(RelabelSampler { oracle: self, graph, edges: &layout.edges })
    }
}

/// The sorted edge list of a graph and the edges of each cycle in walk order.
#[derive(Debug, Clone)]
pub struct CycleLayout {
    pub edges: Vec<(u32, u32)>,
    /// `(edge index, v_j, v_j+1)` for every cycle edge in walk order, cycle
    /// after cycle.
    pub cycle_edges: Vec<(u32, u32, u32)>,
    /// Cycle `c` is `cycle_edges[bounds[c]..bounds[c + 1]]`.
    pub bounds: Vec<usize>,
}

impl CycleLayout {
    pub fn new(graph: &CycleGraph) -> Self {
        let edges = graph.edges();
        let mut cycle_edges = Vec::with_capacity(edges.len());
        let mut bounds = vec![0];
        for c in graph.components().iter().filter(|c| c.kind == ComponentKind::Cycle) {
            let k = c.vertices.len();
            for j in 0..k {
                let (a, b) = (c.vertices[j], c.vertices[(j + 1) % k]);
                cycle_edges.push((edges.binary_search(&(a.min(b), a.max(b))).unwrap() as u32, a, b));
            }
            bounds.push(cycle_edges.len());
        }
        CycleLayout { edges, cycle_edges, bounds }
    }

    pub fn cycles(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn cycle(&self, c: usize) -> &[(u32, u32, u32)] {
        &self.cycle_edges[self.bounds[c]..self.bounds[c + 1]]
    }
}

pub trait RemovalSampler {
    /// One run on the graph relabeled in the order of `keys`: the vertex with
    /// the smallest key gets label 0. Keys are pairwise distinct (see
    /// [`distinct_keys`]). Pushes indices into
    /// `graph.edges()` of the removed edges; returns false if the routine
    /// named a non-edge.
    fn sample(&mut self, keys: &[u64], out: &mut Vec<u32>) -> bool;
}

/// Overwrites the low bits of each key with its vertex id, so keys are
/// distinct and order like `(key, id)` on the remaining high bits.
pub fn distinct_keys(keys: &mut [u64]) {
    let bits = usize::BITS - keys.len().saturating_sub(1).leading_zeros();
    let high = if bits == 0 { u64::MAX } else { u64::MAX << bits };
    for (v, k) in keys.iter_mut().enumerate() {
        *k = (*k & high) | v as u64;
    }
}

/// Labels induced by ranking `(keys[v], v)`.
pub fn ranks(keys: &[u64]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..keys.len() as u32).collect();
    idx.sort_unstable_by_key(|&v| (keys[v as usize], v));
    let mut perm = vec![0u32; keys.len()];
    for (r, &v) in idx.iter().enumerate() {
        perm[v as usize] = r as u32;
    }
    perm
}

struct RelabelSampler<'a, O: ?Sized> {
    oracle: &'a O,
    graph: &'a CycleGraph,
    edges: &'a [(u32, u32)],
}

impl<O: MstOracle + ?Sized> RemovalSampler for RelabelSampler<'_, O> {
    fn sample(&mut self, keys: &[u64], out: &mut Vec<u32>) -> bool {
        let perm = ranks(keys);
        let mut ok = true;
        for e in relabeled_removal(self.oracle, self.graph, &perm) {
            match self.edges.binary_search(&e) {
                Ok(i) => out.push(i as u32),
                Err(_) => ok = false,
            }
        }
        ok
    }
}

fn relabeled_removal<O: MstOracle + ?Sized>(oracle: &O, graph: &CycleGraph, perm: &[u32]) -> Vec<(u32, u32)> {
    let mut inv = vec![0u32; perm.len()];
    for (v, &p) in perm.iter().enumerate() {
        inv[p as usize] = v as u32;
    }
    let mut out: Vec<(u32, u32)> = oracle
        .removed(&graph.relabel(perm))
        .into_iter()
        .map(|(a, b)| {
            let (a, b) = (inv[a as usize], inv[b as usize]);
            (a.min(b), a.max(b))
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Runs the oracle on `graph` relabeled by `perm` (vertex `v` becomes
/// `perm[v]`) and maps the removed edges back.
pub fn relabel_with<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    perm: &[u32],
) -> Result<Vec<(u32, u32)>, ReductionError> {
    let removed = relabeled_removal(oracle, graph, perm);
    if !is_forest_complement(graph, &removed) {
        return Err(ReductionError::OracleMisbehaved);
    }
    Ok(removed)
}

/// [`relabel_with`] under a uniformly random permutation.
pub fn relabel_wrap<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    rng: &mut impl Rng,
) -> Result<Vec<(u32, u32)>, ReductionError> {
    let mut perm: Vec<u32> = (0..graph.n() as u32).collect();
    perm.shuffle(rng);
    relabel_with(oracle, graph, &perm)
}

/// True when every removed pair is an edge and every cycle loses one.
pub fn is_forest_complement(graph: &CycleGraph, removed: &[(u32, u32)]) -> bool {
    if removed.iter().any(|&(a, b)| !graph.has_edge(a, b)) {
        return false;
    }
    for c in graph.cycles() {
        let k = c.vertices.len();
        let hit = (0..k).any(|j| {
            let (a, b) = (c.vertices[j], c.vertices[(j + 1) % k]);
            removed.binary_search(&(a.min(b), a.max(b))).is_ok()
        });
        if !hit {
            return false;
        }
    }
    true
}

/// Kruskal with `(weight, id)` order on the (1,2)-metric. Weight-1 edges are
/// taken in id order, so each cycle loses exactly its largest-id edge.
#[derive(Debug, Clone, Copy)]
pub struct ExactMstOracle {
    pub epsilon: f64,
}

impl ExactMstOracle {
    pub fn new(epsilon: f64) -> Self {
        ExactMstOracle { epsilon }
    }

    /// Same output as running [`exact_mst`] on the full metric.
    pub fn via_metric(graph: &CycleGraph) -> Vec<(u32, u32)> {
        removed_edges(graph, &exact_mst(&graph.to_metric()))
    }
}

impl MstOracle for ExactMstOracle {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn removed(&self, graph: &CycleGraph) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = graph
            .cycles()
            .iter()
            .map(|c| {
                let k = c.vertices.len();
                (0..k)
                    .map(|j| {
                        let (a, b) = (c.vertices[j], c.vertices[(j + 1) % k]);
                        (a.min(b), a.max(b))
                    })
                    .max()
                    .unwrap()
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn sampler<'a>(&'a self, _graph: &'a CycleGraph, layout: &'a CycleLayout) -> Box<dyn RemovalSampler + 'a> {
        Box::new(ExactSampler { layout })
    }
}

struct ExactSampler<'a> {
    layout: &'a CycleLayout,
}

impl RemovalSampler for ExactSampler<'_> {
    fn sample(&mut self, keys: &[u64], out: &mut Vec<u32>) -> bool {
        for c in 0..self.layout.cycles() {
            // heaviest by smaller end, then larger end
            let cyc = self.layout.cycle(c);
            let (mut best, mut lo, mut hi) = (0u32, 0u64, 0u64);
            for &(i, a, b) in cyc {
                let (x, y) = (keys[a as usize], keys[b as usize]);
                let (l, h) = (x.min(y), x.max(y));
                if l > lo || (l == lo && h > hi) {
                    (best, lo, hi) = (i, l, h);
                }
            }
            out.push(best);
        }
        true
    }
}

/// The approximation pipeline as a black box.
#[derive(Debug, Clone)]
pub struct PipelineOracle {
    pub config: PipelineConfig,
}

impl MstOracle for PipelineOracle {
    fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    fn removed(&self, graph: &CycleGraph) -> Vec<(u32, u32)> {
        match run_pipeline(&graph.to_metric(), &self.config) {
            Ok(out) => removed_edges(graph, &out.tree),
            // reported as misbehavior by the caller
            Err(_) => Vec::new(),
        }
    }
}

/// Thresholds for reading removal profiles. `asymptotic` gives the large-n
/// values; `calibrated` is tuned for `1/eps = 3` at a few hundred vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Pairs are tested for hop distance at most `d_pair`.
    pub d_pair: u32,
    /// A small group is flagged when some estimate exceeds this.
    pub hi_cut: f64,
    /// Expected lower bound for edges of a short cycle.
    pub small_min: f64,
    /// Expected upper bound for untouched edges.
    pub bulk_max: f64,
    /// Expected upper bound for the long cycle in the isolated probe.
    pub probe_max: f64,
    /// Estimates closer than this are grouped.
    pub gap: f64,
    pub c_s: f64,
    /// Screen profiles after every `screen_batch` samples; 0 disables.
    pub screen_batch: u32,
    pub retries: u32,
}

impl ReductionConfig {
    pub fn asymptotic(eps: f64) -> Self {
        ReductionConfig {
            d_pair: ((1.0 / (20.0 * eps)).floor() as u32).max(2),
            hi_cut: 9.0 * eps,
            small_min: 10.0 * eps,
            bulk_max: 6.0 * eps,
            probe_max: 3.0 * eps,
            gap: eps / 2.0,
            c_s: 8.0,
            screen_batch: 0,
            retries: 1,
        }
    }

    pub fn calibrated() -> Self {
        ReductionConfig {
            d_pair: 2,
            hi_cut: 0.29,
            small_min: 1.0 / 3.0,
            bulk_max: 1.0 / 6.0,
            probe_max: 1.0 / 6.0,
            gap: 0.08,
            c_s: 32.0,
            screen_batch: 4,
            retries: 1,
        }
    }

    /// `ceil(c_s ln n / eps^2)`
    pub fn samples(&self, n: usize, eps: f64) -> u32 {
        ((self.c_s * (n.max(2) as f64).ln() / (eps * eps)).ceil() as u32).max(1)
    }

    fn screening(&self) -> bool {
        self.screen_batch > 0 && (self.d_pair as f64 + 1.0) * self.hi_cut < 1.0
    }
}

/// Removal frequencies over repeated relabeled runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalProfile {
    /// Sorted edges of the profiled graph.
    pub edges: Vec<(u32, u32)>,
    pub counts: Vec<u32>,
    pub samples: u32,
    /// Runs whose output did not cut every cycle or named a non-edge.
    pub misbehaved: u32,
}

impl RemovalProfile {
    pub fn p_hat(&self) -> Vec<f64> {
        let s = self.samples.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / s).collect()
    }

    pub fn p_hat_of(&self, e: (u32, u32)) -> Option<f64> {
        let e = (e.0.min(e.1), e.0.max(e.1));
        let i = self.edges.binary_search(&e).ok()?;
        Some(self.counts[i] as f64 / self.samples.max(1) as f64)
    }

    pub fn removed_total(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.samples.max(1) as f64
    }
}

struct Profiler<'a> {
    sampler: Box<dyn RemovalSampler + 'a>,
    cycle_of_edge: Vec<u32>,
    cycles: usize,
    rng: ChaCha8Rng,
    keys: Vec<u64>,
    out: Vec<u32>,
    hit: Vec<u32>,
    profile: RemovalProfile,
}

impl<'a> Profiler<'a> {
    fn new<O: MstOracle + ?Sized>(oracle: &'a O, graph: &'a CycleGraph, layout: &'a CycleLayout, key: Key) -> Self {
        let m = layout.edges.len();
        let mut cycle_of_edge = vec![u32::MAX; m];
        for c in 0..layout.cycles() {
            for &(i, _, _) in layout.cycle(c) {
                cycle_of_edge[i as usize] = c as u32;
            }
        }
        let cycles = layout.cycles();
        Profiler {
            sampler: oracle.sampler(graph, layout),
            cycle_of_edge,
            cycles,
            rng: key.rng(),
            keys: vec![0; graph.n()],
            out: Vec::new(),
            hit: vec![u32::MAX; cycles],
            profile: RemovalProfile { edges: layout.edges.clone(), counts: vec![0; m], samples: 0, misbehaved: 0 },
        }
    }

    fn run(&mut self, upto: u32) {
        while self.profile.samples < upto {
            let i = self.profile.samples;
            self.rng.set_stream(i as u64);
            self.rng.set_word_pos(0);
            self.rng.fill(&mut self.keys[..]);
            distinct_keys(&mut self.keys);
            self.out.clear();
            let mut ok = self.sampler.sample(&self.keys, &mut self.out);
            let mut hits = 0;
            for &e in &self.out {
                self.profile.counts[e as usize] += 1;
                let c = self.cycle_of_edge[e as usize];
                if c != u32::MAX && self.hit[c as usize] != i {
                    self.hit[c as usize] = i;
                    hits += 1;
                }
            }
            ok &= hits == self.cycles;
            if !ok {
                self.profile.misbehaved += 1;
            }
            self.profile.samples += 1;
        }
    }

    /// Sum of the `k` largest counts.
    fn top_sum(&self, k: usize) -> u64 {
        let mut c: Vec<u32> = self.profile.counts.clone();
        let k = k.min(c.len());
        if k == 0 {
            return 0;
        }
        let idx = c.len() - k;
        c.select_nth_unstable(idx);
        c[idx..].iter().map(|&x| x as u64).sum()
    }
}

/// Removal frequencies over `samples` independent relabeled runs. Run `i`
/// draws its labels from `key` and `i` alone.
pub fn estimate_removal_profile<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    samples: u32,
    key: Key,
) -> RemovalProfile {
    let layout = CycleLayout::new(graph);
    let mut p = Profiler::new(oracle, graph, &layout, key);
    p.run(samples);
    p.profile
}

/// Like [`estimate_removal_profile`], but stops early once no set of
/// `d_pair + 1` edges can plausibly hold a short cycle. Returns whether the
/// profile was cut short.
pub fn screened_profile<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    samples: u32,
    cfg: &ReductionConfig,
    key: Key,
) -> (RemovalProfile, bool) {
    let layout = CycleLayout::new(graph);
    let mut p = Profiler::new(oracle, graph, &layout, key);
    if cfg.screening() {
        let top = cfg.d_pair as usize + 1;
        let mut b = cfg.screen_batch;
        while b < samples {
            p.run(b);
            if (p.top_sum(top) as f64) < cfg.hi_cut * top as f64 * b as f64 {
                return (p.profile, true);
            }
            b += cfg.screen_batch;
        }
    }
    p.run(samples);
    (p.profile, false)
}
