//! Low-diameter decompositions, their intersection into a hierarchy, and
//! coin-flip compression of each level.

use thiserror::Error;

use crate::metric::MetricInstance;
use crate::partition::Partition;
use crate::rng::{Key, Stream};
use crate::schedule::Params;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("partition does not refine its envelope")]
    RefinementViolation,
    #[error("no levels given")]
    Empty,
    #[error("partitions disagree on the vertex count")]
    SizeMismatch,
    #[error("hierarchy dump, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A refinement chain indexed by level `k`, with threshold `alpha^k`. The
/// level above the top is the one-cluster partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyLevels {
    pub alpha: u64,
    pub levels: Vec<Partition>,
}

impl HierarchyLevels {
    pub fn top(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn n(&self) -> usize {
        self.levels.first().map_or(0, Partition::n)
    }

    pub fn threshold(&self, k: u32) -> u64 {
        crate::tree::power(self.alpha, k)
    }

    /// Level `k`, or the trivial partition for `k` past the top.
    pub fn level(&self, k: u32) -> Partition {
        match self.levels.get(k as usize) {
            Some(p) => p.clone(),
            None => Partition::trivial(self.n()),
        }
    }

    /// First level that fails to refine the next, the virtual top included.
    pub fn chain_violation(&self) -> Option<u32> {
        let trivial = Partition::trivial(self.n());
        for k in 0..self.levels.len() {
            let next = self.levels.get(k + 1).unwrap_or(&trivial);
            if !self.levels[k].refines(next) {
                return Some(k as u32);
            }
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("hierarchy n={} alpha={}\n", self.n(), self.alpha);
        for (k, p) in self.levels.iter().enumerate() {
            s.push_str(&format!("level {} t={}\n", k, self.threshold(k as u32)));
            let row: Vec<String> = p.labels().iter().map(u32::to_string).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, HierarchyError> {
        let err = |line: usize, msg: &str| HierarchyError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let field = |tok: Option<&str>, name: &str, line: usize| -> Result<u64, HierarchyError> {
            tok.and_then(|t| t.strip_prefix(name))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(line, &format!("expected {name}<int>")))
        };
        let mut toks = header.split_whitespace();
        if toks.next() != Some("hierarchy") {
            return Err(err(1, "expected header `hierarchy n=<n> alpha=<alpha>`"));
        }
        let n = field(toks.next(), "n=", 1)? as usize;
        let alpha = field(toks.next(), "alpha=", 1)?;
        let mut levels = Vec::new();
        while let Some((i, head)) = lines.next() {
            let mut t = head.split_whitespace();
            if t.next() != Some("level") || t.next().and_then(|k| k.parse::<usize>().ok()) != Some(levels.len()) {
                return Err(err(i + 1, "expected `level <k> t=<threshold>` in order"));
            }
            let (j, row) = lines.next().ok_or_else(|| err(i + 2, "missing cluster row"))?;
            let labels: Result<Vec<u32>, _> = row.split_whitespace().map(str::parse).collect();
            let labels = labels.map_err(|_| err(j + 1, "non-integer label"))?;
            if labels.len() != n {
                return Err(err(j + 1, &format!("expected {n} labels, found {}", labels.len())));
            }
            levels.push(Partition::from_dense_labels(&labels));
        }
        if levels.is_empty() {
            return Err(HierarchyError::Empty);
        }
        Ok(HierarchyLevels { alpha, levels })
    }
}

/// Per-vertex delays for one decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDraw {
    pub delays: Vec<f64>,
}

impl DelayDraw {
    /// Exponential delays with rate `c_mpx ln(n) / t`, keyed by `(seed, level, vertex)`.
    pub fn keyed(seed: u64, level: u32, n: usize, t: u64, c_mpx: f64) -> Self {
        let rate = mpx_rate(n, t, c_mpx);
        let key = Key::new(seed, Stream::Mpx).with(level as u64);
        DelayDraw { delays: (0..n).map(|v| key.with(v as u64).exponential(rate)).collect() }
    }

    pub fn from_values(delays: Vec<f64>) -> Self {
        DelayDraw { delays }
    }
}

pub(crate) fn mpx_rate(n: usize, t: u64, c_mpx: f64) -> f64 {
    // with a single vertex any finite delay gives the same answer
    let ln = (n as f64).ln().max(f64::MIN_POSITIVE);
    c_mpx * ln / t as f64
}

/// Shifted distance of `v` as seen from `u`.
#[inline]
pub(crate) fn shifted(metric: &MetricInstance, u: usize, v: usize, delays: &[f64]) -> f64 {
    metric.w(u, v) as f64 - delays[v]
}

/// Center of every vertex: the minimizer of `w(u, v) - delay(v)`, smaller id on ties.
pub fn mpx_centers(metric: &MetricInstance, delays: &DelayDraw) -> Vec<u32> {
    let n = metric.n();
    (0..n)
        .map(|u| {
            let mut best = (shifted(metric, u, 0, &delays.delays), 0usize);
            for v in 1..n {
                let s = shifted(metric, u, v, &delays.delays);
                if s.total_cmp(&best.0).is_lt() {
                    best = (s, v);
                }
            }
            best.1 as u32
        })
        .collect()
}

pub fn mpx_decompose(metric: &MetricInstance, delays: &DelayDraw) -> Partition {
    Partition::from_dense_labels(&mpx_centers(metric, delays))
}

/// Center of one vertex under delays drawn for `(seed, level)`.
pub fn center_of(metric: &MetricInstance, u: usize, seed: u64, level: u32, t: u64, c_mpx: f64) -> u32 {
    let n = metric.n();
    let rate = mpx_rate(n, t, c_mpx);
    let key = Key::new(seed, Stream::Mpx).with(level as u64);
    let mut best = (f64::INFINITY, 0u32);
    for v in 0..n {
        let s = metric.w(u, v) as f64 - key.with(v as u64).exponential(rate);
        if s.total_cmp(&best.0).is_lt() {
            best = (s, v as u32);
        }
    }
    best.1
}

/// Monte-Carlo separation frequencies of the pair `(u, v)` at level `k` over
/// the given seeds: in the raw decomposition of that level, and in the
/// intersected hierarchy (separated at level `k` or any level above).
pub fn pair_crossing(
    metric: &MetricInstance,
    (u, v): (usize, usize),
    params: &Params,
    k: u32,
    c_mpx: f64,
    seeds: std::ops::Range<u64>,
) -> (f64, f64) {
    let draws = (seeds.end - seeds.start) as f64;
    let (mut raw, mut inter) = (0u64, 0u64);
    for seed in seeds {
        let split = |j: u32| {
            let t = params.threshold(j);
            center_of(metric, u, seed, j, t, c_mpx) != center_of(metric, v, seed, j, t, c_mpx)
        };
        let here = split(k);
        raw += u64::from(here);
        inter += u64::from(here || (k + 1..=params.top).any(split));
    }
    (raw as f64 / draws, inter as f64 / draws)
}

/// Number of clusters whose weighted diameter exceeds `t`.
pub fn diameter_violations(metric: &MetricInstance, p: &Partition, t: u64) -> usize {
    p.clusters()
        .iter()
        .filter(|c| c.iter().any(|&u| c.iter().any(|&v| metric.w(u as usize, v as usize) > t)))
        .count()
}

/// Top-down intersection: level `k` is the common refinement of
/// `decomps[k..]`.
pub fn intersect_to_hierarchy(decomps: &[Partition], alpha: u64) -> Result<HierarchyLevels, HierarchyError> {
    let top = decomps.last().ok_or(HierarchyError::Empty)?;
    if decomps.iter().any(|p| p.n() != top.n()) {
        return Err(HierarchyError::SizeMismatch);
    }
    let mut levels = vec![top.clone(); decomps.len()];
    for k in (0..decomps.len() - 1).rev() {
        levels[k] = decomps[k].common_refinement(&levels[k + 1]);
    }
    Ok(HierarchyLevels { alpha, levels })
}

/// Result of leader compression: the merged components and, per cluster
/// index, whether the component still has an eligible outgoing edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compressed {
    pub partition: Partition,
    pub incomplete: Vec<bool>,
}

/// Edges `u < v` with weight at most `t` inside one envelope set, skipping
/// pairs already inside one `base` cluster.
pub(crate) fn eligible_edges(metric: &MetricInstance, base: &Partition, envelope: &Partition, t: u64) -> Vec<(u32, u32)> {
    let n = metric.n();
    let mut out = Vec::new();
    for u in 0..n {
        let row = metric.row(u);
        for v in u + 1..n {
            if row[v] <= t && envelope.same(u, v) && !base.same(u, v) {
                out.push((u as u32, v as u32));
            }
        }
    }
    out
}

/// Replaces every label by the smallest vertex carrying it.
pub(crate) fn canonical_labels(cand: &[u32]) -> Vec<u32> {
    let mut min_of = vec![u32::MAX; cand.len()];
    for (v, &c) in cand.iter().enumerate() {
        let slot = &mut min_of[c as usize];
        *slot = (*slot).min(v as u32);
    }
    cand.iter().map(|&c| min_of[c as usize]).collect()
}

/// Coin of a component in a compression round.
pub fn compress_coin(seed: u64, level: u32, round: u64, comp: u32) -> bool {
    Key::new(seed, Stream::Compress).with(level as u64).with(round).with(comp as u64).coin()
}

/// `rounds` rounds of coin-flip merging along edges of weight at most `t`
/// inside envelope sets. A component with coin 0 joins the lowest-id
/// adjacent component with coin 1. Components are identified by their
/// smallest vertex.
pub fn leader_compress(
    metric: &MetricInstance,
    base: &Partition,
    envelope: &Partition,
    t: u64,
    rounds: u64,
    coin: impl Fn(u64, u32) -> bool,
) -> Result<Compressed, HierarchyError> {
    if base.n() != metric.n() || envelope.n() != metric.n() {
        return Err(HierarchyError::SizeMismatch);
    }
    if !base.refines(envelope) {
        return Err(HierarchyError::RefinementViolation);
    }
    let n = metric.n();
    let mut edges = eligible_edges(metric, base, envelope, t);
    let mut label = base.leader_labels();
    let mut target = vec![u32::MAX; n];
    for round in 0..rounds {
        edges.retain(|&(u, v)| label[u as usize] != label[v as usize]);
        if edges.is_empty() {
            break;
        }
        target.iter_mut().for_each(|x| *x = u32::MAX);
        for &(u, v) in &edges {
            let (a, b) = (label[u as usize], label[v as usize]);
            for (x, y) in [(a, b), (b, a)] {
                if !coin(round, x) && coin(round, y) {
                    target[x as usize] = target[x as usize].min(y);
                }
            }
        }
        let cand: Vec<u32> = label.iter().map(|&l| if target[l as usize] != u32::MAX { target[l as usize] } else { l }).collect();
        label = canonical_labels(&cand);
    }
    let mut open = vec![false; n];
    for &(u, v) in &edges {
        if label[u as usize] != label[v as usize] {
            open[label[u as usize] as usize] = true;
            open[label[v as usize] as usize] = true;
        }
    }
    let partition = Partition::from_dense_labels(&label);
    let incomplete = partition.leaders().iter().map(|&l| open[l as usize]).collect();
    Ok(Compressed { partition, incomplete })
}

/// Merges all incomplete components within each envelope set.
pub fn join_incomplete(c: &Compressed, envelope: &Partition) -> Partition {
    let keys: Vec<(bool, usize)> = (0..c.partition.n())
        .map(|v| {
            let k = c.partition.cluster_of(v);
            if c.incomplete[k] {
                (true, envelope.cluster_of(v))
            } else {
                (false, k)
            }
        })
        .collect();
    Partition::from_labels(&keys)
}

/// Connected components of the edges of weight at most `t` inside envelope
/// sets, grown from `base`.
pub fn exact_level_components(metric: &MetricInstance, base: &Partition, envelope: &Partition, t: u64) -> Partition {
    let mut d = base.to_dsu();
    for (u, v) in eligible_edges(metric, base, envelope, t) {
        d.union(u as usize, v as usize);
    }
    Partition::from_dsu(&mut d)
}

/// Knobs for building the hierarchies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConfig {
    pub seed: u64,
    pub c_mpx: f64,
    pub audit: bool,
}

/// Everything the tree-building loop and the checks need.
#[derive(Debug, Clone)]
pub struct Hierarchies {
    /// Raw decompositions, one per level.
    pub raw: Vec<Partition>,
    pub mpx: HierarchyLevels,
    pub compressed: HierarchyLevels,
    /// Incomplete-component flags after compression, per level.
    pub flags: Vec<Compressed>,
    /// Raw clusters over their diameter bound, per level; empty unless audited.
    pub diameter_violations: Vec<usize>,
}

/// The envelope of level `k` is level `k + 1` of the intersected hierarchy.
pub fn build_hierarchies(metric: &MetricInstance, params: &Params, cfg: &HierarchyConfig) -> Hierarchies {
    let n = metric.n();
    let levels = params.top + 1;
    let raw: Vec<Partition> = (0..levels)
        .map(|k| mpx_decompose(metric, &DelayDraw::keyed(cfg.seed, k, n, params.threshold(k), cfg.c_mpx)))
        .collect();
    let diameter_violations = if cfg.audit {
        raw.iter().enumerate().map(|(k, p)| diameter_violations(metric, p, params.threshold(k as u32))).collect()
    } else {
        Vec::new()
    };
    let mpx = intersect_to_hierarchy(&raw, params.alpha).expect("one decomposition per level");
    let mut flags = Vec::with_capacity(levels as usize);
    let mut compressed = Vec::with_capacity(levels as usize);
    for k in 0..levels {
        let t = params.threshold(k);
        let base = mpx.level(k);
        let envelope = mpx.level(k + 1);
        let c = leader_compress(metric, &base, &envelope, t, params.compress_rounds, |round, comp| {
            compress_coin(cfg.seed, k, round, comp)
        })
        .expect("intersected levels refine their envelopes");
        compressed.push(join_incomplete(&c, &envelope));
        flags.push(c);
    }
    Hierarchies {
        raw,
        mpx,
        compressed: HierarchyLevels { alpha: params.alpha, levels: compressed },
        flags,
        diameter_violations,
    }
}

/// The threshold components `C_{alpha^k}` of the whole metric.
pub fn exact_hierarchy(metric: &MetricInstance, params: &Params) -> HierarchyLevels {
    let n = metric.n();
    let mut levels = Vec::with_capacity(params.top as usize + 1);
    let mut prev = Partition::singletons(n);
    let trivial = Partition::trivial(n);
    for k in 0..=params.top {
        prev = exact_level_components(metric, &prev, &trivial, params.threshold(k));
        levels.push(prev.clone());
    }
    HierarchyLevels { alpha: params.alpha, levels }
}
