//! Exact references: Kruskal MST, the minimum tree respecting a hierarchy,
//! approximation ratios, and the almost-spanning-forest checker.

use thiserror::Error;

use crate::cycle_graph::{ComponentKind, CycleGraph};
use crate::dsu::DisjointSets;
use crate::metric::MetricInstance;
use crate::partition::Partition;
use crate::tree::{SpanningTree, TreeEdge};

/// The unique MST under `(weight, id)` order.
pub fn exact_mst(metric: &MetricInstance) -> SpanningTree {
    let n = metric.n();
    let mut d = DisjointSets::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for e in metric.sorted_edges() {
        if d.union(e.u as usize, e.v as usize) {
            out.push(TreeEdge { edge: e, level: 0 });
            if out.len() + 1 == n {
                break;
            }
        }
    }
    SpanningTree::new(n, out)
}

/// Minimum spanning forest of the edges with weight at most `threshold`
/// that stay inside one set of `constraint`, grown from `initial`.
/// Returned edges are in Kruskal order.
pub fn constrained_forest(
    metric: &MetricInstance,
    initial: &Partition,
    constraint: &Partition,
    threshold: u64,
) -> Vec<crate::metric::EdgeRef> {
    let mut d = initial.to_dsu();
    let mut out = Vec::new();
    for e in metric.sorted_edges() {
        if e.weight > threshold {
            break;
        }
        let (u, v) = (e.u as usize, e.v as usize);
        if constraint.same(u, v) && d.union(u, v) {
            out.push(e);
        }
    }
    out
}

/// One level of a respect specification: the partition to realize and the
/// eligible edges, given as a weight threshold inside that partition's sets.
#[derive(Debug, Clone)]
pub struct RespectLevel {
    pub partition: Partition,
    pub threshold: u64,
}

#[derive(Debug, Clone)]
pub struct RespectSpec {
    pub levels: Vec<RespectLevel>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RespectError {
    #[error("level {level}: set {set} cannot be connected by eligible edges")]
    Unsatisfiable { level: usize, set: usize },
    #[error("level {0} does not refine the next level")]
    NotAHierarchy(usize),
    #[error("the last level is not a single cluster")]
    NotSpanning,
}

/// Minimum spanning tree that realizes every level of `spec` in turn.
pub fn mst_respecting(metric: &MetricInstance, spec: &RespectSpec) -> Result<SpanningTree, RespectError> {
    let n = metric.n();
    let sorted = metric.sorted_edges();
    let mut d = DisjointSets::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (k, level) in spec.levels.iter().enumerate() {
        if k + 1 < spec.levels.len() && !level.partition.refines(&spec.levels[k + 1].partition) {
            return Err(RespectError::NotAHierarchy(k));
        }
        for e in &sorted {
            if e.weight > level.threshold {
                break;
            }
            let (u, v) = (e.u as usize, e.v as usize);
            if level.partition.same(u, v) && d.union(u, v) {
                out.push(TreeEdge { edge: *e, level: k as u32 });
            }
        }
        let reached = Partition::from_dsu(&mut d);
        if reached != level.partition {
            let set = (0..n)
                .find(|&v| {
                    let c = level.partition.cluster_of(v);
                    (0..n).any(|x| level.partition.cluster_of(x) == c && !reached.same(v, x))
                })
                .map(|v| level.partition.cluster_of(v))
                .unwrap_or(0);
            return Err(RespectError::Unsatisfiable { level: k, set });
        }
    }
    if n > 0 && d.set_count() != 1 {
        return Err(RespectError::NotSpanning);
    }
    Ok(SpanningTree::new(n, out))
}

pub fn approximation_ratio(tree: &SpanningTree, metric: &MetricInstance) -> f64 {
    let exact = exact_mst(metric).total_weight();
    if exact == 0 {
        return 1.0;
    }
    tree.total_weight() as f64 / exact as f64
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum ForestVerdict {
    Valid,
    /// Index into the graph's cycle list.
    CycleUncut(usize),
    TooManyRemoved(usize),
}

/// Does removing `removed` cut every cycle while deleting at most `c + eps*n` edges?
pub fn check_almost_spanning_forest(graph: &CycleGraph, removed: &[(u32, u32)], eps: f64) -> ForestVerdict {
    let mut cut = std::collections::HashSet::with_capacity(removed.len());
    for &(u, v) in removed {
        cut.insert((u.min(v), u.max(v)));
    }
    let cycles: Vec<_> = graph.components().into_iter().filter(|c| c.kind == ComponentKind::Cycle).collect();
    for (i, c) in cycles.iter().enumerate() {
        let k = c.vertices.len();
        let hit = (0..k).any(|j| {
            let (a, b) = (c.vertices[j], c.vertices[(j + 1) % k]);
            cut.contains(&(a.min(b), a.max(b)))
        });
        if !hit {
            return ForestVerdict::CycleUncut(i);
        }
    }
    let bound = cycles.len() as f64 + eps * graph.n() as f64;
    if cut.len() as f64 > bound + 1e-9 {
        return ForestVerdict::TooManyRemoved(cut.len());
    }
    ForestVerdict::Valid
}

/// Edges of `graph` that `tree` does not use.
pub fn removed_edges(graph: &CycleGraph, tree: &SpanningTree) -> Vec<(u32, u32)> {
    let used: std::collections::HashSet<(u32, u32)> = tree.edges().iter().map(|e| (e.edge.u, e.edge.v)).collect();
    graph.edges().into_iter().filter(|e| !used.contains(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{metric_from_cycles, random_band_metric, EdgeRef};

    #[test]
    fn cycle_metrics_have_known_weight() {
        let (m, _) = metric_from_cycles(&[5], &[]).unwrap();
        assert_eq!(exact_mst(&m).total_weight(), 4);
        let (m, _) = metric_from_cycles(&[4, 6], &[]).unwrap();
        assert_eq!(exact_mst(&m).total_weight(), 10);
        let (m, _) = metric_from_cycles(&[], &[1]).unwrap();
        assert_eq!(exact_mst(&m).total_weight(), 1);
    }

    #[test]
    fn trivial_spec_gives_exact_mst() {
        let m = random_band_metric(12, 50, 4);
        let spec = RespectSpec { levels: vec![RespectLevel { partition: Partition::trivial(12), threshold: u64::MAX }] };
        assert_eq!(mst_respecting(&m, &spec).unwrap().edge_refs(), exact_mst(&m).edge_refs());
    }

    #[test]
    fn unsatisfiable_level_is_reported() {
        let m = random_band_metric(6, 50, 1);
        let spec = RespectSpec {
            levels: vec![
                RespectLevel { partition: Partition::from_labels(&[0, 0, 0, 1, 1, 1]), threshold: 1 },
                RespectLevel { partition: Partition::trivial(6), threshold: u64::MAX },
            ],
        };
        assert!(matches!(mst_respecting(&m, &spec), Err(RespectError::Unsatisfiable { level: 0, .. })));
    }

    #[test]
    fn ratio_of_a_hand_built_tree() {
        let (m, g) = metric_from_cycles(&[5], &[]).unwrap();
        // path 0-1-2-3 plus a weight-2 edge to 4 instead of 3-4
        let t = SpanningTree::new(
            5,
            vec![(0, 1), (1, 2), (2, 3), (1, 4)]
                .into_iter()
                .map(|(u, v)| TreeEdge { edge: m.edge(u, v), level: 0 })
                .collect(),
        );
        assert_eq!(t.total_weight(), 5);
        assert_eq!(approximation_ratio(&t, &m), 5.0 / 4.0);
        assert_eq!(removed_edges(&g, &t), vec![(0, 4), (3, 4)]);
        assert_eq!(approximation_ratio(&exact_mst(&m), &m), 1.0);
    }

    #[test]
    fn checker_verdicts() {
        let g = CycleGraph::from_lengths(&[50, 50], &[]).unwrap();
        assert_eq!(check_almost_spanning_forest(&g, &[(0, 1), (50, 51)], 0.0), ForestVerdict::Valid);
        assert_eq!(check_almost_spanning_forest(&g, &[], 0.5), ForestVerdict::CycleUncut(0));
        let eight: Vec<(u32, u32)> = (0..4).map(|i| (i, i + 1)).chain((50..54).map(|i| (i, i + 1))).collect();
        assert_eq!(check_almost_spanning_forest(&g, &eight, 0.05), ForestVerdict::TooManyRemoved(8));
    }

    #[test]
    fn constrained_forest_respects_constraint() {
        let m = random_band_metric(8, 10, 2);
        let c = Partition::from_labels(&[0, 0, 0, 0, 1, 1, 1, 1]);
        let f = constrained_forest(&m, &Partition::singletons(8), &c, u64::MAX);
        assert_eq!(f.len(), 6);
        assert!(f.iter().all(|e: &EdgeRef| c.same(e.u as usize, e.v as usize)));
    }
}
