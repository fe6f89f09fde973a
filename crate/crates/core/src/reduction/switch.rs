use serde::Serialize;

use super::ReductionError;
use crate::cycle_graph::{ComponentKind, CycleGraph, CycleGraphError};

/// How a two-switch changes the component holding the switched edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchCase {
    /// Edges on different cycles; the cycles merge.
    Joined,
    /// Same cycle, `v1` and `v2` on different `u1`-`u2` paths; still one cycle.
    Relinked,
    /// Same cycle, same path; the cycle splits in two.
    Split,
}

fn norm(e: (u32, u32)) -> (u32, u32) {
    (e.0.min(e.1), e.0.max(e.1))
}

/// Replaces `(u1,v1)` and `(u2,v2)` by `(u1,u2)` and `(v1,v2)`.
///
/// Rejects edges that share an endpoint, and switches whose new edges already
/// exist (the result would need a double edge).
pub fn two_switch(graph: &CycleGraph, e1: (u32, u32), e2: (u32, u32)) -> Result<CycleGraph, ReductionError> {
    let (u1, v1) = e1;
    let (u2, v2) = e2;
    if norm(e1) == norm(e2) {
        return Err(ReductionError::SameEdge);
    }
    for x in [u1, v1] {
        if x == u2 || x == v2 {
            return Err(ReductionError::SharedVertex(x));
        }
    }
    for (a, b) in [e1, e2] {
        if !graph.has_edge(a, b) {
            return Err(CycleGraphError::MissingEdge(a, b).into());
        }
    }
    let mut g = graph.clone();
    g.remove_edge(u1, v1)?;
    g.remove_edge(u2, v2)?;
    g.add_edge(u1, u2)?;
    g.add_edge(v1, v2)?;
    Ok(g)
}

/// The outcome a two-switch must have, read off the graph before switching.
/// `None` when either edge lies on a path.
pub fn predict_switch(graph: &CycleGraph, e1: (u32, u32), e2: (u32, u32)) -> Option<SwitchCase> {
    let comps = graph.components();
    let comp = graph.component_of();
    let (u1, v1) = e1;
    let (u2, v2) = e2;
    let c1 = comp[u1 as usize];
    let c2 = comp[u2 as usize];
    if comps[c1].kind != ComponentKind::Cycle || comps[c2].kind != ComponentKind::Cycle {
        return None;
    }
    if c1 != c2 {
        return Some(SwitchCase::Joined);
    }
    // walk from u1 through v1 until u2; the vertex before u2 decides
    let (mut prev, mut cur) = (u1, v1);
    while cur != u2 {
        let next = graph.neighbors(cur).find(|&x| x != prev)?;
        prev = cur;
        cur = next;
    }
    Some(if prev == v2 { SwitchCase::Split } else { SwitchCase::Relinked })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lengths(g: &CycleGraph) -> Vec<usize> {
        let mut l: Vec<usize> = g.cycles().iter().map(|c| c.vertices.len()).collect();
        l.sort_unstable();
        l
    }

    #[test]
    fn joins_two_cycles() {
        let g = CycleGraph::from_lengths(&[5, 5], &[]).unwrap();
        let h = two_switch(&g, (0, 1), (7, 8)).unwrap();
        assert_eq!(lengths(&h), vec![10]);
        assert_eq!(predict_switch(&g, (0, 1), (7, 8)), Some(SwitchCase::Joined));
    }

    #[test]
    fn ten_cycle_relink_and_split() {
        // v1..v10 are 0..9
        let g = CycleGraph::from_lengths(&[10], &[]).unwrap();
        let relinked = two_switch(&g, (0, 1), (4, 5)).unwrap();
        assert_eq!(lengths(&relinked), vec![10]);
        assert_eq!(predict_switch(&g, (0, 1), (4, 5)), Some(SwitchCase::Relinked));
        let split = two_switch(&g, (0, 1), (5, 4)).unwrap();
        assert_eq!(lengths(&split), vec![4, 6]);
        assert_eq!(predict_switch(&g, (0, 1), (5, 4)), Some(SwitchCase::Split));
        let comp = split.component_of();
        assert_eq!(comp[0], comp[5]);
        assert_eq!(comp[1], comp[4]);
        assert_eq!(split.cycles().iter().find(|c| c.vertices.contains(&0)).unwrap().vertices.len(), 6);
    }

    #[test]
    fn rejects_bad_pairs() {
        let g = CycleGraph::from_lengths(&[6], &[]).unwrap();
        assert_eq!(two_switch(&g, (0, 1), (1, 2)), Err(ReductionError::SharedVertex(1)));
        assert_eq!(two_switch(&g, (0, 1), (1, 0)), Err(ReductionError::SameEdge));
        assert!(matches!(two_switch(&g, (0, 2), (3, 4)), Err(ReductionError::Graph(_))));
        // (1,2) is already an edge
        assert!(two_switch(&g, (1, 0), (2, 3)).is_err());
    }
}
