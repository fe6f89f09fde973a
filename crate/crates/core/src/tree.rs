//! Spanning trees tagged with the level that produced each edge.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dsu::DisjointSets;
use crate::metric::{EdgeRef, MetricInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("expected {expected} edges, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("edge ({0},{1}) closes a cycle")]
    Cycle(u32, u32),
    #[error("tree is disconnected")]
    Disconnected,
    #[error("recorded total weight {recorded} differs from edge sum {actual}")]
    TotalWeight { recorded: u64, actual: u64 },
    #[error("edge ({u},{v}) of weight {weight} at level {level} exceeds cap {cap}")]
    LevelCap { u: u32, v: u32, weight: u64, level: u32, cap: u64 },
    #[error("edge ({0},{1}) does not match the metric")]
    ForeignEdge(u32, u32),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct TreeEdge {
    pub edge: EdgeRef,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SpanningTree {
    n: usize,
    edges: Vec<TreeEdge>,
    total_weight: u64,
}

/// `alpha^exp`, saturating.
pub fn power(alpha: u64, exp: u32) -> u64 {
    alpha.checked_pow(exp).unwrap_or(u64::MAX)
}

impl SpanningTree {
    /// Edges are stored sorted by `(weight, id)`.
    pub fn new(n: usize, mut edges: Vec<TreeEdge>) -> Self {
        edges.sort_by_key(|e| (e.edge, e.level));
        let total_weight = edges.iter().map(|e| e.edge.weight).sum();
        SpanningTree { n, edges, total_weight }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn edge_refs(&self) -> Vec<EdgeRef> {
        self.edges.iter().map(|e| e.edge).collect()
    }

    /// Checks shape and, with `alpha`, that each level-`k` edge weighs at most `alpha^(k+1)`.
    pub fn validate(&self, alpha: Option<u64>) -> Result<(), TreeError> {
        let expected = self.n.saturating_sub(1);
        if self.edges.len() != expected {
            return Err(TreeError::EdgeCount { expected, found: self.edges.len() });
        }
        let actual: u64 = self.edges.iter().map(|e| e.edge.weight).sum();
        if actual != self.total_weight {
            return Err(TreeError::TotalWeight { recorded: self.total_weight, actual });
        }
        let mut d = DisjointSets::new(self.n);
        for e in &self.edges {
            let (u, v) = (e.edge.u, e.edge.v);
            if u >= v || v as usize >= self.n {
                return Err(TreeError::ForeignEdge(u, v));
            }
            if !d.union(u as usize, v as usize) {
                return Err(TreeError::Cycle(u, v));
            }
            if let Some(alpha) = alpha {
                let cap = power(alpha, e.level + 1);
                if e.edge.weight > cap {
                    return Err(TreeError::LevelCap { u, v, weight: e.edge.weight, level: e.level, cap });
                }
            }
        }
        if self.n > 0 && d.set_count() != 1 {
            return Err(TreeError::Disconnected);
        }
        Ok(())
    }

    /// Also checks every edge weight and id against the metric.
    pub fn validate_against(&self, metric: &MetricInstance, alpha: Option<u64>) -> Result<(), TreeError> {
        if self.n != metric.n() {
            return Err(TreeError::EdgeCount { expected: metric.n().saturating_sub(1), found: self.edges.len() });
        }
        for e in &self.edges {
            let (u, v) = (e.edge.u as usize, e.edge.v as usize);
            if u >= v || v >= self.n || metric.edge(u, v) != e.edge {
                return Err(TreeError::ForeignEdge(e.edge.u, e.edge.v));
            }
        }
        self.validate(alpha)
    }

    /// `n total_weight`, then `u v w level` per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.n, self.total_weight).unwrap();
        for e in &self.edges {
            writeln!(s, "{} {} {} {}", e.edge.u, e.edge.v, e.edge.weight, e.level).unwrap();
        }
        s
    }

    /// Parses the text form. The recorded total is kept so that
    /// [`SpanningTree::validate`] can detect tampering.
    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| TreeError::Parse { line: line + 1, msg: msg.into() };
        let (hl, head) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let nums: Result<Vec<u64>, _> = head.split_whitespace().map(str::parse).collect();
        let nums = nums.map_err(|_| err(hl, "bad header"))?;
        if nums.len() != 2 {
            return Err(err(hl, "expected `n total_weight`"));
        }
        let n = nums[0] as usize;
        let mut edges = Vec::new();
        for (ln, line) in lines {
            let f: Result<Vec<u64>, _> = line.split_whitespace().map(str::parse).collect();
            let f = f.map_err(|_| err(ln, "bad edge line"))?;
            if f.len() != 4 || f[0] >= f[1] || f[1] as usize >= n {
                return Err(err(ln, "expected `u v w level` with u < v < n"));
            }
            edges.push(TreeEdge {
                edge: EdgeRef::new(f[0] as usize, f[1] as usize, f[2], n),
                level: f[3] as u32,
            });
        }
        let mut t = SpanningTree::new(n, edges);
        t.total_weight = nums[1];
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn te(u: usize, v: usize, w: u64, level: u32) -> TreeEdge {
        TreeEdge { edge: EdgeRef::new(u, v, w, 4), level }
    }

    #[test]
    fn validates_shape() {
        let t = SpanningTree::new(4, vec![te(0, 1, 1, 0), te(1, 2, 3, 1), te(2, 3, 3, 0)]);
        assert_eq!(t.total_weight(), 7);
        assert_eq!(t.validate(None), Ok(()));
        assert!(matches!(t.validate(Some(2)), Err(TreeError::LevelCap { .. })));
        let cyc = SpanningTree::new(4, vec![te(0, 1, 1, 0), te(1, 2, 1, 0), te(0, 2, 1, 0)]);
        assert_eq!(cyc.validate(None), Err(TreeError::Cycle(1, 2)));
        let short = SpanningTree::new(4, vec![te(0, 1, 1, 0)]);
        assert!(matches!(short.validate(None), Err(TreeError::EdgeCount { .. })));
    }

    #[test]
    fn text_round_trip() {
        let t = SpanningTree::new(4, vec![te(0, 1, 1, 0), te(1, 2, 3, 1), te(2, 3, 2, 0)]);
        assert_eq!(SpanningTree::from_text(&t.to_text()).unwrap(), t);
        let tampered = t.to_text().replacen("4 6", "4 7", 1);
        assert!(matches!(
            SpanningTree::from_text(&tampered).unwrap().validate(None),
            Err(TreeError::TotalWeight { .. })
        ));
    }
}
