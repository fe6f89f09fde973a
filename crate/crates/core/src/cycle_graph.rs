//! Graphs of maximum degree two: disjoint cycles and paths.

use std::fmt::Write as _;

use thiserror::Error;

use crate::metric::MetricInstance;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycleGraphError {
    #[error("cycle of length {0} is shorter than 3")]
    CycleTooShort(usize),
    #[error("path length must be at least 1")]
    PathTooShort,
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex {0} would exceed degree 2")]
    DegreeExceeded(u32),
    #[error("self loop at {0}")]
    SelfLoop(u32),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(u32, u32),
    #[error("vertex {0} out of range")]
    OutOfRange(u32),
    #[error("edge ({0},{1}) not present")]
    MissingEdge(u32, u32),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Cycle,
    Path,
}

/// A component listed in traversal order. A path starts at an endpoint;
/// a cycle starts at its smallest vertex and continues towards the smaller
/// of its two neighbors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Component {
    pub kind: ComponentKind,
    pub vertices: Vec<u32>,
}

impl Component {
    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        match self.kind {
            ComponentKind::Cycle => self.vertices.len(),
            ComponentKind::Path => self.vertices.len() - 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CycleGraph {
    adj: Vec<[u32; 2]>,
}

impl PartialEq for CycleGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n() && self.edges() == other.edges()
    }
}

impl Eq for CycleGraph {}

impl CycleGraph {
    pub fn empty(n: usize) -> Self {
        CycleGraph { adj: vec![[NONE; 2]; n] }
    }

    /// Disjoint cycles then paths, numbered consecutively. A path of length
    /// `k` has `k` edges and `k + 1` vertices.
    pub fn from_lengths(cycles: &[usize], paths: &[usize]) -> Result<Self, CycleGraphError> {
        if let Some(&c) = cycles.iter().find(|&&c| c < 3) {
            return Err(CycleGraphError::CycleTooShort(c));
        }
        if paths.iter().any(|&p| p < 1) {
            return Err(CycleGraphError::PathTooShort);
        }
        let n: usize = cycles.iter().sum::<usize>() + paths.iter().map(|p| p + 1).sum::<usize>();
        if n == 0 {
            return Err(CycleGraphError::Empty);
        }
        let mut g = CycleGraph::empty(n);
        let mut base = 0u32;
        for &c in cycles {
            let c = c as u32;
            for i in 0..c {
                g.add_edge(base + i, base + (i + 1) % c)?;
            }
            base += c;
        }
        for &p in paths {
            let p = p as u32;
            for i in 0..p {
                g.add_edge(base + i, base + i + 1)?;
            }
            base += p + 1;
        }
        Ok(g)
    }

    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self, CycleGraphError> {
        if n == 0 {
            return Err(CycleGraphError::Empty);
        }
        let mut g = CycleGraph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Vertices `order[i]` and `order[i+1]` joined cyclically.
    pub fn cycle_from_order(order: &[u32]) -> Result<Self, CycleGraphError> {
        let k = order.len();
        if k < 3 {
            return Err(CycleGraphError::CycleTooShort(k));
        }
        let n = order.iter().copied().max().unwrap() as usize + 1;
        let mut g = CycleGraph::empty(n);
        for i in 0..k {
            g.add_edge(order[i], order[(i + 1) % k])?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.adj[v as usize].iter().copied().filter(|&x| x != NONE)
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).count()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        (u as usize) < self.n() && self.adj[u as usize].contains(&v) && u != NONE && v != NONE
    }

    pub fn add_edge(&mut self, u: u32, v: u32) -> Result<(), CycleGraphError> {
        let n = self.n() as u32;
        for x in [u, v] {
            if x >= n {
                return Err(CycleGraphError::OutOfRange(x));
            }
        }
        if u == v {
            return Err(CycleGraphError::SelfLoop(u));
        }
        if self.has_edge(u, v) {
            return Err(CycleGraphError::DuplicateEdge(u.min(v), u.max(v)));
        }
        for x in [u, v] {
            if self.degree(x) == 2 {
                return Err(CycleGraphError::DegreeExceeded(x));
            }
        }
        self.attach(u, v);
        self.attach(v, u);
        Ok(())
    }

    fn attach(&mut self, u: u32, v: u32) {
        let slot = self.adj[u as usize].iter().position(|&x| x == NONE).unwrap();
        self.adj[u as usize][slot] = v;
    }

    pub fn remove_edge(&mut self, u: u32, v: u32) -> Result<(), CycleGraphError> {
        if !self.has_edge(u, v) {
            return Err(CycleGraphError::MissingEdge(u, v));
        }
        for (a, b) in [(u, v), (v, u)] {
            let s = &mut self.adj[a as usize];
            let i = s.iter().position(|&x| x == b).unwrap();
            s[i] = NONE;
        }
        Ok(())
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.n() as u32 {
            for v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.iter().filter(|&&x| x != NONE).count()).sum::<usize>() / 2
    }

    /// Components sorted by smallest vertex.
    pub fn components(&self) -> Vec<Component> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n as u32 {
            if seen[s as usize] {
                continue;
            }
            // find an endpoint if this is a path
            let mut start = s;
            let mut prev = NONE;
            let mut is_cycle = false;
            loop {
                let next = self.neighbors(start).find(|&x| x != prev);
                if self.degree(start) < 2 {
                    break;
                }
                match next {
                    Some(x) if x == s => {
                        is_cycle = true;
                        break;
                    }
                    Some(x) => {
                        prev = start;
                        start = x;
                    }
                    None => break,
                }
            }
            let vertices = if is_cycle {
                let first = self.neighbors(s).min().unwrap();
                self.walk(s, first)
            } else {
                match self.neighbors(start).next() {
                    Some(x) => self.walk(start, x),
                    None => vec![start],
                }
            };
            let min = *vertices.iter().min().unwrap();
            let vertices = if !is_cycle && vertices.len() > 1 && vertices.last() == Some(&min) {
                vertices.into_iter().rev().collect()
            } else {
                vertices
            };
            for &v in &vertices {
                seen[v as usize] = true;
            }
            let kind = if is_cycle { ComponentKind::Cycle } else { ComponentKind::Path };
            out.push(Component { kind, vertices });
        }
        out.sort_by_key(|c| *c.vertices.iter().min().unwrap());
        out
    }

    fn walk(&self, start: u32, first: u32) -> Vec<u32> {
        let mut out = vec![start];
        let (mut prev, mut cur) = (start, first);
        while cur != start {
            out.push(cur);
            match self.neighbors(cur).find(|&x| x != prev) {
                Some(x) => {
                    prev = cur;
                    cur = x;
                }
                None => break,
            }
        }
        out
    }

    pub fn cycles(&self) -> Vec<Component> {
        self.components().into_iter().filter(|c| c.kind == ComponentKind::Cycle).collect()
    }

    /// Component index of every vertex, matching [`CycleGraph::components`].
    pub fn component_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (i, c) in self.components().iter().enumerate() {
            for &v in &c.vertices {
                out[v as usize] = i;
            }
        }
        out
    }

    /// Weight 1 on edges of the graph, 2 elsewhere.
    pub fn to_metric(&self) -> MetricInstance {
        let n = self.n();
        let mut w = vec![2u64; n * n];
        for u in 0..n {
            w[u * n + u] = 0;
            for v in self.neighbors(u as u32) {
                w[u * n + v as usize] = 1;
            }
        }
        MetricInstance::from_parts_unchecked(n, w)
    }

    /// Same graph with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[u32]) -> CycleGraph {
        let mut g = CycleGraph::empty(self.n());
        for (v, slots) in self.adj.iter().enumerate() {
            let p = perm[v] as usize;
            for (i, &x) in slots.iter().enumerate() {
                g.adj[p][i] = if x == NONE { NONE } else { perm[x as usize] };
            }
        }
        g
    }

    /// One line per component: `cycle k ids...` or `path k ids...`.
    pub fn to_sidecar(&self) -> String {
        let mut s = String::new();
        for c in self.components() {
            let tag = match c.kind {
                ComponentKind::Cycle => "cycle",
                ComponentKind::Path => "path",
            };
            let ids: Vec<String> = c.vertices.iter().map(u32::to_string).collect();
            writeln!(s, "{} {} {}", tag, c.vertices.len(), ids.join(" ")).unwrap();
        }
        s
    }

    pub fn from_sidecar(text: &str) -> Result<Self, CycleGraphError> {
        let mut comps: Vec<(ComponentKind, Vec<u32>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| CycleGraphError::Parse { line: i + 1, msg: msg.into() };
            let mut toks = line.split_whitespace();
            let Some(tag) = toks.next() else { continue };
            let kind = match tag {
                "cycle" => ComponentKind::Cycle,
                "path" => ComponentKind::Path,
                _ => return Err(err("expected `cycle` or `path`")),
            };
            let k: usize = toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad count"))?;
            let ids: Result<Vec<u32>, _> = toks.map(str::parse).collect();
            let ids = ids.map_err(|_| err("bad vertex id"))?;
            if ids.len() != k {
                return Err(err("count does not match the number of ids"));
            }
            if kind == ComponentKind::Cycle && k < 3 {
                return Err(CycleGraphError::CycleTooShort(k));
            }
            if k == 0 {
                return Err(err("empty component"));
            }
            comps.push((kind, ids));
        }
        let n = comps.iter().flat_map(|(_, ids)| ids.iter()).max().map(|&m| m as usize + 1).ok_or(CycleGraphError::Empty)?;
        let mut present = vec![false; n];
        let mut g = CycleGraph::empty(n);
        for (kind, ids) in &comps {
            for &v in ids {
                if std::mem::replace(&mut present[v as usize], true) {
                    return Err(CycleGraphError::DegreeExceeded(v));
                }
            }
            for w in ids.windows(2) {
                g.add_edge(w[0], w[1])?;
            }
            if *kind == ComponentKind::Cycle {
                g.add_edge(ids[ids.len() - 1], ids[0])?;
            }
        }
        if let Some(v) = present.iter().position(|p| !p) {
            return Err(CycleGraphError::Parse { line: 0, msg: format!("vertex {v} missing") });
        }
        Ok(g)
    }
}
