//! Complete metric instances with integer weights.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::cycle_graph::{CycleGraph, CycleGraphError};
use crate::rng::{Key, Stream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("weight table is not square (row {row} has {len} entries, expected {n})")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("empty weight table")]
    Empty,
    #[error("nonzero diagonal at vertex {0}")]
    NonzeroDiagonal(usize),
    #[error("weight between {0} and {1} is zero")]
    ZeroOffDiagonal(usize, usize),
    #[error("asymmetric weights between {0} and {1}")]
    AsymmetricWeights(usize, usize),
    #[error("triangle inequality violated: w({u},{v}) > w({u},{x}) + w({x},{v})")]
    TriangleViolation { u: usize, x: usize, v: usize },
    #[error("maximum weight {w} exceeds n^{exponent}")]
    WeightBound { w: u64, exponent: u32 },
    #[error("duplicate points {0} and {1}")]
    DuplicatePoints(usize, usize),
    #[error("scale too small: points {0} and {1} would get weight 0")]
    ScaleTooSmall(usize, usize),
    #[error("points have inconsistent dimensions")]
    Dimension,
    #[error(transparent)]
    Cycles(#[from] CycleGraphError),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An edge of the complete graph, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct EdgeRef {
    pub u: u32,
    pub v: u32,
    pub weight: u64,
    pub id: u64,
}

impl EdgeRef {
    pub fn new(u: usize, v: usize, weight: u64, n: usize) -> Self {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        EdgeRef { u: u as u32, v: v as u32, weight, id: (u * n + v) as u64 }
    }

    pub fn key(&self) -> (u64, u64) {
        (self.weight, self.id)
    }
}

impl Ord for EdgeRef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for EdgeRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Knobs for [`validate_metric_with`].
#[derive(Debug, Clone, Copy)]
pub struct Validation {
    /// `None` checks triangles only up to 512 vertices.
    pub triangle: Option<bool>,
    /// Maximum weight must not exceed `n^weight_exponent`; `None` disables the check.
    pub weight_exponent: Option<u32>,
}

impl Default for Validation {
    fn default() -> Self {
        Validation { triangle: None, weight_exponent: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricInstance {
    n: usize,
    weights: Vec<u64>,
    max_weight: u64,
}

impl MetricInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The largest pairwise weight, `W`. At least 1.
    pub fn max_weight(&self) -> u64 {
        self.max_weight
    }

    #[inline]
    pub fn w(&self, u: usize, v: usize) -> u64 {
        self.weights[u * self.n + v]
    }

    pub fn edge(&self, u: usize, v: usize) -> EdgeRef {
        EdgeRef::new(u, v, self.w(u, v), self.n)
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.weights[u * self.n..(u + 1) * self.n]
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        let n = self.n;
        (0..n).flat_map(move |u| (u + 1..n).map(move |v| self.edge(u, v)))
    }

    /// All edges in `(weight, id)` order.
    pub fn sorted_edges(&self) -> Vec<EdgeRef> {
        let mut e: Vec<EdgeRef> = self.edges().collect();
        e.sort_unstable();
        e
    }

    pub fn to_table(&self) -> Vec<Vec<u64>> {
        (0..self.n).map(|u| self.row(u).to_vec()).collect()
    }

    /// Text form: `n W`, then the full matrix row by row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.n, self.max_weight).unwrap();
        for u in 0..self.n {
            let row: Vec<String> = self.row(u).iter().map(u64::to_string).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MetricError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, msg: &str| MetricError::Parse { line: line + 1, msg: msg.into() };
        let (hl, header) = lines.next().ok_or(MetricError::Empty)?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(parse_err(hl, "expected `n W`"));
        }
        let n: usize = head[0].parse().map_err(|_| parse_err(hl, "bad n"))?;
        let w: u64 = head[1].parse().map_err(|_| parse_err(hl, "bad W"))?;
        let mut table = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(hl, "too few rows"))?;
            let row: Result<Vec<u64>, _> = line.split_whitespace().map(str::parse).collect();
            table.push(row.map_err(|_| parse_err(ln, "bad weight"))?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing data"));
        }
        let m = validate_metric(&table)?;
        if m.max_weight != w && n > 1 {
            return Err(parse_err(hl, "declared W does not match the table"));
        }
        Ok(m)
    }

    /// Builds an instance without any checks. Callers guarantee validity.
    pub(crate) fn from_parts_unchecked(n: usize, weights: Vec<u64>) -> Self {
        let max_weight = weights.iter().copied().max().unwrap_or(0).max(1);
        MetricInstance { n, weights, max_weight }
    }
}

pub fn validate_metric(table: &[Vec<u64>]) -> Result<MetricInstance, MetricError> {
    validate_metric_with(table, Validation::default())
}

pub fn validate_metric_with(table: &[Vec<u64>], opts: Validation) -> Result<MetricInstance, MetricError> {
    let n = table.len();
    if n == 0 {
        return Err(MetricError::Empty);
    }
    for (row, r) in table.iter().enumerate() {
        if r.len() != n {
            return Err(MetricError::NotSquare { row, len: r.len(), n });
        }
    }
    for u in 0..n {
        if table[u][u] != 0 {
            return Err(MetricError::NonzeroDiagonal(u));
        }
        for v in u + 1..n {
            if table[u][v] != table[v][u] {
                return Err(MetricError::AsymmetricWeights(u, v));
            }
            if table[u][v] == 0 {
                return Err(MetricError::ZeroOffDiagonal(u, v));
            }
        }
    }
    let weights: Vec<u64> = table.iter().flatten().copied().collect();
    let m = MetricInstance::from_parts_unchecked(n, weights);
    if let Some(c) = opts.weight_exponent {
        let bound = (n as f64).powi(c as i32);
        if m.max_weight as f64 > bound {
            return Err(MetricError::WeightBound { w: m.max_weight, exponent: c });
        }
    }
    if opts.triangle.unwrap_or(n <= 512) {
        check_triangles(&m)?;
    }
    Ok(m)
}

fn check_triangles(m: &MetricInstance) -> Result<(), MetricError> {
    let n = m.n;
    for u in 0..n {
        let ru = m.row(u);
        for x in 0..n {
            let wux = ru[x];
            let rx = m.row(x);
            for v in 0..n {
                if ru[v] > wux + rx[v] {
                    return Err(MetricError::TriangleViolation { u, x, v });
                }
            }
        }
    }
    Ok(())
}

/// The (1,2)-metric of disjoint cycles and paths: weight 1 along the
/// components, 2 elsewhere. Vertices are numbered consecutively per
/// component in traversal order.
pub fn metric_from_cycles(
    cycle_lengths: &[usize],
    path_lengths: &[usize],
) -> Result<(MetricInstance, CycleGraph), MetricError> {
    let g = CycleGraph::from_lengths(cycle_lengths, path_lengths)?;
    Ok((g.to_metric(), g))
}

/// Quantized Euclidean metric, `w = ceil(scale * |p - q|)`.
pub fn metric_from_points(points: &[Vec<f64>], scale: f64) -> Result<MetricInstance, MetricError> {
    let n = points.len();
    if n == 0 {
        return Err(MetricError::Empty);
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(MetricError::Dimension);
    }
    let mut weights = vec![0u64; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let dist = points[u]
                .iter()
                .zip(&points[v])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                return Err(MetricError::DuplicatePoints(u, v));
            }
            let w = (scale * dist).ceil();
            if w < 1.0 {
                return Err(MetricError::ScaleTooSmall(u, v));
            }
            weights[u * n + v] = w as u64;
            weights[v * n + u] = w as u64;
        }
    }
    Ok(MetricInstance::from_parts_unchecked(n, weights))
}

/// Uniform points in the unit square, quantized at `scale`.
///
/// Coincident or too-close points are redrawn, so the result always validates.
pub fn uniform_plane_metric(n: usize, scale: f64, seed: u64) -> MetricInstance {
    let mut rng = Key::new(seed, Stream::Machine).with(0x706c_616e).rng();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = vec![rng.gen::<f64>(), rng.gen::<f64>()];
        let far = pts.iter().all(|q| {
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            d2 * scale * scale > 1e-12
        });
        if far {
            pts.push(p);
        }
    }
    metric_from_points(&pts, scale).expect("separated points")
}

/// Random metric with weights drawn from `[lo, 2*lo]`; any such table
/// satisfies the triangle inequality.
pub fn random_band_metric(n: usize, lo: u64, seed: u64) -> MetricInstance {
    let lo = lo.max(1);
    let mut rng = Key::new(seed, Stream::Machine).with(0x6261_6e64).rng();
    let mut weights = vec![0u64; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let w = rng.gen_range(lo..=2 * lo);
            weights[u * n + v] = w;
            weights[v * n + u] = w;
        }
    }
    MetricInstance::from_parts_unchecked(n, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_triangle_is_valid() {
        let m = validate_metric(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap();
        assert_eq!(m.max_weight(), 1);
    }

    #[test]
    fn detects_triangle_violation() {
        let t = vec![vec![0, 1, 3], vec![1, 0, 1], vec![3, 1, 0]];
        assert!(matches!(validate_metric(&t), Err(MetricError::TriangleViolation { .. })));
    }

    #[test]
    fn detects_malformed_tables() {
        assert_eq!(validate_metric(&[vec![0, 1], vec![2, 0]]), Err(MetricError::AsymmetricWeights(0, 1)));
        assert_eq!(validate_metric(&[vec![0, 0], vec![0, 0]]), Err(MetricError::ZeroOffDiagonal(0, 1)));
        assert_eq!(validate_metric(&[vec![1, 1], vec![1, 0]]), Err(MetricError::NonzeroDiagonal(0)));
        assert!(matches!(validate_metric(&[vec![0, 1], vec![1]]), Err(MetricError::NotSquare { .. })));
    }

    #[test]
    fn weight_bound_is_optional() {
        let t = vec![vec![0, 100], vec![100, 0]];
        assert!(validate_metric(&t).is_ok());
        let opts = Validation { weight_exponent: Some(4), ..Default::default() };
        assert!(matches!(validate_metric_with(&t, opts), Err(MetricError::WeightBound { .. })));
    }

    #[test]
    fn collinear_points() {
        let m = metric_from_points(&[vec![0.0], vec![1.0], vec![2.0]], 1.0).unwrap();
        assert_eq!((m.w(0, 1), m.w(1, 2), m.w(0, 2)), (1, 1, 2));
        assert!(matches!(metric_from_points(&[vec![0.0], vec![0.0]], 1.0), Err(MetricError::DuplicatePoints(0, 1))));
        assert!(matches!(metric_from_points(&[vec![0.0], vec![0.5]], 1e-9), Ok(_)));
    }

    #[test]
    fn generated_plane_metrics_validate() {
        for seed in 0..3 {
            let m = uniform_plane_metric(64, 1e4, seed);
            validate_metric(&m.to_table()).unwrap();
        }
    }

    #[test]
    fn text_round_trip() {
        let m = random_band_metric(7, 10, 3);
        let back = MetricInstance::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(MetricInstance::from_text("2 1\n0 1\n").is_err());
    }

    #[test]
    fn edge_ids_and_order() {
        let e = EdgeRef::new(3, 1, 5, 10);
        assert_eq!((e.u, e.v, e.id), (1, 3, 13));
        assert!(EdgeRef::new(0, 1, 2, 10) > EdgeRef::new(4, 5, 1, 10));
        assert!(EdgeRef::new(0, 2, 1, 10) > EdgeRef::new(0, 1, 1, 10));
    }
}
