use serde::Serialize;

use super::{
    group_and_classify, screened_profile, two_switch, CaseLabel, Flag, MstOracle, ReductionConfig, ReductionError,
    SwitchContext,
};
use crate::cycle_graph::CycleGraph;
use crate::rng::Key;

/// The ordered `k`-neighborhood of a vertex: `plus` walks away from it
/// through its smaller neighbor, `minus` through the other. On cycles of at
/// most `2k` vertices each side walks the whole cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neighborhood {
    pub center: u32,
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl Neighborhood {
    /// The side whose first vertex is `first`.
    pub fn toward(&self, first: u32) -> Option<&[u32]> {
        if self.plus.first() == Some(&first) {
            Some(&self.plus)
        } else if self.minus.first() == Some(&first) {
            Some(&self.minus)
        } else {
            None
        }
    }
}

/// One tested switch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDiagnostic {
    pub cycle_len: usize,
    pub u1: u32,
    pub u2: u32,
    pub v1: u32,
    pub v2: u32,
    /// `None` when the profile was screened out early or stayed ambiguous.
    pub label: Option<CaseLabel>,
    pub samples: u32,
    /// `(size, lo, hi)` per group.
    pub groups: Vec<(usize, f64, f64)>,
    pub attempts: u32,
    pub ambiguous: bool,
    pub near: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub neighborhoods: Vec<Neighborhood>,
    /// Non-adjacent pairs found within `d_pair` hops.
    pub near: Vec<(u32, u32)>,
    pub doubling_rounds: u32,
    pub diagnostics: Vec<PairDiagnostic>,
}

/// Hop-distance neighborhoods read directly off the graph.
pub fn true_neighborhoods(graph: &CycleGraph, k: usize) -> Vec<Neighborhood> {
    (0..graph.n() as u32)
        .map(|c| {
            let mut nb: Vec<u32> = graph.neighbors(c).collect();
            nb.sort_unstable();
            let arm = |first: Option<&u32>| -> Vec<u32> {
                let Some(&first) = first else { return Vec::new() };
                let mut out = vec![first];
                let (mut prev, mut cur) = (c, first);
                while out.len() < k {
                    match graph.neighbors(cur).find(|&x| x != prev) {
                        Some(x) if x != c => {
                            out.push(x);
                            prev = cur;
                            cur = x;
                        }
                        _ => break,
                    }
                }
                out
            };
            let mut plus = arm(nb.first());
            let mut minus = arm(nb.get(1));
            // short cycles: walk all the way round
            if plus.len() < k && nb.len() == 2 && minus.len() < k {
                plus = walk_cycle(graph, c, nb[0]).unwrap_or_default();
                minus = walk_cycle(graph, c, nb[1]).unwrap_or_default();
            }
            Neighborhood { center: c, plus, minus }
        })
        .collect()
}

/// Vertices after `start` going through `first`, until the walk returns.
fn walk_cycle(graph: &CycleGraph, start: u32, first: u32) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    let (mut prev, mut cur) = (start, first);
    while cur != start {
        if out.len() > graph.n() {
            return None;
        }
        out.push(cur);
        let next = graph.neighbors(cur).find(|&x| x != prev)?;
        prev = cur;
        cur = next;
    }
    Some(out)
}

fn diag(ctx: &SwitchContext, v: (u32, u32)) -> PairDiagnostic {
    PairDiagnostic {
        cycle_len: ctx.cycle_len,
        u1: ctx.u_pair.0,
        u2: ctx.u_pair.1,
        v1: v.0,
        v2: v.1,
        label: None,
        samples: 0,
        groups: Vec::new(),
        attempts: 0,
        ambiguous: false,
        near: false,
    }
}

/// Profiles one switched graph (with one retry on an ambiguous grouping)
/// and reports whether it reveals a short cycle through `(u1,u2)`.
fn probe_switch<O: MstOracle + ?Sized>(
    oracle: &O,
    switched: &CycleGraph,
    ctx: &SwitchContext,
    cfg: &ReductionConfig,
    samples: u32,
    key: Key,
    d: &mut PairDiagnostic,
) -> Option<super::Classification> {
    for attempt in 0..=cfg.retries {
        d.attempts += 1;
        let (profile, screened) = screened_profile(oracle, switched, samples, cfg, key.with(attempt as u64));
        d.samples += profile.samples;
        if screened {
            d.ambiguous = false;
            return None;
        }
        match group_and_classify(&profile, ctx, cfg) {
            Ok(c) => {
                d.ambiguous = false;
                d.label = Some(c.label);
                d.groups = c.groups.iter().map(|g| (g.size, g.lo, g.hi)).collect();
                return Some(c);
            }
            Err(_) => d.ambiguous = true,
        }
    }
    None
}

fn near_from(c: &super::Classification, d_pair: u32) -> bool {
    matches!(c.flag, Some(Flag::Small { implied_distance, .. }) if implied_distance <= d_pair)
}

/// The isolated cycle `vertices` of `graph` with the same switch applied,
/// relabeled to `0..len`.
fn isolated_switch(
    graph: &CycleGraph,
    vertices: &[u32],
    e1: (u32, u32),
    e2: (u32, u32),
) -> Option<(CycleGraph, (u32, u32), (u32, u32))> {
    let pos = |v: u32| vertices.binary_search(&v).ok().map(|i| i as u32);
    let mut edges = Vec::new();
    for &v in vertices {
        for w in graph.neighbors(v) {
            if v < w {
                edges.push((pos(v)?, pos(w)?));
            }
        }
    }
    let sub = CycleGraph::from_edges(vertices.len(), &edges).ok()?;
    let (a1, b1, a2, b2) = (pos(e1.0)?, pos(e1.1)?, pos(e2.0)?, pos(e2.1)?);
    let switched = two_switch(&sub, (a1, b1), (a2, b2)).ok()?;
    Some((switched, (a1, a2), (b1, b2)))
}

/// Finds the ordered `1/eps`-neighborhood of every vertex of a graph whose
/// cycles all have length `cycle_len`.
///
/// Every non-adjacent pair is tested through all four switches of its
/// incident edges; a pair is near when some switch exposes a short cycle
/// implying at most `d_pair` hops. Adjacent pairs are near by definition.
/// The near relation is then squared until it covers `1/eps` hops.
pub fn detect_neighborhoods<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    cycle_len: usize,
    eps: f64,
    cfg: &ReductionConfig,
    key: Key,
) -> Result<Detection, ReductionError> {
    let k = inverse_epsilon(eps)?;
    let n = graph.n();
    let d = cfg.d_pair.max(1) as usize;
    let (near, diagnostics) = near_pairs(oracle, graph, cycle_len, eps, cfg, key);
    let mut rel: Vec<Vec<u32>> = (0..n as u32).map(|v| graph.neighbors(v).collect()).collect();
    for &(u1, u2) in &near {
        rel[u1 as usize].push(u2);
        rel[u2 as usize].push(u1);
    }
    let mut radius = d;
    let mut rounds = 0;
    while radius < k {
        rel = square(&rel);
        radius *= 2;
        rounds += 1;
    }
    let neighborhoods = (0..n as u32).map(|u| read_neighborhood(graph, &rel[u as usize], u, radius, cycle_len, k)).collect::<Result<_, _>>()?;
    Ok(Detection { neighborhoods, near, doubling_rounds: rounds, diagnostics })
}

/// The non-adjacent pairs found within `d_pair` hops, with one diagnostic
/// per switch tested.
pub fn near_pairs<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    cycle_len: usize,
    eps: f64,
    cfg: &ReductionConfig,
    key: Key,
) -> (Vec<(u32, u32)>, Vec<PairDiagnostic>) {
    let n = graph.n();
    let samples = cfg.samples(n, eps);
    let mut near = Vec::new();
    let mut diagnostics = Vec::new();
    for u1 in 0..n as u32 {
        for u2 in u1 + 1..n as u32 {
            if graph.has_edge(u1, u2) {
                continue;
            }
            let mut found = false;
            'choices: for v1 in graph.neighbors(u1) {
                for v2 in graph.neighbors(u2) {
                    let Ok(switched) = two_switch(graph, (u1, v1), (u2, v2)) else { continue };
                    let ctx = SwitchContext { cycle_len, u_pair: (u1, u2), v_pair: (v1, v2), probe: false };
                    let mut dg = diag(&ctx, (v1, v2));
                    let ck = key.with(u1 as u64).with(u2 as u64).with(v1 as u64).with(v2 as u64);
                    let c = probe_switch(oracle, &switched, &ctx, cfg, samples, ck, &mut dg);
                    if let Some(c) = c {
                        if near_from(&c, cfg.d_pair) {
                            found = true;
                        } else if let Some(Flag::Cycle { vertices }) = &c.flag {
                            dg.label = Some(CaseLabel::FourB);
                            if let Some((iso, up, vp)) = isolated_switch(graph, vertices, (u1, v1), (u2, v2)) {
                                let ictx = SwitchContext { cycle_len: vertices.len(), u_pair: up, v_pair: vp, probe: true };
                                let mut idg = diag(&ictx, vp);
                                if let Some(ic) = probe_switch(oracle, &iso, &ictx, cfg, samples, ck.with(u64::MAX), &mut idg) {
                                    if near_from(&ic, cfg.d_pair) {
                                        found = true;
                                        dg.label = Some(CaseLabel::ThreeB);
                                    }
                                }
                                dg.samples += idg.samples;
                            }
                        }
                    }
                    dg.near = found;
                    diagnostics.push(dg);
                    if found {
                        break 'choices;
                    }
                }
            }
            if found {
                near.push((u1, u2));
            }
        }
    }
    (near, diagnostics)
}

/// One doubling round: pairs within two steps of the relation.
fn square(rel: &[Vec<u32>]) -> Vec<Vec<u32>> {
    rel.iter()
        .enumerate()
        .map(|(u, xs)| {
            let mut out: Vec<u32> = xs.clone();
            for &x in xs {
                out.extend_from_slice(&rel[x as usize]);
            }
            out.retain(|&w| w as usize != u);
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect()
}

/// Checks that `ball` is exactly the radius-`radius` ball of `u` on a cycle
/// of length `len`, then walks `k` steps each way.
fn read_neighborhood(
    graph: &CycleGraph,
    ball: &[u32],
    u: u32,
    radius: usize,
    len: usize,
    k: usize,
) -> Result<Neighborhood, ReductionError> {
    let bad = || ReductionError::InvalidNeighborhood(u);
    let mut nb: Vec<u32> = graph.neighbors(u).collect();
    if nb.len() != 2 {
        return Err(bad());
    }
    nb.sort_unstable();
    let mut inside: Vec<u32> = ball.to_vec();
    inside.sort_unstable();
    inside.dedup();
    let contains = |v: u32| v == u || inside.binary_search(&v).is_ok();
    let arm = |first: u32, steps: usize| -> Option<Vec<u32>> {
        let mut out = Vec::with_capacity(steps);
        let (mut prev, mut cur) = (u, first);
        for _ in 0..steps {
            if !contains(cur) || cur == u {
                return None;
            }
            out.push(cur);
            let next = graph.neighbors(cur).find(|&x| x != prev)?;
            prev = cur;
            cur = next;
        }
        Some(out)
    };
    if len <= 2 * radius + 1 {
        if inside.len() + 1 != len {
            return Err(bad());
        }
        let plus = walk_cycle(graph, u, nb[0]).ok_or_else(bad)?;
        if plus.len() + 1 != len || plus.iter().any(|&v| !contains(v)) {
            return Err(bad());
        }
        let minus: Vec<u32> = plus.iter().rev().copied().collect();
        let take = if len <= 2 * k { len - 1 } else { k };
        return Ok(Neighborhood { center: u, plus: plus[..take].to_vec(), minus: minus[..take].to_vec() });
    }
    if inside.len() != 2 * radius {
        return Err(bad());
    }
    let plus = arm(nb[0], radius).ok_or_else(bad)?;
    let minus = arm(nb[1], radius).ok_or_else(bad)?;
    // the arms must stop exactly at the edge of the ball
    for side in [&plus, &minus] {
        let last = side[radius - 1];
        let before = if radius >= 2 { side[radius - 2] } else { u };
        let beyond = graph.neighbors(last).find(|&x| x != before).ok_or_else(bad)?;
        if contains(beyond) {
            return Err(bad());
        }
    }
    Ok(Neighborhood { center: u, plus: plus[..k].to_vec(), minus: minus[..k].to_vec() })
}

/// Joins every vertex to the two vertices `k` hops away, splitting each
/// cycle of length `cycle_len` into `k` cycles. A representative is a vertex
/// and its next vertex along the cycle; the new representatives are the
/// first `k` vertices from each old one, in order, each pointing forward.
pub fn break_cycles(
    graph: &CycleGraph,
    reps: &[(u32, u32)],
    k: usize,
    cycle_len: usize,
    neighborhoods: &[Neighborhood],
) -> Result<(CycleGraph, Vec<(u32, u32)>), ReductionError> {
    if k == 0 || cycle_len % k != 0 {
        return Err(ReductionError::IndivisibleLength { len: cycle_len, k });
    }
    let n = graph.n();
    let fail = |m: String| ReductionError::Failure(m);
    let mut edges = Vec::with_capacity(n);
    for nb in neighborhoods {
        if nb.plus.len() < k || nb.minus.len() < k {
            return Err(ReductionError::InvalidNeighborhood(nb.center));
        }
        for far in [nb.plus[k - 1], nb.minus[k - 1]] {
            let e = (nb.center.min(far), nb.center.max(far));
            edges.push(e);
        }
    }
    edges.sort_unstable();
    // each edge is named by both of its ends
    let mut unique = Vec::with_capacity(edges.len() / 2);
    for pair in edges.chunks(2) {
        if pair.len() != 2 || pair[0] != pair[1] {
            return Err(fail("distance-k relation is not symmetric".into()));
        }
        unique.push(pair[0]);
    }
    let next = CycleGraph::from_edges(n, &unique)?;
    let mut new_reps = Vec::with_capacity(reps.len() * k);
    for &(r, fwd) in reps {
        let path = neighborhoods[r as usize].toward(fwd).ok_or_else(|| fail(format!("{fwd} is not next to {r}")))?;
        let mut seq = vec![r];
        seq.extend_from_slice(&path[..k]);
        for j in 0..k {
            let side = neighborhoods[seq[j] as usize]
                .toward(seq[j + 1])
                .ok_or_else(|| fail(format!("{} is not next to {}", seq[j + 1], seq[j])))?;
            new_reps.push((seq[j], side[k - 1]));
        }
    }
    Ok((next, new_reps))
}

/// `k` if `1/eps` is an integer `k >= 2`.
pub fn inverse_epsilon(eps: f64) -> Result<usize, ReductionError> {
    let inv = 1.0 / eps;
    let k = inv.round();
    if !(eps > 0.0) || (inv - k).abs() > 1e-9 || k < 2.0 {
        return Err(ReductionError::NonIntegralInverse(eps));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub cycle_len: usize,
    pub tested: usize,
    pub screened: usize,
    pub ambiguous: usize,
    pub near_pairs: usize,
    pub doubling_rounds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOrder {
    pub order: Vec<u32>,
    /// The order is a permutation and consecutive vertices are adjacent.
    pub valid: bool,
    pub levels: Vec<LevelSummary>,
    pub diagnostics: Vec<PairDiagnostic>,
}

fn order_level<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    cycle_len: usize,
    reps: &[(u32, u32)],
    eps: f64,
    cfg: &ReductionConfig,
    key: Key,
    out: &mut CycleOrder,
) -> Result<Vec<Vec<u32>>, ReductionError> {
    let k = inverse_epsilon(eps)?;
    if cycle_len <= k {
        // small enough to gather whole
        return reps
            .iter()
            .map(|&(r, fwd)| {
                if !graph.has_edge(r, fwd) {
                    return Err(ReductionError::Failure(format!("{fwd} is not next to {r}")));
                }
                let mut o = vec![r];
                o.extend(walk_cycle(graph, r, fwd).ok_or_else(|| ReductionError::Failure("broken cycle".into()))?);
                if o.len() != cycle_len {
                    return Err(ReductionError::Failure(format!("base cycle has {} vertices, expected {cycle_len}", o.len())));
                }
                Ok(o)
            })
            .collect();
    }
    let det = detect_neighborhoods(oracle, graph, cycle_len, eps, cfg, key)?;
    out.levels.push(LevelSummary {
        cycle_len,
        tested: det.diagnostics.len(),
        screened: det.diagnostics.iter().filter(|d| d.label.is_none() && !d.ambiguous).count(),
        ambiguous: det.diagnostics.iter().filter(|d| d.ambiguous).count(),
        near_pairs: det.near.len(),
        doubling_rounds: det.doubling_rounds,
    });
    let (next, sub_reps) = break_cycles(graph, reps, k, cycle_len, &det.neighborhoods)?;
    out.diagnostics.extend(det.diagnostics);
    let sub = order_level(oracle, &next, cycle_len / k, &sub_reps, eps, cfg, key.with(cycle_len as u64), out)?;
    // vertex at position j + k*m of a cycle is vertex m of its j-th piece
    Ok(sub
        .chunks(k)
        .map(|pieces| {
            let m = pieces[0].len();
            (0..m * k).map(|p| pieces[p % k][p / k]).collect()
        })
        .collect())
}

/// True when `order` lists every vertex once and consecutive vertices,
/// including last and first, are adjacent.
pub fn is_valid_order(graph: &CycleGraph, order: &[u32]) -> bool {
    let n = graph.n();
    if order.len() != n || n < 3 {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v as usize >= n || std::mem::replace(&mut seen[v as usize], true) {
            return false;
        }
    }
    (0..n).all(|i| graph.has_edge(order[i], order[(i + 1) % n]))
}

/// Recovers the cyclic order of a graph promised to be a single cycle on a
/// power of `1/eps` vertices.
pub fn order_cycle<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    eps: f64,
    cfg: &ReductionConfig,
    key: Key,
) -> Result<CycleOrder, ReductionError> {
    let k = inverse_epsilon(eps)?;
    let n = graph.n();
    let mut p = 1;
    while p < n {
        p *= k;
    }
    if p != n {
        return Err(ReductionError::NotAPower { n, k });
    }
    let start = graph.neighbors(0).min().ok_or_else(|| ReductionError::Failure("vertex 0 is isolated".into()))?;
    let mut out = CycleOrder { order: Vec::new(), valid: false, levels: Vec::new(), diagnostics: Vec::new() };
    let mut orders = order_level(oracle, graph, n, &[(0, start)], eps, cfg, key, &mut out)?;
    out.order = orders.pop().unwrap_or_default();
    out.valid = is_valid_order(graph, &out.order);
    Ok(out)
}

/// Inserts new vertices into edges until there are `k^m` vertices. Each
/// edge in sorted order takes `extra / |E|` new vertices, the first
/// `extra % |E|` one more.
pub fn pad_to_power(graph: &CycleGraph, k: usize) -> Result<CycleGraph, ReductionError> {
    let n = graph.n();
    let mut target = 1;
    while target < n {
        target *= k;
    }
    let extra = target - n;
    if extra == 0 {
        return Ok(graph.clone());
    }
    let edges = graph.edges();
    if edges.is_empty() {
        return Err(ReductionError::Failure("nothing to pad".into()));
    }
    let m = edges.len();
    let mut out = Vec::with_capacity(m + extra);
    let mut fresh = n as u32;
    for (i, &(a, b)) in edges.iter().enumerate() {
        let c = extra / m + usize::from(i < extra % m);
        let mut prev = a;
        for _ in 0..c {
            out.push((prev, fresh));
            prev = fresh;
            fresh += 1;
        }
        out.push((prev, b));
    }
    Ok(CycleGraph::from_edges(target, &out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OneCycle,
    TwoCycles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solve {
    pub verdict: Verdict,
    pub padded_n: usize,
    /// The recovered order restricted to the input's vertices.
    pub order: Vec<u32>,
    pub attempt: Option<CycleOrder>,
    pub failure: Option<String>,
}

/// Decides between one cycle and two, by trying to order the input as one
/// cycle and checking the result edge by edge. Never answers one cycle for
/// a graph that is not a single cycle.
pub fn solve_one_vs_two<O: MstOracle + ?Sized>(
    oracle: &O,
    graph: &CycleGraph,
    eps: f64,
    cfg: &ReductionConfig,
    key: Key,
) -> Result<Solve, ReductionError> {
    let k = inverse_epsilon(eps)?;
    let padded = pad_to_power(graph, k)?;
    let n = graph.n() as u32;
    let (attempt, failure) = match order_cycle(oracle, &padded, eps, cfg, key) {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let valid = attempt.as_ref().is_some_and(|o| is_valid_order(&padded, &o.order));
    let order: Vec<u32> =
        attempt.as_ref().map(|o| o.order.iter().copied().filter(|&v| v < n).collect()).unwrap_or_default();
    let verdict = if valid && is_valid_order(graph, &order) { Verdict::OneCycle } else { Verdict::TwoCycles };
    Ok(Solve { verdict, padded_n: padded.n(), order, attempt, failure })
}
