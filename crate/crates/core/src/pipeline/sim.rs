//! The same algorithm routed through the simulated cluster.
//!
//! Vertices and edges live as records. Every step is one grouped sort: the
//! records are sorted, and each record learns the first record of its group.
//! Attaching a per-vertex value to edges sorts the vertex record (key `2v`)
//! just ahead of the edge records keyed by that vertex (key `2v + 1`).

use super::{assemble, charged_ledger, BoruvkaRounds, LevelReport, PipelineConfig, PipelineError, PipelineOutput};
use crate::hierarchy::{compress_coin, shifted, DelayDraw};
use crate::metric::{EdgeRef, MetricInstance};
use crate::mpc::{Cluster, MpcError, OrdF64, Record};
use crate::partition::Partition;
use crate::schedule::{Params, PHASE_BORUVKA, PHASE_COMPRESS, PHASE_INTERSECT, PHASE_JOIN, PHASE_MPX};
use crate::tree::TreeEdge;

struct Sim<'a> {
    c: Cluster,
    m: &'a MetricInstance,
    n: usize,
}

impl Sim<'_> {
    fn ends(&self, id: u64) -> (u32, u32) {
        ((id / self.n as u64) as u32, (id % self.n as u64) as u32)
    }

    /// Gives every item the value of the vertex it is keyed by.
    fn attach<P: Record>(
        &mut self,
        phase: &str,
        val: &[u32],
        items: impl IntoIterator<Item = (u32, P)>,
        wrap: impl Fn(u32) -> P,
        read: impl Fn(&P) -> u32,
    ) -> Result<Vec<(P, u32)>, MpcError> {
        let mut recs: Vec<(u64, P)> = val.iter().enumerate().map(|(v, &x)| (2 * v as u64, wrap(x))).collect();
        recs.extend(items.into_iter().map(|(k, p)| (2 * k as u64 + 1, p)));
        let g = self.c.group_heads(phase, recs, |r| r.0 >> 1, 1)?;
        Ok((0..g.records.len())
            .filter(|&i| g.records[i].0 & 1 == 1)
            .map(|i| (g.records[i].1.clone(), read(&g.head_of(i).1)))
            .collect())
    }

    /// Tells every vertex its component's target, if the component has one.
    fn deliver(&mut self, phase: &str, label: &[u32], targets: &[(u32, u32)]) -> Result<Vec<Option<u32>>, MpcError> {
        let mut recs: Vec<(u64, u64, u64)> = targets.iter().map(|&(x, y)| (x as u64, 0, y as u64)).collect();
        recs.extend(label.iter().enumerate().map(|(v, &l)| (l as u64, 1, v as u64)));
        let g = self.c.group_heads(phase, recs, |r| r.0, 1)?;
        let mut got = vec![None; self.n];
        for (r, h) in g.iter() {
            if r.1 == 1 && h.1 == 0 {
                got[r.2 as usize] = Some(h.2 as u32);
            }
        }
        Ok(got)
    }

    /// Relabels each group of equal keys by its smallest vertex.
    fn canonicalize(&mut self, phase: &str, keys: &[(u64, u64)]) -> Result<Vec<u32>, MpcError> {
        let recs: Vec<(u64, u64, u64)> = keys.iter().enumerate().map(|(v, &(a, b))| (a, b, v as u64)).collect();
        let g = self.c.group_heads(phase, recs, |r| (r.0, r.1), 1)?;
        let mut label = vec![0u32; self.n];
        for (r, h) in g.iter() {
            label[r.2 as usize] = h.2 as u32;
        }
        Ok(label)
    }

    /// Labels at both ends of each edge; the items carry `(id, w)`.
    fn both_ends(&mut self, phase: &str, label: &[u32], edges: &[(u64, u64)]) -> Result<Vec<(u64, u64, u32, u32)>, MpcError> {
        let items: Vec<(u32, (u64, u64))> = edges.iter().map(|&(id, w)| (self.ends(id).0, (id, w))).collect();
        let first = self.attach(phase, label, items, |x| (x as u64, 0), |p| p.0 as u32)?;
        let items: Vec<(u32, (u64, u64, u64))> = first.into_iter().map(|((id, w), lu)| (self.ends(id).1, (id, w, lu as u64))).collect();
        let second = self.attach(phase, label, items, |x| (x as u64, 0, 0), |p| p.0 as u32)?;
        Ok(second.into_iter().map(|((id, w, lu), lv)| (id, w, lu as u32, lv)).collect())
    }

    fn mpx_centers(&mut self, delays: &DelayDraw) -> Result<Vec<u32>, MpcError> {
        let n = self.n;
        let recs: Vec<(u64, OrdF64, u64)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .map(|(u, v)| (u as u64, OrdF64(shifted(self.m, u, v, &delays.delays)), v as u64))
            .collect();
        let g = self.c.group_heads(PHASE_MPX, recs, |r| r.0, 1)?;
        let mut center = vec![0u32; n];
        for h in g.heads() {
            center[h.0 as usize] = h.2 as u32;
        }
        Ok(center)
    }

    fn compress_level(
        &mut self,
        cfg: &PipelineConfig,
        params: &Params,
        k: u32,
        base: &[u32],
        env: &[u32],
    ) -> Result<Vec<u32>, MpcError> {
        let n = self.n;
        let t = params.threshold(k);
        let ph = PHASE_COMPRESS;
        let items: Vec<(u32, (u64, u64))> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| self.m.w(u, v) <= t)
            .map(|(u, v)| (u as u32, ((u * n + v) as u64, 0)))
            .collect();
        let first = self.attach(ph, env, items, |x| (x as u64, 0), |p| p.0 as u32)?;
        let items: Vec<(u32, (u64, u64))> = first.into_iter().map(|((id, _), eu)| (self.ends(id).1, (id, eu as u64))).collect();
        let second = self.attach(ph, env, items, |x| (x as u64, 0), |p| p.0 as u32)?;
        let mut edges: Vec<(u64, u64)> = second.into_iter().filter(|((_, eu), ev)| *eu == *ev as u64).map(|((id, _), _)| (id, 0)).collect();
        let mut label = base.to_vec();
        for round in 0..params.compress_rounds {
            let ends = self.both_ends(ph, &label, &edges)?;
            edges = ends.iter().filter(|e| e.2 != e.3).map(|e| (e.0, e.1)).collect();
            let coin = |c: u32| compress_coin(cfg.seed, k, round, c);
            let offers: Vec<(u64, u64)> = ends
                .iter()
                .filter(|e| e.2 != e.3)
                .flat_map(|e| [(e.2, e.3), (e.3, e.2)])
                .filter(|&(x, y)| !coin(x) && coin(y))
                .map(|(x, y)| (x as u64, y as u64))
                .collect();
            let g = self.c.group_heads(ph, offers, |r| r.0, 1)?;
            let targets: Vec<(u32, u32)> = g.heads().map(|h| (h.0 as u32, h.1 as u32)).collect();
            let got = self.deliver(ph, &label, &targets)?;
            let keys: Vec<(u64, u64)> = got.iter().zip(&label).map(|(g, &l)| (g.unwrap_or(l) as u64, 0)).collect();
            label = self.canonicalize(ph, &keys)?;
        }
        let ends = self.both_ends(ph, &label, &edges)?;
        let open: Vec<u64> = ends.iter().filter(|e| e.2 != e.3).flat_map(|e| [e.2 as u64, e.3 as u64]).collect();
        let g = self.c.group_heads(ph, open, |r| *r, 1)?;
        let incomplete: Vec<(u32, u32)> = g.heads().map(|&x| (x as u32, x as u32)).collect();
        let open = self.deliver(ph, &label, &incomplete)?;
        let keys: Vec<(u64, u64)> =
            (0..n).map(|v| if open[v].is_some() { (0, env[v] as u64) } else { (1, label[v] as u64) }).collect();
        self.canonicalize(ph, &keys)
    }

    #[allow(clippy::type_complexity)]
    fn boruvka_level(
        &mut self,
        cfg: &PipelineConfig,
        params: &Params,
        k: u32,
        below: &[u32],
        target: &[u32],
    ) -> Result<(Vec<EdgeRef>, Vec<u32>, Vec<EdgeRef>, u64), MpcError> {
        let n = self.n;
        let theta = cfg.edge_threshold(params, k);
        let coin = cfg.boruvka_coin(n, k);
        let ph = PHASE_BORUVKA;
        let items: Vec<(u32, (u64, u64))> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .map(|(u, v)| (u as u32, ((u * n + v) as u64, self.m.w(u, v))))
            .collect();
        let first = self.attach(ph, target, items, |x| (x as u64, 0), |p| p.0 as u32)?;
        let items: Vec<(u32, (u64, u64, u64))> =
            first.into_iter().map(|((id, w), a)| (self.ends(id).1, (id, w, a as u64))).collect();
        let second = self.attach(ph, target, items, |x| (x as u64, 0, 0), |p| p.0 as u32)?;
        let set_edges: Vec<(u64, u64)> = second.into_iter().filter(|((_, _, a), b)| *a == *b as u64).map(|((id, w, _), _)| (id, w)).collect();
        let mut edges: Vec<(u64, u64)> = set_edges.iter().copied().filter(|e| e.1 <= theta).collect();
        let mut label = below.to_vec();
        let mut out = Vec::new();
        let mut round = 0u64;
        loop {
            if let BoruvkaRounds::Fixed(t) = cfg.boruvka_rounds(params) {
                if round >= t {
                    break;
                }
            }
            let ends = self.both_ends(ph, &label, &edges)?;
            edges = ends.iter().filter(|e| e.2 != e.3).map(|e| (e.0, e.1)).collect();
            if cfg.boruvka_rounds(params) == BoruvkaRounds::UntilDone && edges.is_empty() {
                break;
            }
            let offers: Vec<(u64, u64, u64, u64)> = ends
                .iter()
                .filter(|e| e.2 != e.3)
                .flat_map(|e| [(e.2 as u64, e.1, e.0, e.3 as u64), (e.3 as u64, e.1, e.0, e.2 as u64)])
                .collect();
            let g = self.c.group_heads(ph, offers, |r| r.0, 3)?;
            let mut targets = Vec::new();
            for &(x, w, id, y) in g.heads() {
                if !coin(round, x as u32) && coin(round, y as u32) {
                    let (u, v) = self.ends(id);
                    out.push(EdgeRef { u, v, weight: w, id });
                    targets.push((x as u32, y as u32));
                }
            }
            let got = self.deliver(ph, &label, &targets)?;
            let keys: Vec<(u64, u64)> = got.iter().zip(&label).map(|(g, &l)| (g.unwrap_or(l) as u64, 0)).collect();
            label = self.canonicalize(ph, &keys)?;
            round += 1;
        }

        let ph = PHASE_JOIN;
        let recs: Vec<(u64, u64, u64)> = (0..n).map(|v| (target[v] as u64, label[v] as u64, v as u64)).collect();
        let g = self.c.group_heads(ph, recs, |r| r.0, 1)?;
        let mut code = vec![0u32; n];
        for (r, h) in g.iter() {
            code[r.2 as usize] = 2 * r.1 as u32 + u32::from(r.1 == h.1);
        }
        let ends = self.both_ends(ph, &code, &set_edges)?;
        let offers: Vec<(u64, u64, u64)> = ends
            .iter()
            .filter(|e| (e.2 & 1) != (e.3 & 1))
            .map(|e| {
                let other = if e.2 & 1 == 1 { e.3 } else { e.2 };
                ((other >> 1) as u64, e.1, e.0)
            })
            .collect();
        let g = self.c.group_heads(ph, offers, |r| r.0, 2)?;
        let joined: Vec<EdgeRef> = g
            .heads()
            .map(|&(_, w, id)| {
                let (u, v) = self.ends(id);
                EdgeRef { u, v, weight: w, id }
            })
            .collect();
        Ok((out, label, joined, round))
    }
}

/// Simulated executor. Produces the same tree as [`super::run_pipeline`]
/// for the same configuration; the ledger carries the cluster's metered
/// peaks as well.
pub fn run_pipeline_simulated(metric: &MetricInstance, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    if cfg.hierarchy != super::HierarchySource::Randomized {
        return Err(PipelineError::InvalidConfig("the exact hierarchy is only available to the direct executor".into()));
    }
    let n = metric.n();
    let params = cfg.params(metric);
    let cluster = cfg.cluster(n)?;
    let mut sim = Sim { c: Cluster::new(cluster.clone()), m: metric, n };
    let levels = params.top + 1;

    let mut centers = Vec::with_capacity(levels as usize);
    for k in 0..levels {
        let d = DelayDraw::keyed(cfg.seed, k, n, params.threshold(k), cfg.c_mpx);
        centers.push(sim.mpx_centers(&d)?);
    }
    let diameter_violations = if cfg.audit {
        centers
            .iter()
            .enumerate()
            .map(|(k, c)| crate::hierarchy::diameter_violations(metric, &Partition::from_dense_labels(c), params.threshold(k as u32)))
            .collect()
    } else {
        Vec::new()
    };
    // mpx[k] for k in 0..=levels, the last one trivial
    let mut mpx = vec![vec![0u32; n]; levels as usize + 1];
    for k in (0..levels as usize).rev() {
        let keys: Vec<(u64, u64)> = (0..n).map(|v| (mpx[k + 1][v] as u64, centers[k][v] as u64)).collect();
        let recs: Vec<(u64, u64, u64)> = keys.iter().enumerate().map(|(v, &(a, b))| (a, b, v as u64)).collect();
        let g = sim.c.group_heads(PHASE_INTERSECT, recs, |r| (r.0, r.1), 1)?;
        for (r, h) in g.iter() {
            mpx[k][r.2 as usize] = h.2 as u32;
        }
    }
    let mut hat = Vec::with_capacity(levels as usize);
    for k in 0..levels {
        let h = sim.compress_level(cfg, &params, k, &mpx[k as usize], &mpx[k as usize + 1])?;
        hat.push(h);
    }

    let mut below: Vec<u32> = (0..n as u32).collect();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut reports = Vec::new();
    let mut rounds_run = 0;
    for k in 0..levels {
        let target = &hat[k as usize];
        let theta = cfg.edge_threshold(&params, k);
        let (bor, survivors, joined, rounds) = sim.boruvka_level(cfg, &params, k, &below, target)?;
        let target_p = Partition::from_dense_labels(target);
        let check = Partition::from_dense_labels(&survivors).join_edges(joined.iter().map(|e| (e.u as usize, e.v as usize)));
        if check != target_p {
            return Err(PipelineError::LevelMismatch { level: k });
        }
        rounds_run += rounds;
        reports.push(LevelReport {
            level: k,
            threshold: params.threshold(k),
            edge_threshold: theta,
            components_below: Partition::from_dense_labels(&below).len(),
            components: target_p.len(),
            boruvka_edges: bor.len(),
            join_edges: joined.len(),
            heavy_join_edges: joined.iter().filter(|e| e.weight > theta).count(),
        });
        edges.extend(bor.into_iter().chain(joined).map(|edge| TreeEdge { edge, level: k }));
        below = target.clone();
    }
    let tree = assemble(n, edges)?;
    let ledger = sim.c.take_ledger();
    debug_assert_eq!(ledger.rounds_by_phase, charged_ledger(cfg, &params, &cluster, rounds_run).rounds_by_phase);
    Ok(PipelineOutput { tree, ledger, params, levels: reports, diameter_violations })
}
