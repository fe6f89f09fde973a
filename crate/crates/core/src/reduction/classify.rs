use std::fmt;

use serde::Serialize;

use super::{ReductionConfig, ReductionError, RemovalProfile};

/// What the removal groups after a two-switch look like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    /// One group: different cycles with equal rates, a relink, or a split
    /// into two long cycles with equal rates.
    Uniform,
    OneB,
    ThreeA,
    ThreeB,
    ThreeC,
    /// A whole cycle's worth of edges stands out; needs the isolated probe.
    ThreeBOrFourB,
    FourB,
    FourC,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::Uniform => "1-a/2/4-a",
            CaseLabel::OneB => "1-b",
            CaseLabel::ThreeA => "3-a",
            CaseLabel::ThreeB => "3-b",
            CaseLabel::ThreeC => "3-c",
            CaseLabel::ThreeBOrFourB => "3-b/4-b",
            CaseLabel::FourB => "4-b",
            CaseLabel::FourC => "4-c",
        })
    }
}

impl CaseLabel {
    pub fn is_three(self) -> bool {
        matches!(self, CaseLabel::ThreeA | CaseLabel::ThreeB | CaseLabel::ThreeC)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub size: usize,
    pub lo: f64,
    pub hi: f64,
    pub has_u_pair: bool,
    pub has_v_pair: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Flag {
    /// A short cycle; the hop distance between `u1` and `u2` it implies.
    Small { edges: Vec<(u32, u32)>, implied_distance: u32 },
    /// Vertices of a whole cycle of the unswitched graph.
    Cycle { vertices: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub label: CaseLabel,
    pub groups: Vec<GroupSummary>,
    pub flag: Option<Flag>,
    /// Whether the groups respect the expected rate bounds, with slack `gap/2`.
    pub in_bounds: bool,
}

/// The switch that produced a profiled graph. `u_pair` is `(u1,u2)`,
/// `v_pair` is `(v1,v2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchContext {
    /// Length every cycle had before the switch.
    pub cycle_len: usize,
    pub u_pair: (u32, u32),
    pub v_pair: (u32, u32),
    /// Profiling the isolated cycle rather than the whole graph.
    pub probe: bool,
}

/// Sorts edges by estimate and cuts wherever consecutive estimates differ by
/// at least `gap`. Groups come out in increasing order.
pub fn group_edges(p_hat: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..p_hat.len()).collect();
    idx.sort_by(|&a, &b| p_hat[a].total_cmp(&p_hat[b]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (j, &i) in idx.iter().enumerate() {
        if j == 0 || p_hat[i] - p_hat[idx[j - 1]] >= gap {
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(i);
    }
    out
}

fn same_sizes(mut got: Vec<usize>, mut want: Vec<usize>) -> bool {
    want.retain(|&x| x > 0);
    got.sort_unstable();
    want.sort_unstable();
    got == want
}

/// Reads the case of a two-switch from its removal profile.
///
/// A group of at most `d_pair + 1` edges with an estimate above `hi_cut` is a
/// short cycle. It contains either `(u1,u2)`, and then the pair is `size - 1`
/// hops apart, or `(v1,v2)`, and then `size + 1` hops apart.
pub fn group_and_classify(
    profile: &RemovalProfile,
    ctx: &SwitchContext,
    cfg: &ReductionConfig,
) -> Result<Classification, ReductionError> {
    let p = profile.p_hat();
    let m = p.len();
    let l = ctx.cycle_len;
    let norm = |e: (u32, u32)| (e.0.min(e.1), e.0.max(e.1));
    let ui = profile.edges.binary_search(&norm(ctx.u_pair)).ok();
    let vi = profile.edges.binary_search(&norm(ctx.v_pair)).ok();
    let raw = group_edges(&p, cfg.gap);
    let groups: Vec<GroupSummary> = raw
        .iter()
        .map(|g| GroupSummary {
            size: g.len(),
            lo: p[g[0]],
            hi: p[*g.last().unwrap()],
            has_u_pair: ui.is_some_and(|i| g.contains(&i)),
            has_v_pair: vi.is_some_and(|i| g.contains(&i)),
        })
        .collect();
    let slack = cfg.gap / 2.0;
    let rest_max = if ctx.probe { cfg.probe_max } else { cfg.bulk_max };
    let sizes_except = |skip: usize| -> Vec<usize> {
        groups.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, g)| g.size).collect()
    };
    let done = |label, flag, in_bounds| Ok(Classification { label, groups: groups.clone(), flag, in_bounds });

    let small: Vec<usize> =
        (0..groups.len()).filter(|&i| groups[i].size <= cfg.d_pair as usize + 1 && groups[i].hi > cfg.hi_cut).collect();
    if small.len() > 1 {
        return Err(ReductionError::AmbiguousGrouping);
    }
    if let Some(&si) = small.first() {
        let g = &groups[si];
        let s = g.size;
        let implied = match (g.has_u_pair, g.has_v_pair) {
            (true, false) => s as u32 - 1,
            (false, true) => s as u32 + 1,
            _ => return Err(ReductionError::AmbiguousGrouping),
        };
        let rest = sizes_except(si);
        let bulk_ok = |size: usize| groups.iter().filter(|x| x.size == size).all(|x| x.hi <= rest_max + slack);
        let (label, bounded) = if rest == [m - s] {
            (CaseLabel::ThreeA, bulk_ok(m - s))
        } else if l >= s && same_sizes(rest, vec![m.saturating_sub(l), l - s]) {
            (CaseLabel::ThreeC, m == l || bulk_ok(m - l))
        } else {
            return Err(ReductionError::AmbiguousGrouping);
        };
        let edges = raw[si].iter().map(|&i| profile.edges[i]).collect();
        return done(label, Some(Flag::Small { edges, implied_distance: implied }), bounded && g.lo >= cfg.small_min - slack);
    }

    let whole: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].size == l && groups[i].hi > cfg.hi_cut).collect();
    if whole.len() == 1 && !ctx.probe {
        let wi = whole[0];
        if !same_sizes(sizes_except(wi), vec![m - l]) {
            return Err(ReductionError::AmbiguousGrouping);
        }
        let mut vertices: Vec<u32> = raw[wi].iter().flat_map(|&i| [profile.edges[i].0, profile.edges[i].1]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        return done(CaseLabel::ThreeBOrFourB, Some(Flag::Cycle { vertices }), true);
    }

    let sizes: Vec<usize> = groups.iter().map(|g| g.size).collect();
    let long = |a: usize| a > cfg.d_pair as usize + 1;
    if groups.len() == 1 {
        return done(CaseLabel::Uniform, None, true);
    }
    if m >= 2 * l && same_sizes(sizes.clone(), vec![2 * l, m - 2 * l]) {
        return done(CaseLabel::OneB, None, true);
    }
    if same_sizes(sizes.clone(), vec![l, m - l]) {
        return done(CaseLabel::FourB, None, true);
    }
    // a split into two long cycles: the untouched edges plus two parts of one cycle
    let bulk = m - l;
    let mut parts = sizes.clone();
    if bulk > 0 {
        match parts.iter().position(|&x| x == bulk) {
            Some(i) => {
                parts.remove(i);
            }
            None => return Err(ReductionError::AmbiguousGrouping),
        }
    }
    if parts.len() == 2 && parts[0] + parts[1] == l && long(parts[0]) && long(parts[1]) {
        return done(CaseLabel::FourC, None, true);
    }
    Err(ReductionError::AmbiguousGrouping)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A profile over edges `(i, i+1)` with the given counts out of `s`.
    fn synthetic(counts: &[u32], s: u32) -> RemovalProfile {
        RemovalProfile {
            edges: (0..counts.len() as u32).map(|i| (i, i + 1)).collect(),
            counts: counts.to_vec(),
            samples: s,
            misbehaved: 0,
        }
    }

    fn ctx(l: usize, u: u32, v: u32) -> SwitchContext {
        SwitchContext { cycle_len: l, u_pair: (u, u + 1), v_pair: (v, v + 1), probe: false }
    }

    #[test]
    fn grouping_chains_close_estimates() {
        let g = group_edges(&[0.1, 0.5, 0.12, 0.14, 0.45], 0.05);
        assert_eq!(g, vec![vec![0, 2, 3], vec![4, 1]]);
    }

    #[test]
    fn equal_rates_form_one_group() {
        let p = synthetic(&[10; 27], 90);
        let c = group_and_classify(&p, &ctx(9, 0, 5), &ReductionConfig::calibrated()).unwrap();
        assert_eq!(c.label, CaseLabel::Uniform);
        assert_eq!(c.flag, None);
    }

    #[test]
    fn short_cycle_is_case_three() {
        // 27 edges: a 3-cycle at 1/3, a 6-cycle at 1/6, eighteen at 1/9
        let mut counts = vec![10u32; 27];
        counts[0..3].fill(30);
        counts[3..9].fill(15);
        let p = synthetic(&counts, 90);
        let cfg = ReductionConfig::calibrated();
        let c = group_and_classify(&p, &ctx(9, 1, 5), &cfg).unwrap();
        assert_eq!(c.label, CaseLabel::ThreeA);
        assert!(c.in_bounds);
        match c.flag {
            Some(Flag::Small { implied_distance, ref edges }) => {
                assert_eq!(implied_distance, 2);
                assert_eq!(edges.len(), 3);
            }
            _ => panic!("expected a short cycle"),
        }
        // the v-pair on the short side means four hops
        let c = group_and_classify(&p, &ctx(9, 5, 1), &cfg).unwrap();
        assert!(matches!(c.flag, Some(Flag::Small { implied_distance: 4, .. })));
        // three distinct rates
        let mut tight = ReductionConfig::calibrated();
        tight.gap = 0.04;
        let c = group_and_classify(&p, &ctx(9, 1, 5), &tight).unwrap();
        assert_eq!(c.label, CaseLabel::ThreeC);
    }

    #[test]
    fn joined_cycle_is_one_b() {
        // 27 edges, an 18-cycle at 1/18 and a 9-cycle at 1/9
        let mut counts = vec![20u32; 27];
        counts[0..18].fill(10);
        let p = synthetic(&counts, 180);
        let mut cfg = ReductionConfig::calibrated();
        cfg.gap = 0.05;
        let c = group_and_classify(&p, &ctx(9, 0, 3), &cfg).unwrap();
        assert_eq!(c.label, CaseLabel::OneB);
    }

    #[test]
    fn whole_cycle_needs_probe() {
        let mut counts = vec![2u32; 27];
        counts[18..27].fill(35);
        let p = synthetic(&counts, 100);
        let c = group_and_classify(&p, &ctx(9, 20, 24), &ReductionConfig::calibrated()).unwrap();
        assert_eq!(c.label, CaseLabel::ThreeBOrFourB);
        match c.flag {
            Some(Flag::Cycle { vertices }) => assert_eq!(vertices, (18..=27).collect::<Vec<_>>()),
            _ => panic!(),
        }
    }

    #[test]
    fn two_long_parts_are_four_c() {
        // 243 edges, an 81-cycle split into 30 and 51
        let mut counts = vec![1u32; 243];
        counts[0..30].fill(33);
        counts[30..81].fill(20);
        let p = synthetic(&counts, 1000);
        let mut cfg = ReductionConfig::calibrated();
        cfg.gap = 0.005;
        let c = group_and_classify(&p, &ctx(81, 0, 40), &cfg).unwrap();
        assert_eq!(c.label, CaseLabel::FourC);
    }

    #[test]
    fn stray_groups_are_ambiguous() {
        let mut counts = vec![10u32; 27];
        counts[0..5].fill(40);
        counts[5] = 80;
        let p = synthetic(&counts, 100);
        assert_eq!(
            group_and_classify(&p, &ctx(9, 5, 9), &ReductionConfig::calibrated()),
            Err(ReductionError::AmbiguousGrouping)
        );
    }
}
