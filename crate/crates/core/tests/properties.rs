use metric_mst::cycle_graph::CycleGraph;
use metric_mst::dsu::DisjointSets;
use metric_mst::experiment::verify_artifacts;
use metric_mst::hierarchy::{build_hierarchies, exact_level_components, HierarchyConfig};
use metric_mst::metric::{metric_from_cycles, metric_from_points, random_band_metric, uniform_plane_metric, MetricInstance};
use metric_mst::mpc::{Cluster, ClusterConfig};
use metric_mst::oracle::{
    approximation_ratio, check_almost_spanning_forest, constrained_forest, exact_mst, mst_respecting, ForestVerdict,
    RespectLevel, RespectSpec,
};
use metric_mst::pipeline::{modified_boruvka, run_pipeline, target_hierarchy, BoruvkaRounds, Executor, PipelineConfig};
use metric_mst::reduction::{
    break_cycles, estimate_removal_profile, predict_switch, solve_one_vs_two, true_neighborhoods, two_switch,
    ExactMstOracle, ReductionConfig, SwitchCase, Verdict,
};
use metric_mst::rng::{Key, Stream};
use metric_mst::{Partition, SpanningTree};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shuffle(g: &CycleGraph, seed: u64) -> CycleGraph {
    let mut perm: Vec<u32> = (0..g.n() as u32).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    g.relabel(&perm)
}

fn any_metric() -> impl Strategy<Value = MetricInstance> {
    prop_oneof![
        (2usize..40, any::<u64>()).prop_map(|(n, s)| uniform_plane_metric(n, 100.0, s)),
        (2usize..40, 1u64..20, any::<u64>()).prop_map(|(n, lo, s)| random_band_metric(n, lo, s)),
    ]
}

// --- metric ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn points_round_trip_through_text(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)) {
        let mut pts: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
        pts.dedup();
        prop_assume!(pts.len() >= 2);
        if let Ok(m) = metric_from_points(&pts, 50.0) {
            let back = MetricInstance::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert!(metric_mst::validate_metric(&m.to_table()).is_ok());
        }
    }

    #[test]
    fn cycle_metrics_have_one_weight_edge_per_component_edge(
        cycles in prop::collection::vec(3usize..9, 0..4),
        paths in prop::collection::vec(1usize..6, 0..3),
    ) {
        prop_assume!(!cycles.is_empty() || !paths.is_empty());
        let (m, g) = metric_from_cycles(&cycles, &paths).unwrap();
        let ones: Vec<_> = m.edges().filter(|e| e.weight == 1).collect();
        prop_assert_eq!(ones.len(), cycles.iter().sum::<usize>() + paths.iter().sum::<usize>());
        prop_assert!(m.edges().all(|e| e.weight == 1 || e.weight == 2));
        let mut d = DisjointSets::new(m.n());
        for e in &ones {
            d.union(e.u as usize, e.v as usize);
        }
        prop_assert_eq!(d.set_count(), cycles.len() + paths.len());
        prop_assert_eq!(g.components().len(), cycles.len() + paths.len());
    }

    #[test]
    fn edge_order_is_strict(m in any_metric()) {
        let e = m.sorted_edges();
        prop_assert_eq!(e.len(), m.n() * (m.n() - 1) / 2);
        prop_assert!(e.windows(2).all(|w| w[0] < w[1] && w[0].key() < w[1].key()));
    }
}

// --- mpc ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sort_conserves_records_within_space(
        recs in prop::collection::vec((0u64..40, any::<u64>()), 0..1500),
        n in 144usize..600,
    ) {
        let mut c = Cluster::new(ClusterConfig::new(n, 0.5).unwrap().enforced(true));
        let out = c.distributed_sort("s", recs.clone()).unwrap().flatten();
        let mut want = recs;
        want.sort();
        prop_assert_eq!(out, want);
        let r = c.report();
        prop_assert!(r.peak_machine_io <= c.config().space);
    }

    #[test]
    fn sort_is_deterministic_and_charges_by_size(recs in prop::collection::vec(any::<u64>(), 0..800), salt in any::<u64>()) {
        let run = |rs: Vec<u64>| {
            let mut c = Cluster::new(ClusterConfig::new(256, 0.5).unwrap().enforced(true));
            let out = c.distributed_sort("s", rs).unwrap().flatten();
            (out, c.report())
        };
        let (a, la) = run(recs.clone());
        let (b, lb) = run(recs.clone());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&la.rounds_by_phase, &lb.rounds_by_phase);
        let other: Vec<u64> = recs.iter().map(|x| x ^ salt).collect();
        let (_, lc) = run(other);
        prop_assert_eq!(la.rounds_by_phase, lc.rounds_by_phase);
    }
}

// --- hierarchy ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hierarchies_nest_and_sandwich(m in any_metric(), seed in any::<u64>(), eps in prop::sample::select(vec![0.5, 0.25])) {
        let cfg = PipelineConfig::default().with_epsilon(eps).with_seed(seed);
        let params = cfg.params(&m);
        let h = build_hierarchies(&m, &params, &HierarchyConfig { seed, c_mpx: cfg.c_mpx, audit: false });
        prop_assert_eq!(h.mpx.chain_violation(), None);
        prop_assert_eq!(h.compressed.chain_violation(), None);
        for k in 0..=params.top {
            let base = h.mpx.level(k);
            let envelope = h.mpx.level(k + 1);
            let exact = exact_level_components(&m, &base, &envelope, params.threshold(k));
            let hat = h.compressed.level(k);
            prop_assert!(base.refines(&exact));
            prop_assert!(exact.refines(&hat));
            prop_assert!(hat.refines(&envelope));
            prop_assert!(h.raw[k as usize].len() >= 1);
        }
        prop_assert_eq!(h.mpx.level(params.top + 1).len(), 1);
    }
}

// --- pipeline ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_trees_are_valid_and_consistent(m in any_metric(), seed in any::<u64>(), eps in prop::sample::select(vec![0.5, 0.25, 0.1])) {
        let cfg = PipelineConfig::default().with_epsilon(eps).with_seed(seed);
        let out = run_pipeline(&m, &cfg).unwrap();
        prop_assert!(out.tree.validate_against(&m, Some(out.params.alpha)).is_ok());
        let hat = target_hierarchy(&m, &cfg);
        let problems = verify_artifacts(&m, &out.tree, Some(&hat), Some(out.params.alpha));
        prop_assert!(problems.is_empty(), "{:?}", problems);
        prop_assert!(approximation_ratio(&out.tree, &m) >= 1.0);
        let closed = out.params.closed_form(&cfg.cluster(m.n()).unwrap());
        prop_assert_eq!(out.ledger.rounds_by_phase, closed.rounds_by_phase);
    }

    #[test]
    fn boruvka_edges_lie_in_the_constrained_forest(m in any_metric(), seed in any::<u64>(), rounds in 1u64..6) {
        let cfg = PipelineConfig::default().with_seed(seed);
        let params = cfg.params(&m);
        let hat = target_hierarchy(&m, &cfg);
        let mut below = Partition::singletons(m.n());
        for k in 0..=params.top {
            let target = hat.level(k);
            let theta = params.threshold(k + 1);
            let b = modified_boruvka(&m, &below, &target, theta, BoruvkaRounds::Fixed(rounds), |r, c| {
                metric_mst::pipeline::boruvka_coin(seed, k, r, c)
            })
            .unwrap();
            let forest = constrained_forest(&m, &below, &target, theta);
            prop_assert!(b.edges.iter().all(|e| forest.contains(e)));
            prop_assert!(b.survivors.refines(&target));
            below = target;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn executors_agree(n in 4usize..48, seed in any::<u64>(), eps in prop::sample::select(vec![0.5, 0.25])) {
        let m = uniform_plane_metric(n, 200.0, seed);
        let direct = PipelineConfig::default().with_epsilon(eps).with_seed(seed);
        let sim = PipelineConfig { executor: Executor::Sim, ..direct.clone() };
        let a = run_pipeline(&m, &direct).unwrap();
        let b = run_pipeline(&m, &sim).unwrap();
        prop_assert_eq!(a.tree, b.tree);
        prop_assert_eq!(a.ledger.rounds_by_phase, b.ledger.rounds_by_phase);
    }
}

// --- oracle ---

/// Vertices reachable from `start` in the tree without crossing `skip`.
fn side(tree: &SpanningTree, skip: usize, start: u32) -> Vec<bool> {
    let mut seen = vec![false; tree.n()];
    seen[start as usize] = true;
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for (i, e) in tree.edges().iter().enumerate() {
            if i == skip {
                continue;
            }
            let y = if e.edge.u == x { e.edge.v } else if e.edge.v == x { e.edge.u } else { continue };
            if !seen[y as usize] {
                seen[y as usize] = true;
                stack.push(y);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kruskal_satisfies_the_cut_property(m in any_metric()) {
        let t = exact_mst(&m);
        prop_assert!(t.validate_against(&m, None).is_ok());
        prop_assert_eq!(&exact_mst(&m), &t);
        for (i, e) in t.edges().iter().enumerate() {
            let s = side(&t, i, e.edge.u);
            let lightest = m.edges().filter(|f| s[f.u as usize] != s[f.v as usize]).min().unwrap();
            prop_assert_eq!(lightest, e.edge);
        }
    }

    #[test]
    fn trivial_respect_spec_is_kruskal(m in any_metric()) {
        let spec = RespectSpec { levels: vec![RespectLevel { partition: Partition::trivial(m.n()), threshold: m.max_weight() }] };
        let t = mst_respecting(&m, &spec).unwrap();
        prop_assert_eq!(t.edge_refs(), exact_mst(&m).edge_refs());
    }

    #[test]
    fn forest_checker_matches_weight_identity(
        cycles in prop::collection::vec(4usize..10, 1..5),
        extra in 0usize..6,
        seed in any::<u64>(),
        eps in prop::sample::select(vec![0.5, 0.25, 0.1]),
    ) {
        let (m, g) = metric_from_cycles(&cycles, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut removed: Vec<(u32, u32)> = Vec::new();
        for c in g.cycles() {
            let k = c.vertices.len();
            let mut idx: Vec<usize> = (0..k).collect();
            idx.shuffle(&mut rng);
            let take = 1 + (extra.min(k - 2) * usize::from(rand::Rng::gen_bool(&mut rng, 0.5)));
            for &j in &idx[..take] {
                let (a, b) = (c.vertices[j], c.vertices[(j + 1) % k]);
                removed.push((a.min(b), a.max(b)));
            }
        }
        removed.sort_unstable();
        // the cheapest tree avoiding the removed edges
        let kept: Vec<_> = m.sorted_edges().into_iter().filter(|e| removed.binary_search(&(e.u, e.v)).is_err()).collect();
        let mut d = DisjointSets::new(m.n());
        let weight: u64 = kept.iter().filter(|e| d.union(e.u as usize, e.v as usize)).map(|e| e.weight).sum();
        let (n, k) = (m.n() as u64, removed.len() as u64);
        prop_assert_eq!(weight, n + k - 2);
        let want_valid = (k as f64) <= cycles.len() as f64 + eps * n as f64 + 1e-9;
        let verdict = check_almost_spanning_forest(&g, &removed, eps);
        prop_assert_eq!(verdict == ForestVerdict::Valid, want_valid);
        let mut partial = removed.clone();
        partial.retain(|e| !g.cycles()[0].vertices.contains(&e.0));
        prop_assert_eq!(check_almost_spanning_forest(&g, &partial, eps), ForestVerdict::CycleUncut(0));
    }
}

// --- reduction ---

fn component_signature(g: &CycleGraph) -> Vec<(bool, Vec<u32>)> {
    let mut out: Vec<(bool, Vec<u32>)> = g
        .components()
        .into_iter()
        .map(|c| {
            let mut v = c.vertices.clone();
            v.sort_unstable();
            (c.kind == metric_mst::ComponentKind::Cycle, v)
        })
        .collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn switches_conserve_degrees_and_follow_prediction(
        cycles in prop::collection::vec(3usize..8, 1..4),
        seed in any::<u64>(),
        pick in any::<(prop::sample::Index, prop::sample::Index, bool)>(),
    ) {
        let g = shuffle(&CycleGraph::from_lengths(&cycles, &[]).unwrap(), seed);
        let edges = g.edges();
        let e1 = edges[pick.0.index(edges.len())];
        let mut e2 = edges[pick.1.index(edges.len())];
        if pick.2 {
            e2 = (e2.1, e2.0);
        }
        let Ok(s) = two_switch(&g, e1, e2) else { return Ok(()) };
        prop_assert_eq!(s.edge_count(), g.edge_count());
        prop_assert!((0..g.n() as u32).all(|v| s.degree(v) == g.degree(v)));
        prop_assert!(s.has_edge(e1.0, e2.0) && s.has_edge(e1.1, e2.1));
        let before = g.cycles().len();
        let after = s.cycles().len();
        match predict_switch(&g, e1, e2).unwrap() {
            SwitchCase::Joined => prop_assert_eq!(after + 1, before),
            SwitchCase::Relinked => prop_assert_eq!(after, before),
            SwitchCase::Split => prop_assert_eq!(after, before + 1),
        }
        let back = two_switch(&s, (e1.0, e2.0), (e1.1, e2.1)).unwrap();
        prop_assert_eq!(component_signature(&back), component_signature(&g));
    }

    #[test]
    fn exact_oracle_cuts_one_edge_per_cycle(cycles in prop::collection::vec(3usize..12, 1..4), seed in any::<u64>()) {
        let g = shuffle(&CycleGraph::from_lengths(&cycles, &[]).unwrap(), seed);
        let eps = 1.0 / 3.0;
        let p = estimate_removal_profile(&ExactMstOracle::new(eps), &g, 64, Key::new(seed, Stream::Relabel));
        let c = cycles.len() as f64;
        prop_assert_eq!(p.misbehaved, 0);
        prop_assert!((p.removed_total() - c).abs() < 1e-9);
        prop_assert!(p.removed_total() <= c + eps * (g.n() as f64 + c - 2.0));
    }

    #[test]
    fn breaking_a_cycle_groups_vertices_by_residue(m in 2u32..4, seed in any::<u64>()) {
        let k = 3usize;
        let len = k.pow(m);
        let mut order: Vec<u32> = (0..len as u32).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let g = CycleGraph::cycle_from_order(&order).unwrap();
        let nb = true_neighborhoods(&g, k);
        let (next, reps) = break_cycles(&g, &[(order[0], order[1])], k, len, &nb).unwrap();
        let mut pos = vec![0usize; len];
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i;
        }
        let parts = next.cycles();
        prop_assert_eq!(parts.len(), k);
        for c in &parts {
            prop_assert_eq!(c.vertices.len(), len / k);
            let r = pos[c.vertices[0] as usize] % k;
            prop_assert!(c.vertices.iter().all(|&v| pos[v as usize] % k == r));
        }
        prop_assert_eq!(reps.len(), k);
        for (j, &(r, fwd)) in reps.iter().enumerate() {
            prop_assert_eq!(r, order[j]);
            prop_assert_eq!(fwd, order[j + k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn two_cycles_are_never_called_one(a in 3usize..6, b in 3usize..6, seed in any::<u64>()) {
        let g = shuffle(&CycleGraph::from_lengths(&[a, b], &[]).unwrap(), seed);
        let s = solve_one_vs_two(&ExactMstOracle::new(1.0 / 3.0), &g, 1.0 / 3.0, &ReductionConfig::calibrated(), Key::new(seed, Stream::Relabel)).unwrap();
        prop_assert_eq!(s.verdict, Verdict::TwoCycles);
    }
}
