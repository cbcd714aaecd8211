mod common;

use std::collections::BTreeSet;

use affinity_core::affinity::{combined_affinity, coupling_affinity, data_affinity};
use affinity_core::graph::{build_graph, normalize};
use affinity_core::ingest::{aggregate, MetaMap};
use affinity_core::partition::kl::{compute_d, refine, seed_split, CostMatrix, PassState};
use affinity_core::partition::{
    kl_bisect_with, oracle_min_kcut, partition_k_with, size_profile, Balance, SeedSplit,
};
use affinity_core::placement::{assign_clusters, plan_migration, simulate};
use affinity_core::{
    AffinityGraph, AffinityWeights, LatencyModel, MessageRecord, NodeId, Placement, ServiceId,
    ServiceMeta,
};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SERVICES: [&str; 5] = ["api", "cart", "db", "pay", "web"];

fn arb_record() -> impl Strategy<Value = MessageRecord> {
    (0..5usize, 1..5usize, 0..10_000u64, 1..20u64, 0..100u64).prop_map(
        |(s, off, bytes, count, ts)| MessageRecord {
            sender: sid(SERVICES[s]),
            receiver: sid(SERVICES[(s + off) % 5]),
            bytes,
            count,
            timestamp: ts,
        },
    )
}

fn arb_meta() -> impl Strategy<Value = MetaMap> {
    let tag = || proptest::option::of(prop_oneof![Just("x".to_string()), Just("y".to_string())]);
    proptest::collection::vec((tag(), tag(), tag()), 5).prop_map(|tags| {
        SERVICES
            .iter()
            .zip(tags)
            .map(|(name, (p, f, o))| {
                (
                    sid(name),
                    ServiceMeta {
                        id: sid(name),
                        privacy_tag: p,
                        function_tag: f,
                        operational_tag: o,
                    },
                )
            })
            .collect()
    })
}

fn arb_weights() -> impl Strategy<Value = AffinityWeights> {
    proptest::array::uniform5(0.0..3.0f64)
        .prop_filter("one positive weight", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(|[d, p, c, f, o]| AffinityWeights::new(d, p, c, f, o).unwrap())
}

proptest! {
    #[test]
    fn aggregate_conserves_retained_traffic(
        records in proptest::collection::vec(arb_record(), 0..40),
        start in 0..50u64,
        len in 1..60u64,
    ) {
        let win = aggregate(&records, start, start + len, &BTreeSet::new()).unwrap();
        let kept: Vec<_> = records.iter().filter(|r| r.timestamp >= start && r.timestamp < start + len).collect();
        prop_assert_eq!(win.total_bytes(), kept.iter().map(|r| r.bytes).sum::<u64>());
        prop_assert_eq!(win.total_messages(), kept.iter().map(|r| r.count).sum::<u64>());
        prop_assert_eq!(win.total_bytes(), win.pair_bytes().values().sum::<u64>());
        prop_assert_eq!(win.total_messages(), win.pair_messages().values().sum::<u64>());
        prop_assert!(win.pair_bytes().keys().eq(win.pair_messages().keys()));
        prop_assert_eq!(win.is_empty_window(), kept.is_empty());
    }

    #[test]
    fn aggregate_ignores_order_and_direction(
        records in proptest::collection::vec(arb_record(), 0..40),
        seed in any::<u64>(),
    ) {
        let base = aggregate(&records, 0, 100, &BTreeSet::new()).unwrap();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&aggregate(&shuffled, 0, 100, &BTreeSet::new()).unwrap(), &base);
        let flipped: Vec<_> = records
            .iter()
            .map(|r| MessageRecord { sender: r.receiver.clone(), receiver: r.sender.clone(), ..r.clone() })
            .collect();
        prop_assert_eq!(&aggregate(&flipped, 0, 100, &BTreeSet::new()).unwrap(), &base);
    }

    #[test]
    fn affinity_symmetry_bounds_and_homogeneity(
        records in proptest::collection::vec(arb_record(), 1..40),
        meta in arb_meta(),
        weights in arb_weights(),
        scale in 0.1..10.0f64,
    ) {
        let win = aggregate(&records, 0, 100, &BTreeSet::new()).unwrap();
        let scaled = weights.scaled(scale);
        for (i, u) in SERVICES.iter().enumerate() {
            for v in &SERVICES[i + 1..] {
                let (u, v) = (sid(u), sid(v));
                let uv = combined_affinity(&u, &v, &win, &meta, &weights).unwrap();
                let vu = combined_affinity(&v, &u, &win, &meta, &weights).unwrap();
                prop_assert_eq!(uv, vu);
                prop_assert!((0.0..=1.0).contains(&uv.d) && (0.0..=1.0).contains(&uv.c));
                for tag in [uv.p, uv.f, uv.o] {
                    prop_assert!(tag == 0.0 || tag == 1.0);
                }
                prop_assert!(uv.combined >= 0.0 && uv.combined <= weights.sum() + 1e-12);
                let s = combined_affinity(&u, &v, &win, &meta, &scaled).unwrap();
                prop_assert!((s.combined - scale * uv.combined).abs() <= 1e-9 * (1.0 + uv.combined.abs() * scale));
            }
        }
    }

    #[test]
    fn traffic_shares_sum_to_one(records in proptest::collection::vec(arb_record(), 1..40)) {
        let win = aggregate(&records, 0, 100, &BTreeSet::new()).unwrap();
        let mut d_sum = 0.0;
        let mut c_sum = 0.0;
        for (i, u) in SERVICES.iter().enumerate() {
            for v in &SERVICES[i + 1..] {
                d_sum += data_affinity(&sid(u), &sid(v), &win).unwrap();
                c_sum += coupling_affinity(&sid(u), &sid(v), &win).unwrap();
            }
        }
        if win.total_bytes() > 0 {
            prop_assert!((d_sum - 1.0).abs() < 1e-12);
        }
        prop_assert!((c_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_monotone_and_spans_unit_interval(raw in proptest::collection::vec(0.0..5.0f64, 1..30)) {
        let w = normalize(&raw);
        let distinct: BTreeSet<u64> = raw.iter().map(|a| a.to_bits()).collect();
        for (i, wi) in w.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(wi));
            for (j, wj) in w.iter().enumerate() {
                if raw[i] <= raw[j] {
                    prop_assert!(wi <= wj);
                }
            }
        }
        if distinct.len() >= 2 {
            prop_assert_eq!(w.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(w.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        } else {
            prop_assert!(w.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn graph_edges_follow_traffic(
        records in proptest::collection::vec(arb_record(), 0..40),
        meta in arb_meta(),
    ) {
        let declared: BTreeSet<ServiceId> = meta.keys().cloned().collect();
        let win = aggregate(&records, 0, 100, &declared).unwrap();
        let g = build_graph(&win, &meta, &AffinityWeights::default()).unwrap();
        prop_assert!(g.edges().keys().eq(win.pairs()));
        prop_assert_eq!(g.vertex_count(), 5);
        for e in g.edges().values() {
            prop_assert!((0.0..=1.0).contains(&e.weight));
            prop_assert_eq!(e.breakdown.unwrap().combined, e.raw_affinity);
        }
    }

    #[test]
    fn cut_plus_internal_is_total(n in 2..12usize, k in 1..6usize, seed in any::<u64>()) {
        let k = k.min(n);
        let g = random_graph(n, 0.4, seed);
        let p = partition_k_with(&g, k, &SeedSplit::Sorted).unwrap().partition;
        let cut = g.total_cut_weight(&p).unwrap();
        let internal = g.internal_weight(&p).unwrap();
        prop_assert!((cut + internal - g.total_weight()).abs() < 1e-9);
    }

    #[test]
    fn partition_is_a_balanced_cover(n in 1..40usize, k in 1..12usize, seed in any::<u64>()) {
        let k = k.min(n);
        let g = random_graph(n, 0.2, seed);
        let out = partition_k_with(&g, k, &SeedSplit::Sorted).unwrap();
        prop_assert_eq!(out.bisections, k - 1);
        prop_assert_eq!(out.partition.k(), k);
        prop_assert_eq!(out.partition.sizes(), size_profile(n, k));
        let mut all: Vec<_> = out.partition.subsets().concat();
        all.sort();
        prop_assert_eq!(all.as_slice(), g.vertices());
        // deterministic
        prop_assert_eq!(partition_k_with(&g, k, &SeedSplit::Sorted).unwrap(), out);
    }

    #[test]
    fn json_files_round_trip(
        records in proptest::collection::vec(arb_record(), 0..30),
        meta in arb_meta(),
    ) {
        let win = aggregate(&records, 0, 100, &meta.keys().cloned().collect()).unwrap();
        let text = serde_json::to_string(&win).unwrap();
        prop_assert_eq!(&serde_json::from_str::<affinity_core::MetricsWindow>(&text).unwrap(), &win);
        let g = build_graph(&win, &meta, &AffinityWeights::default()).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(&serde_json::from_str::<AffinityGraph>(&text).unwrap(), &g);
    }
}

#[test]
fn kl_pass_invariants_on_random_graphs() {
    for seed in 0..60u64 {
        let n = 4 + (seed as usize % 9);
        let g = random_graph(n, 0.5, 1000 + seed);
        let w = dense(&g);
        let costs = CostMatrix::from_graph(&g);
        let order: Vec<usize> = (0..n).collect();
        let mut pass = PassState::new(&costs, seed_split(n, &order));
        loop {
            // gain formula equals the from-scratch cut delta of every tentative swap
            let sides = pass.in_a().to_vec();
            let base = brute_cut(&w, &sides);
            for a in (0..n).filter(|&a| sides[a] && !pass.is_locked(a)) {
                for b in (0..n).filter(|&b| !sides[b] && !pass.is_locked(b)) {
                    let mut swapped = sides.clone();
                    swapped.swap(a, b);
                    let delta = base - brute_cut(&w, &swapped);
                    assert!((pass.gain(a, b) - delta).abs() < 1e-9, "seed {seed}");
                }
            }
            if pass.step().is_none() {
                break;
            }
            // incremental D equals fresh D on the tentative sides
            for x in (0..n).filter(|&x| !pass.is_locked(x)) {
                let fresh = brute_d(&w, pass.in_a(), x);
                assert!((pass.d()[x] - fresh).abs() < 1e-9, "seed {seed} vertex {x}");
            }
        }
        assert_eq!(pass.swaps().len(), n / 2);

        // t maximizes the prefix sums
        let (t, g_max) = pass.best_prefix().unwrap();
        let prefix: Vec<f64> = pass
            .swaps()
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.gain;
                Some(*acc)
            })
            .collect();
        assert!(prefix.iter().all(|&p| p <= g_max + 1e-12));
        assert!((prefix[t - 1] - g_max).abs() < 1e-12);
    }
}

#[test]
fn accepted_passes_reduce_cut_by_g_max() {
    for seed in 0..60u64 {
        let n = 4 + (seed as usize % 13);
        let g = random_graph(n, 0.4, 2000 + seed);
        let w = dense(&g);
        let costs = CostMatrix::from_graph(&g);
        let order: Vec<usize> = (0..n).collect();
        let start = seed_split(n, &order);
        let trace = refine(&costs, start.clone());
        let mut before = brute_cut(&w, &start);
        for pass in &trace.passes {
            let after = brute_cut(&w, &pass.in_a_after);
            if pass.accepted {
                assert!(after < before);
                assert!((before - after - pass.g_max).abs() < 1e-9);
            } else {
                assert!(pass.g_max <= 1e-12);
                assert_eq!(after, before);
            }
            before = after;
        }
        assert!(!trace.passes.last().unwrap().accepted);
        assert_eq!(compute_d(&costs, &trace.in_a).len(), n);
    }
}

#[test]
fn kl_never_beats_the_oracle_and_usually_matches() {
    let mut matches = 0;
    let total = 100;
    for seed in 0..total {
        let n = [4, 6, 8, 10][seed as usize % 4];
        let g = random_graph(n, 0.5, 3000 + seed);
        let kl = kl_bisect_with(&g, g.vertices(), &SeedSplit::Sorted).unwrap();
        let best = oracle_min_kcut(&g, 2, Balance::Algorithm1Sizes).unwrap();
        let best_cut = g.total_cut_weight(&best).unwrap();
        assert!(kl.cut_weight >= best_cut - 1e-9);
        if (kl.cut_weight - best_cut).abs() < 1e-9 {
            matches += 1;
        }
    }
    assert!(matches * 10 >= total * 9, "{matches}/{total}");
}

#[test]
fn clustered_placement_beats_random_balanced_placement() {
    let model = LatencyModel::default();
    let nodes: Vec<NodeId> = (0..3)
        .map(|i| NodeId::new(format!("n{i}")).unwrap())
        .collect();
    let mut wins = 0;
    for seed in 0..100u64 {
        let n = 12;
        let g = random_graph(n, 0.35, 4000 + seed);
        // window with one record per edge so the simulator sees the same pairs
        let records: Vec<MessageRecord> = g
            .edges()
            .iter()
            .map(|(pair, e)| MessageRecord {
                sender: pair.low().clone(),
                receiver: pair.high().clone(),
                bytes: (e.weight * 1000.0) as u64,
                count: 1,
                timestamp: 0,
            })
            .collect();
        let win = aggregate(&records, 0, 1, &g.vertices().iter().cloned().collect()).unwrap();
        let p = partition_k_with(&g, 3, &SeedSplit::Sorted)
            .unwrap()
            .partition;
        let ours = simulate(&assign_clusters(&p, &nodes).unwrap(), &win, &g, &model).unwrap();

        let mut shuffled = g.vertices().to_vec();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let random = Placement::round_robin(&shuffled, nodes.clone()).unwrap();
        let theirs = simulate(&random, &win, &g, &model).unwrap();
        assert_eq!(
            ours.inter_node_bytes + ours.intra_node_bytes,
            win.total_bytes()
        );
        if ours.cut_weight <= theirs.cut_weight {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins}/100");
}

proptest! {
    #[test]
    fn simulation_conserves_bytes_and_is_monotone(
        records in proptest::collection::vec(arb_record(), 1..40),
        nodes_of in proptest::collection::vec(0..3usize, 5),
        flip in 0..5usize,
    ) {
        let win = aggregate(&records, 0, 100, &BTreeSet::new()).unwrap();
        let g = build_graph(&win, &MetaMap::new(), &AffinityWeights::default()).unwrap();
        let nodes: Vec<NodeId> = (0..5).map(|i| NodeId::new(format!("n{i}")).unwrap()).collect();
        let assign = |spots: &[usize]| {
            Placement::new(
                nodes.clone(),
                SERVICES.iter().zip(spots).map(|(s, &n)| (sid(s), nodes[n].clone())).collect(),
            )
            .unwrap()
        };
        let pl = assign(&nodes_of);
        let model = LatencyModel::default();
        let r = simulate(&pl, &win, &g, &model).unwrap();
        prop_assert_eq!(r.inter_node_bytes + r.intra_node_bytes, win.total_bytes());

        // moving one service to a node of its own can only add remote pairs
        let mut isolated = nodes_of.clone();
        isolated[flip] = 4;
        let r2 = simulate(&assign(&isolated), &win, &g, &model).unwrap();
        prop_assert!(r2.est_mean_latency_ms.unwrap() >= r.est_mean_latency_ms.unwrap() - 1e-12);

        // plan round trip
        let target = assign(&isolated);
        let plan = plan_migration(&pl, &target).unwrap();
        prop_assert_eq!(plan.apply(&pl).unwrap(), target);
        prop_assert_eq!(plan.moves.len() + plan.unchanged_count, 5);
    }
}
