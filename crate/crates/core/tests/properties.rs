mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use topicmine::bundling::{bundle, bundle_counted, nms_dedupe};
use topicmine::candidates::{cascade_candidates, TopicCandidate};
use topicmine::eval::{self, GroundTruth};
use topicmine::graph::{gaussian_affinity, knn_sparsify, mix_graphs, GraphKind, SimilarityGraph, SimilarityMatrix};
use topicmine::interestingness::{pagerank, transition_matrix, TopicGraph};
use topicmine::oracle;
use topicmine::ranking::{assign_weights, estimate_weights_traced, rank};
use topicmine::refining::{goodness, greedy_select};
use topicmine::sets;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(n: usize, density: f64, r: &mut ChaCha8Rng) -> SimilarityMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(density) {
                t.push((i, j, r.gen_range(0.01..=1.0)));
            }
        }
    }
    SimilarityMatrix::from_triplets(n, t).unwrap()
}

fn random_candidates(n: usize, k: usize, r: &mut ChaCha8Rng) -> Vec<TopicCandidate> {
    (0..k)
        .map(|_| TopicCandidate::new(random_set(n, 2, (n / 2).max(2), r)).unwrap())
        .collect()
}

fn weighted_candidates(n: usize, k: usize, r: &mut ChaCha8Rng) -> Vec<TopicCandidate> {
    let mut c = random_candidates(n, k, r);
    let w: Vec<f64> = (0..k).map(|_| r.gen_range(0.0..1.0)).collect();
    assign_weights(&mut c, &w).unwrap();
    c
}

fn symmetric_zero_diag(d: &[Vec<f64>]) -> bool {
    (0..d.len()).all(|i| d[i][i] == 0.0 && (0..d.len()).all(|j| d[i][j] == d[j][i]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_ops_keep_symmetry_and_range(seed in any::<u64>(), n in 3usize..25, k in 1usize..5) {
        let mut r = rng(seed);
        let m = random_matrix(n, 0.4, &mut r);
        let sigma2 = m.mean_squared_entry().unwrap_or(1.0);
        let aff = gaussian_affinity(&m, sigma2).unwrap();
        let dense = aff.to_dense();
        prop_assert!(symmetric_zero_diag(&dense));
        prop_assert!(dense.iter().flatten().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));

        let k = k.min(n - 1);
        let g = knn_sparsify(&aff, k, GraphKind::Visual).unwrap();
        let gd = g.to_dense();
        prop_assert!(symmetric_zero_diag(&gd));
        for (i, j, w) in g.edges() {
            prop_assert_eq!(w, aff.get(i, j));
        }
        for i in 0..n {
            prop_assert!(g.degree(i) >= k.min(aff.row(i).len()));
        }
    }

    #[test]
    fn mixing_is_commutative(seed in any::<u64>(), n in 2usize..20) {
        let mut r = rng(seed);
        let a = random_graph(n, 0.3, &mut r);
        let b = random_graph(n, 0.3, &mut r);
        let ab = mix_graphs(&a, &b).unwrap();
        let ba = mix_graphs(&b, &a).unwrap();
        prop_assert_eq!(ab.to_dense(), ba.to_dense());
        prop_assert!(symmetric_zero_diag(&ab.to_dense()));
    }

    #[test]
    fn cascade_nests_and_never_repeats(seed in any::<u64>(), n in 2usize..30) {
        let mut r = rng(seed);
        let g = random_graph(n, 0.2, &mut r);
        let thresholds = [0.2, 0.5, 0.8];
        let cands = cascade_candidates(&g, &thresholds).unwrap();
        let again = cascade_candidates(&g, &thresholds).unwrap();
        prop_assert_eq!(&cands, &again);
        for (a, c) in cands.iter().enumerate() {
            for d in &cands[a + 1..] {
                prop_assert_ne!(c.members(), d.members());
            }
        }
        // components at a higher threshold sit inside one at a lower threshold
        let low = cascade_candidates(&g, &[0.2]).unwrap();
        let high = cascade_candidates(&g, &[0.8]).unwrap();
        for h in &high {
            prop_assert!(low.iter().any(|l| sets::is_subset(h.members(), l.members())));
        }
    }

    #[test]
    fn poisson_likelihood_never_decreases(seed in any::<u64>(), n in 4usize..20, k in 1usize..6) {
        let mut r = rng(seed);
        let g = random_graph(n, 0.5, &mut r);
        let cands = random_candidates(n, k, &mut r);
        let total: f64 = covered_pairs(&g, &cands).iter().map(|p| p.0).sum();
        prop_assume!(total > 0.0);
        let fit = estimate_weights_traced(&g, &cands, 200, 1e-12).unwrap();
        for w in fit.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        prop_assert!(fit.weights.iter().all(|&m| m >= 0.0 && m.is_finite()));
    }

    #[test]
    fn poisson_weights_scale_with_the_data(seed in any::<u64>(), n in 4usize..15, k in 1usize..5, c in 0.1f64..0.99) {
        let mut r = rng(seed);
        let g = random_graph(n, 0.5, &mut r);
        let cands = random_candidates(n, k, &mut r);
        prop_assume!(covered_pairs(&g, &cands).iter().any(|p| p.0 > 0.0));
        let scaled = SimilarityGraph::from_edges(n, GraphKind::Mixed, g.edges().map(|(i, j, w)| (i, j, w * c)).collect::<Vec<_>>()).unwrap();
        let a = estimate_weights_traced(&g, &cands, 100, 1e-9).unwrap().weights;
        let b = estimate_weights_traced(&scaled, &cands, 100, 1e-9).unwrap().weights;
        let scale = a.iter().cloned().fold(0.0, f64::max).max(1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * c - y).abs() <= 1e-9 * scale, "{x} * {c} vs {y}");
        }
    }

    #[test]
    fn tiling_candidates_reconstruct_total_weight(seed in any::<u64>(), groups in 1usize..5) {
        // disjoint cliques, each one candidate: every covered pair belongs to exactly one candidate
        let mut r = rng(seed);
        let size = 4;
        let n = groups * size;
        let mut edges = Vec::new();
        let mut cands = Vec::new();
        for gi in 0..groups {
            let m: Vec<usize> = (gi * size..(gi + 1) * size).collect();
            for a in 0..size {
                for b in a + 1..size {
                    edges.push((m[a], m[b], r.gen_range(0.05..1.0)));
                }
            }
            cands.push(TopicCandidate::new(m).unwrap());
        }
        let g = SimilarityGraph::from_edges(n, GraphKind::Mixed, edges).unwrap();
        let fit = estimate_weights_traced(&g, &cands, 500, 1e-12).unwrap();
        let recon: f64 = cands.iter().zip(&fit.weights).map(|(c, m)| m * c.pair_count() as f64).sum();
        let total: f64 = g.edges().map(|e| e.2).sum();
        prop_assert!((recon - total).abs() < 1e-9 * total.max(1.0));
    }

    #[test]
    fn bundling_invariants(seed in any::<u64>(), k in 1usize..40, window in 0usize..12, tau in 0.05f64..1.0) {
        let mut r = rng(seed);
        let cands = weighted_candidates(30, k, &mut r);
        let ranked = rank(&cands).unwrap();
        let out = bundle_counted(&ranked, window, tau).unwrap();
        prop_assert!(out.comparisons <= k * window);
        for c in &ranked.entries {
            let holders = out.topics.iter().filter(|t| t.sources.contains(&c.source)).count();
            prop_assert_eq!(holders, 1);
        }
        for t in &out.topics {
            let seed_len = ranked.entries[t.rank].candidate.len();
            prop_assert!(t.len() >= seed_len);
            for &s in &t.sources {
                prop_assert!(sets::is_subset(cands[s].members(), &t.members));
            }
        }
        let thresh = 0.4;
        let kept = nms_dedupe(out.topics, thresh);
        for (a, x) in kept.iter().enumerate() {
            for y in &kept[a + 1..] {
                prop_assert!(sets::jaccard_sorted(&x.members, &y.members) < thresh);
            }
        }
    }

    #[test]
    fn pagerank_properties(seed in any::<u64>(), n in 1usize..40, alpha in 0.0f64..0.95) {
        let mut r = rng(seed);
        let w = random_topic_weights(n.max(2), &mut r);
        let n = w.len();
        let tg = TopicGraph::from_dense((0..n).collect(), w.clone()).unwrap();
        let p = transition_matrix(&tg).unwrap();
        let out = pagerank(&p, alpha, 1e-12, 2000).unwrap();
        let sum: f64 = out.pi.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let floor = (1.0 - alpha) / n as f64;
        prop_assert!(out.pi.iter().all(|&x| x > floor || (alpha == 0.0 && x >= floor - 1e-15)));
        for rs in out.residuals.windows(2) {
            if rs[0] > 1e-10 {
                prop_assert!(rs[1] <= alpha * rs[0] * (1.0 + 1e-6) + 1e-14, "{} -> {}", rs[0], rs[1]);
            }
        }

        // relabel nodes by a random permutation
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut r);
        let wp: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| w[perm[i]][perm[j]]).collect()).collect();
        let pp = transition_matrix(&TopicGraph::from_dense((0..n).collect(), wp).unwrap()).unwrap();
        let outp = pagerank(&pp, alpha, 1e-12, 2000).unwrap();
        for i in 0..n {
            prop_assert!((outp.pi[i] - out.pi[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_trace_properties(seed in any::<u64>(), n in 1usize..14) {
        let mut r = rng(seed);
        let inst = oracle::random_instance(n, 10.0, &mut r);
        let trace = greedy_select(&inst.pi, &inst.d, 2.0).unwrap();
        let mut sorted = trace.selection_order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let mut acc = 0.0;
        for t in 0..n {
            acc += trace.gains[t];
            let g = goodness(&trace.selection_order[..=t], &inst.pi, &inst.d, 2.0).unwrap();
            prop_assert!((acc - g).abs() <= 1e-12, "prefix {t}: {acc} vs {g}");
        }
        if n <= 10 {
            let opt = oracle::brute_force_all_sizes(&inst.pi, &inst.d, 2.0).unwrap();
            for k in 1..=n {
                let g = goodness(&trace.selection_order[..k], &inst.pi, &inst.d, 2.0).unwrap();
                prop_assert!(opt[k] >= g - 1e-12);
            }
        }
    }

    #[test]
    fn normalized_regime_keeps_drops_in_unit_interval(seed in any::<u64>(), n in 2usize..16) {
        let mut r = rng(seed);
        let inst = oracle::random_instance(n, 10.0, &mut r);
        let Some(d) = inst.d.normalized() else { return Ok(()); };
        let trace = greedy_select(&inst.pi, &d, 2.0).unwrap();
        for &delta in &trace.deltas {
            prop_assert!((0.0..=1.0).contains(&delta), "{delta}");
        }
        for w in trace.gains.windows(2) {
            prop_assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
    }

    #[test]
    fn metric_properties(seed in any::<u64>(), k in 1usize..25) {
        let mut r = rng(seed);
        let truth = GroundTruth::new((0..4).map(|_| random_set(40, 3, 10, &mut r)).collect(), 40).unwrap();
        let dets: Vec<Vec<usize>> = (0..k).map(|_| random_set(40, 1, 12, &mut r)).collect();
        let top = eval::top10_f1_vs_ndt(&dets, &truth, 30).unwrap();
        let acc = eval::accuracy_vs_fppt(&dets, &truth).unwrap();
        for w in top.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
        for w in acc.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
        prop_assert!(top.iter().chain(acc.iter().map(|p| (0, p.1)).collect::<Vec<_>>().iter()).all(|p| (0.0..=1.0).contains(&p.1)));

        let (a, b) = (&dets[0], &truth.topics[0]);
        prop_assert_eq!(eval::nir(a, b).unwrap(), eval::nir(b, a).unwrap());
        prop_assert_eq!(eval::precision(a, b).unwrap(), eval::recall(b, a).unwrap());
        prop_assert!((eval::f1(a, b).unwrap() - eval::f1(b, a).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn f1_swap_exchanges_precision_and_recall() {
    let (a, b) = ([1, 2, 3, 4, 5, 6], [1, 2]);
    assert_ne!(eval::precision(&a, &b).unwrap(), eval::precision(&b, &a).unwrap());
    assert_eq!(eval::precision(&a, &b).unwrap(), eval::recall(&b, &a).unwrap());
    assert_eq!(eval::f1(&a, &b).unwrap(), eval::f1(&b, &a).unwrap());
}

#[test]
fn bundling_is_deterministic() {
    let mut r = rng(42);
    let cands = weighted_candidates(30, 25, &mut r);
    let ranked = rank(&cands).unwrap();
    assert_eq!(bundle(&ranked, 5, 0.3).unwrap(), bundle(&ranked, 5, 0.3).unwrap());
}
