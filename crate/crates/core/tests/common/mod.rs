#![allow(dead_code)]

use rand::Rng;
use topicmine::candidates::TopicCandidate;
use topicmine::graph::{GraphKind, SimilarityGraph};

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Stationary distribution from `(I − αPᵀ)π = (1−α)/n · 1`, rows of zeros made uniform.
pub fn pagerank_direct(weights: &[Vec<f64>], alpha: f64) -> Vec<f64> {
    let n = weights.len();
    let p: Vec<Vec<f64>> = weights
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        })
        .collect();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (if i == j { 1.0 } else { 0.0 }) - alpha * p[j][i])
                .collect()
        })
        .collect();
    solve(a, vec![(1.0 - alpha) / n as f64; n])
}

/// Pairs covered by at least one candidate, with their graph weight and covering candidates.
pub fn covered_pairs(g: &SimilarityGraph, cands: &[TopicCandidate]) -> Vec<(f64, Vec<usize>)> {
    let mut map: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (k, c) in cands.iter().enumerate() {
        let m = c.members();
        for a in 0..m.len() {
            for b in a + 1..m.len() {
                map.entry((m[a], m[b])).or_default().push(k);
            }
        }
    }
    map.into_iter()
        .map(|((i, j), ks)| (g.weight(i, j), ks))
        .collect()
}

/// Σ (a log w − w) over covered pairs.
pub fn poisson_ll(pairs: &[(f64, Vec<usize>)], mu: &[f64]) -> f64 {
    pairs
        .iter()
        .map(|(a, ks)| {
            let w: f64 = ks.iter().map(|&k| mu[k]).sum();
            if *a > 0.0 {
                a * w.ln() - w
            } else {
                -w
            }
        })
        .sum()
}

pub fn random_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> SimilarityGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((i, j, rng.gen_range(0.01..=1.0)));
            }
        }
    }
    SimilarityGraph::from_edges(n, GraphKind::Mixed, edges).unwrap()
}

/// Random member set of size in `[lo, hi]` drawn from `0..n`.
pub fn random_set<R: Rng>(n: usize, lo: usize, hi: usize, rng: &mut R) -> Vec<usize> {
    let k = rng.gen_range(lo..=hi.min(n));
    let mut all: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut all[..], rng);
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

/// Reconstructed similarity of `n` pages covered by random overlapping weighted candidates.
pub fn random_topic_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; n]; n];
    let k = rng.gen_range(2..=6);
    for _ in 0..k {
        let mu = rng.gen_range(0.05..1.0);
        let members = random_set(n, (n / 3).max(2), n, rng);
        for &i in &members {
            for &j in &members {
                if i != j {
                    s[i][j] += mu;
                }
            }
        }
    }
    s
}
