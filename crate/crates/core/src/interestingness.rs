//! Webpage interestingness inside a coarse topic.
//!
//! The coarse topic is turned into a small weighted graph whose edge weights are
//! reconstructed from the weights of the candidates bundled into it. A random walk
//! with uniform teleportation on that graph has a unique stationary distribution,
//! computed by power iteration; its entries are the per-page interestingness scores.

use serde::{Deserialize, Serialize};

use crate::bundling::CoarseTopic;
use crate::candidates::TopicCandidate;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Dense reconstructed similarity over the pages of one coarse topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicGraph {
    /// Global webpage index of each local node, sorted.
    pub nodes: Vec<usize>,
    /// `weights[i][j]`: summed weight of the candidates containing both pages.
    pub weights: Vec<Vec<f64>>,
}

impl TopicGraph {
    /// Builds a topic graph from a dense symmetric nonnegative matrix with zero diagonal.
    pub fn from_dense(nodes: Vec<usize>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = nodes.len();
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("topic graph weights must be |nodes| x |nodes|"));
        }
        for i in 0..n {
            if weights[i][i] != 0.0 {
                return Err(Error::invalid("topic graph has a self-loop"));
            }
            for j in 0..n {
                let v = weights[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("invalid weight at ({i}, {j})")));
                }
                if v != weights[j][i] {
                    return Err(Error::invalid("topic graph weights must be symmetric"));
                }
            }
        }
        Ok(TopicGraph { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when the pages `i` and `j` (local indices) are connected.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[i][j] > 0.0
    }
}

/// Sums `μ_k` over every source candidate containing both pages.
pub fn reconstructed_similarity(topic: &CoarseTopic, candidates: &[TopicCandidate]) -> Result<TopicGraph> {
    let n = topic.members.len();
    let mut weights = vec![vec![0.0; n]; n];
    for &k in &topic.sources {
        let cand = candidates
            .get(k)
            .ok_or_else(|| Error::invalid(format!("source candidate {k} does not exist")))?;
        let mu = cand
            .weight
            .ok_or_else(|| Error::invalid(format!("candidate {k} has no weight")))?;
        let local: Vec<usize> = cand
            .members()
            .iter()
            .map(|p| {
                topic.members.binary_search(p).map_err(|_| {
                    Error::invalid(format!("candidate {k} member {p} is outside the coarse topic"))
                })
            })
            .collect::<Result<_>>()?;
        for (a, &i) in local.iter().enumerate() {
            for &j in &local[a + 1..] {
                weights[i][j] += mu;
                weights[j][i] += mu;
            }
        }
    }
    Ok(TopicGraph {
        nodes: topic.members.clone(),
        weights,
    })
}

/// Sparse row-stochastic matrix. Rows flagged as dangling are implicitly uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    dangling: Vec<bool>,
}

impl TransitionMatrix {
    /// Wraps an explicit dense matrix. Stochasticity is checked by [`pagerank`].
    pub fn from_dense(p: &[Vec<f64>]) -> Result<Self> {
        let n = p.len();
        let mut rows = Vec::with_capacity(n);
        for (i, r) in p.iter().enumerate() {
            if r.len() != n {
                return Err(Error::invalid("transition matrix must be square"));
            }
            let mut row = Vec::new();
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("invalid transition probability at ({i}, {j})")));
                }
                if v > 0.0 {
                    row.push((j, v));
                }
            }
            rows.push(row);
        }
        Ok(TransitionMatrix {
            rows,
            dangling: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_dangling(&self, i: usize) -> bool {
        self.dangling[i]
    }

    /// Row `i` as a dense vector.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let n = self.len();
        if self.dangling[i] {
            return vec![1.0 / n as f64; n];
        }
        let mut r = vec![0.0; n];
        for &(j, v) in &self.rows[i] {
            r[j] = v;
        }
        r
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row_dense(i)).collect()
    }

    fn row_sum(&self, i: usize) -> f64 {
        if self.dangling[i] {
            1.0
        } else {
            self.rows[i].iter().map(|e| e.1).sum()
        }
    }
}

/// `P_ij = S_ij / d_i`, with rows of isolated nodes replaced by uniform rows.
pub fn transition_matrix(tg: &TopicGraph) -> Result<TransitionMatrix> {
    let n = tg.len();
    let mut rows = Vec::with_capacity(n);
    let mut dangling = Vec::with_capacity(n);
    for (i, r) in tg.weights.iter().enumerate() {
        if r.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!("negative or non-finite weight in row {i}")));
        }
        let d: f64 = r.iter().sum();
        if d > 0.0 {
            rows.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(j, &v)| (j, v / d))
                    .collect(),
            );
            dangling.push(false);
        } else {
            rows.push(Vec::new());
            dangling.push(true);
        }
    }
    Ok(TransitionMatrix { rows, dangling })
}

/// Stationary distribution of the damped walk, with its convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestingnessVector {
    pub pi: Vec<f64>,
    pub iterations: usize,
    /// L1 distance between successive iterates.
    pub residuals: Vec<f64>,
}

impl InterestingnessVector {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Solves `π_j = α Σ_i π_i P_ij + (1 − α)/n` by power iteration from the uniform vector.
///
/// The teleport term is applied analytically, so the damped matrix is never formed.
/// Fails with [`Error::NotConverged`] when the L1 step is still `>= tol` after
/// `max_iter` iterations.
pub fn pagerank(p: &TransitionMatrix, alpha: f64, tol: f64, max_iter: usize) -> Result<InterestingnessVector> {
    let n = p.len();
    if n == 0 {
        return Err(Error::invalid("empty transition matrix"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tol must be positive and max_iter at least 1"));
    }
    for i in 0..n {
        let s = p.row_sum(i);
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
        }
    }

    let nf = n as f64;
    let jump = (1.0 - alpha) / nf;
    let mut pi = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    for it in 1..=max_iter {
        let mut dangling_mass = 0.0;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in p.rows.iter().enumerate() {
            if p.dangling[i] {
                dangling_mass += pi[i];
                continue;
            }
            for &(j, v) in row {
                next[j] += pi[i] * v;
            }
        }
        let spread = dangling_mass / nf;
        for x in next.iter_mut() {
            *x = alpha * (*x + spread) + jump;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let residual: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        residuals.push(residual);
        if residual < tol {
            return Ok(InterestingnessVector {
                pi,
                iterations: it,
                residuals,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: *residuals.last().unwrap_or(&f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted(c: &[usize], mu: f64) -> TopicCandidate {
        let mut t = TopicCandidate::new(c.to_vec()).unwrap();
        t.weight = Some(mu);
        t
    }

    #[test]
    fn single_source_fills_its_pairs() {
        let cands = vec![weighted(&[3, 5, 7], 0.3)];
        let topic = CoarseTopic {
            members: vec![3, 5, 7],
            sources: vec![0],
            rank: 0,
        };
        let tg = reconstructed_similarity(&topic, &cands).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(tg.weights[i][j], if i == j { 0.0 } else { 0.3 });
            }
        }
    }

    #[test]
    fn shared_pair_sums_weights() {
        let cands = vec![weighted(&[1, 2], 0.3), weighted(&[1, 2, 4], 0.2)];
        let topic = CoarseTopic {
            members: vec![1, 2, 4],
            sources: vec![0, 1],
            rank: 0,
        };
        let tg = reconstructed_similarity(&topic, &cands).unwrap();
        assert_eq!(tg.weights[0][1], 0.5);
        assert_eq!(tg.weights[0][2], 0.2);
    }

    #[test]
    fn unset_weight_is_an_error() {
        let cands = vec![TopicCandidate::new(vec![1, 2]).unwrap()];
        let topic = CoarseTopic {
            members: vec![1, 2],
            sources: vec![0],
            rank: 0,
        };
        assert!(reconstructed_similarity(&topic, &cands).is_err());
    }

    #[test]
    fn two_node_transition() {
        let tg = TopicGraph::from_dense(vec![0, 1], vec![vec![0.0, 0.4], vec![0.4, 0.0]]).unwrap();
        let p = transition_matrix(&tg).unwrap();
        assert_eq!(p.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn weighted_row_normalizes() {
        let tg = TopicGraph::from_dense(
            vec![0, 1, 2],
            vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 0.0], vec![3.0, 0.0, 0.0]],
        )
        .unwrap();
        let p = transition_matrix(&tg).unwrap();
        assert_eq!(p.row_dense(0), vec![0.0, 0.25, 0.75]);
    }

    #[test]
    fn isolated_node_gets_uniform_row() {
        let tg = TopicGraph::from_dense(
            vec![0, 1, 2],
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        let p = transition_matrix(&tg).unwrap();
        assert!(p.is_dangling(2));
        assert_eq!(p.row_dense(2), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn cycle_is_uniform() {
        let mut w = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            w[i][(i + 1) % 4] = 1.0;
            w[(i + 1) % 4][i] = 1.0;
        }
        let p = transition_matrix(&TopicGraph::from_dense((0..4).collect(), w).unwrap()).unwrap();
        let pi = pagerank(&p, 0.9, 1e-12, 200).unwrap();
        for v in pi.pi {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_alpha_is_uniform() {
        let p = TransitionMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let pi = pagerank(&p, 0.0, 1e-12, 10).unwrap();
        assert_eq!(pi.pi, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let p = TransitionMatrix::from_dense(&[vec![0.0, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(pagerank(&p, 0.9, 1e-9, 100).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let q = TransitionMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.9, 0.1, 0.0],
        ])
        .unwrap();
        let err = pagerank(&q, 0.99, 1e-15, 3).unwrap_err();
        assert!(err.is_convergence_failure());
    }
}
