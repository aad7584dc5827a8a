//! Refinement of a coarse topic by greedy maximization of the goodness function
//!
//! ```text
//! g(P) = λ Σ_{i∈P} π_i − Σ_{i,j∈P} π_i D_ij π_j
//! ```
//!
//! where `π` is the page interestingness and `D` a dissimilarity derived from the
//! reconstructed similarity. `g` is submodular for any `λ > 0`, and monotone when
//! `λ >= 2`, `Σ π = 1` and `Σ D = 1`, so the greedy prefix of every size is within
//! `1 − 1/e` of the best subset of that size.
//!
//! The greedy pass orders all pages. The refined topic is the prefix up to the
//! step whose relative gain drop `(g^t − g^{t+1}) / g^t` peaks, which is where the
//! first uninteresting page enters.

use serde::{Deserialize, Serialize};

use crate::bundling::CoarseTopic;
use crate::candidates::TopicCandidate;
use crate::error::{Error, Result};
use crate::interestingness::{self, reconstructed_similarity, transition_matrix, TopicGraph};

pub const DEFAULT_BANDWIDTH: f64 = 10.0;
pub const DEFAULT_LAMBDA: f64 = 2.0;
pub const DEFAULT_MARGIN: f64 = 0.1;

/// Dense symmetric pairwise dissimilarity with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    entries: Vec<Vec<f64>>,
}

impl DissimilarityMatrix {
    /// Wraps an explicit matrix. It must be square, finite and symmetric; the
    /// diagonal is forced to zero. Entries are otherwise unchecked so that invariant
    /// probes can feed out-of-range values.
    pub fn from_dense(mut entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = entries.len();
        for i in 0..n {
            if entries[i].len() != n {
                return Err(Error::invalid("dissimilarity must be square"));
            }
            entries[i][i] = 0.0;
        }
        for i in 0..n {
            for j in 0..n {
                if !entries[i][j].is_finite() {
                    return Err(Error::invalid(format!("non-finite dissimilarity at ({i}, {j})")));
                }
                if entries[i][j] != entries[j][i] {
                    return Err(Error::invalid("dissimilarity must be symmetric"));
                }
            }
        }
        Ok(DissimilarityMatrix { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }

    /// Rescaled copy whose entries sum to one. `None` when the total is not positive.
    pub fn normalized(&self) -> Option<Self> {
        let t = self.total();
        (t > 0.0).then(|| DissimilarityMatrix {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|v| v / t).collect())
                .collect(),
        })
    }
}

/// `D_ij = exp(−S_ij² / bandwidth)` off the diagonal, zero on it.
pub fn dissimilarity(tg: &TopicGraph, bandwidth: f64) -> Result<DissimilarityMatrix> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let entries = tg
        .weights
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &s)| if i == j { 0.0 } else { (-(s * s) / bandwidth).exp() })
                .collect()
        })
        .collect();
    Ok(DissimilarityMatrix { entries })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be positive, got {lambda}")))
    }
}

fn check_shapes(pi: &[f64], d: &DissimilarityMatrix) -> Result<()> {
    if pi.len() != d.len() {
        return Err(Error::invalid(format!(
            "interestingness has {} entries, dissimilarity is {}x{}",
            pi.len(),
            d.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Goodness of a selection; the quadratic term runs over ordered pairs.
pub fn goodness(selection: &[usize], pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_shapes(pi, d)?;
    let mut seen = vec![false; pi.len()];
    for &i in selection {
        if i >= pi.len() {
            return Err(Error::invalid(format!("index {i} outside the topic")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("index {i} selected twice")));
        }
    }
    let linear: f64 = selection.iter().map(|&i| pi[i]).sum();
    let mut quad = 0.0;
    for &i in selection {
        for &j in selection {
            quad += pi[i] * d.get(i, j) * pi[j];
        }
    }
    Ok(lambda * linear - quad)
}

/// `g(P ∪ {p}) − g(P)`.
pub fn marginal_gain(p: usize, selection: &[usize], pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_shapes(pi, d)?;
    if p >= pi.len() || selection.iter().any(|&i| i >= pi.len()) {
        return Err(Error::invalid("index outside the topic"));
    }
    if selection.contains(&p) {
        return Err(Error::invalid(format!("page {p} is already selected")));
    }
    let into: f64 = selection.iter().map(|&i| pi[i] * d.get(i, p) * pi[p]).sum();
    let out_of: f64 = selection.iter().map(|&j| pi[p] * d.get(p, j) * pi[j]).sum();
    Ok(lambda * pi[p] - (into + out_of))
}

/// Full greedy ordering of a topic's pages with its gain trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    /// Local page indices in the order they were selected.
    pub selection_order: Vec<usize>,
    /// Winning marginal gain at each step.
    pub gains: Vec<f64>,
    /// Relative drop `(g^t − g^{t+1}) / g^t`, recorded while `g^t > 0`.
    pub deltas: Vec<f64>,
}

/// Selects every page greedily by marginal gain (ties to the lower index).
pub fn greedy_select(pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> Result<GreedyTrace> {
    check_lambda(lambda)?;
    check_shapes(pi, d)?;
    let n = pi.len();
    // penalty[p] = Σ_{i∈P} π_i (D_ip + D_pi)
    let mut penalty = vec![0.0; n];
    let mut taken = vec![false; n];
    let mut selection_order = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for p in (0..n).filter(|&p| !taken[p]) {
            let gain = lambda * pi[p] - pi[p] * penalty[p];
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((p, gain));
            }
        }
        let (m, gain) = best.expect("an unselected page remains");
        taken[m] = true;
        selection_order.push(m);
        gains.push(gain);
        let row = &d.rows()[m];
        for p in 0..n {
            penalty[p] += pi[m] * (row[p] + d.get(p, m));
        }
    }
    let deltas = relative_drops(&gains);
    Ok(GreedyTrace {
        selection_order,
        gains,
        deltas,
    })
}

/// Relative gain drops, truncated at the first non-positive gain.
pub fn relative_drops(gains: &[f64]) -> Vec<f64> {
    gains
        .windows(2)
        .take_while(|w| w[0] > 0.0)
        .map(|w| (w[0] - w[1]) / w[0])
        .collect()
}

/// Index of the cut: the earliest step whose drop is within `margin` of the largest.
///
/// With `margin = 0` this is the first maximizer.
pub fn cut_point(deltas: &[f64], margin: f64) -> Result<usize> {
    if deltas.is_empty() {
        return Err(Error::invalid("empty relative-change trace"));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::invalid(format!("margin must be nonnegative, got {margin}")));
    }
    let peak = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(deltas
        .iter()
        .position(|&v| v >= peak - margin)
        .expect("the peak itself qualifies"))
}

/// Parameters of the per-topic refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    pub alpha: f64,
    pub pr_tol: f64,
    pub pr_max_iter: usize,
    pub bandwidth: f64,
    pub lambda: f64,
    pub margin: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            alpha: interestingness::DEFAULT_ALPHA,
            pr_tol: interestingness::DEFAULT_TOL,
            pr_max_iter: interestingness::DEFAULT_MAX_ITER,
            bandwidth: DEFAULT_BANDWIDTH,
            lambda: DEFAULT_LAMBDA,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// A refined topic with everything needed to audit how it was cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedTopic {
    /// Rank of the coarse topic this was refined from.
    pub rank: usize,
    pub sources: Vec<usize>,
    /// Global indices of the coarse topic's pages; local indices refer to this list.
    pub nodes: Vec<usize>,
    pub pi: Vec<f64>,
    pub selection_order: Vec<usize>,
    pub gains: Vec<f64>,
    pub deltas: Vec<f64>,
    pub cut_index: usize,
    /// Kept pages (global indices, sorted).
    pub members: Vec<usize>,
    /// Set when the topic was too small to refine and passed through unchanged.
    pub bypassed: bool,
}

/// Runs interestingness, greedy selection and the cut on one coarse topic.
///
/// Topics with fewer than three pages pass through unchanged.
pub fn refine_topic(topic: &CoarseTopic, candidates: &[TopicCandidate], params: &RefineParams) -> Result<RefinedTopic> {
    let tg = reconstructed_similarity(topic, candidates)?;
    let p = transition_matrix(&tg)?;
    let pi = interestingness::pagerank(&p, params.alpha, params.pr_tol, params.pr_max_iter)?.pi;
    let n = tg.len();
    if n <= 2 {
        return Ok(RefinedTopic {
            rank: topic.rank,
            sources: topic.sources.clone(),
            nodes: tg.nodes.clone(),
            pi,
            selection_order: (0..n).collect(),
            gains: Vec::new(),
            deltas: Vec::new(),
            cut_index: n.saturating_sub(1),
            members: tg.nodes,
            bypassed: true,
        });
    }
    let d = dissimilarity(&tg, params.bandwidth)?;
    let trace = greedy_select(&pi, &d, params.lambda)?;
    let cut_index = if trace.deltas.is_empty() {
        0
    } else {
        cut_point(&trace.deltas, params.margin)?
    };
    let mut members: Vec<usize> = trace.selection_order[..=cut_index]
        .iter()
        .map(|&l| tg.nodes[l])
        .collect();
    members.sort_unstable();
    Ok(RefinedTopic {
        rank: topic.rank,
        sources: topic.sources.clone(),
        nodes: tg.nodes,
        pi,
        selection_order: trace.selection_order,
        gains: trace.gains,
        deltas: trace.deltas,
        cut_index,
        members,
        bypassed: false,
    })
}
