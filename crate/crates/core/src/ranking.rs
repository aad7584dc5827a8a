//! Candidate weights by Poisson deconvolution and the interestingness order.
//!
//! Each candidate `C_k` contributes `μ_k` to every pair of its members. The
//! observed mixed-graph weight `a_ij` of a covered pair is modelled as Poisson with
//! mean `w_ij = Σ_k μ_k [i, j ∈ C_k]`. The weights maximize
//! `Σ_ij (a_ij log w_ij − w_ij)` over all pairs covered by at least one candidate
//! (absent edges observe `a_ij = 0`), using the multiplicative update
//!
//! ```text
//! μ_k ← μ_k · (Σ_{ij ∈ C_k} a_ij / w_ij) / |pairs(C_k)|
//! ```
//!
//! which keeps every weight nonnegative and never decreases the likelihood.

use std::collections::HashMap;

use crate::candidates::TopicCandidate;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

/// Floor for the modelled mean inside the update.
pub const MEAN_FLOOR: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Result of the deconvolution together with its convergence trace.
#[derive(Debug, Clone)]
pub struct PoissonFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood at the starting point and after every iteration.
    pub log_likelihood: Vec<f64>,
}

/// Covered pairs and their observations, shared by every iteration.
struct Design {
    observed: Vec<f64>,
    /// Observation indices covered by each candidate.
    cover: Vec<Vec<u32>>,
}

impl Design {
    fn build(g: &SimilarityGraph, candidates: &[TopicCandidate]) -> Result<Self> {
        let mut index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut observed = Vec::new();
        let mut cover = Vec::with_capacity(candidates.len());
        for (k, c) in candidates.iter().enumerate() {
            let m = c.members();
            if let Some(&last) = m.last() {
                if last >= g.n() {
                    return Err(Error::invalid(format!(
                        "candidate {k} references webpage {last} outside the graph (n = {})",
                        g.n()
                    )));
                }
            }
            let mut obs = Vec::with_capacity(c.pair_count());
            for (p, &i) in m.iter().enumerate() {
                for &j in &m[p + 1..] {
                    let key = (i as u32, j as u32);
                    let next = observed.len() as u32;
                    let o = *index.entry(key).or_insert_with(|| {
                        observed.push(g.weight(i, j));
                        next
                    });
                    obs.push(o);
                }
            }
            cover.push(obs);
        }
        if observed.iter().all(|&a| a == 0.0) {
            return Err(Error::invalid("no candidate covers any edge of the graph"));
        }
        Ok(Design { observed, cover })
    }

    fn means(&self, mu: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.observed.len()];
        for (k, obs) in self.cover.iter().enumerate() {
            for &o in obs {
                w[o as usize] += mu[k];
            }
        }
        w
    }

    fn log_likelihood(&self, w: &[f64]) -> f64 {
        self.observed
            .iter()
            .zip(w)
            .map(|(&a, &wij)| {
                let wij = wij.max(MEAN_FLOOR);
                if a > 0.0 {
                    a * wij.ln() - wij
                } else {
                    -wij
                }
            })
            .sum()
    }
}

/// Poisson log-likelihood of the graph's covered pairs under the given weights.
pub fn log_likelihood(g: &SimilarityGraph, candidates: &[TopicCandidate], weights: &[f64]) -> Result<f64> {
    if weights.len() != candidates.len() {
        return Err(Error::invalid("one weight per candidate required"));
    }
    let d = Design::build(g, candidates)?;
    Ok(d.log_likelihood(&d.means(weights)))
}

/// Estimates candidate weights; see the module docs for the model.
///
/// Stops when the largest weight change relative to the largest weight drops
/// below `tol`, or after `max_iter` updates.
pub fn estimate_weights(
    g: &SimilarityGraph,
    candidates: &[TopicCandidate],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    Ok(estimate_weights_traced(g, candidates, max_iter, tol)?.weights)
}

/// Same as [`estimate_weights`] but also returns the likelihood trace.
pub fn estimate_weights_traced(
    g: &SimilarityGraph,
    candidates: &[TopicCandidate],
    max_iter: usize,
    tol: f64,
) -> Result<PoissonFit> {
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let design = Design::build(g, candidates)?;
    let total_pairs: usize = design.cover.iter().map(Vec::len).sum();
    let total_obs: f64 = design.observed.iter().sum();
    let start = total_obs / total_pairs as f64;
    let mut mu: Vec<f64> = design
        .cover
        .iter()
        .map(|obs| if obs.is_empty() { 0.0 } else { start })
        .collect();

    let mut w = design.means(&mu);
    let mut trace = vec![design.log_likelihood(&w)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let ratio: Vec<f64> = design
            .observed
            .iter()
            .zip(&w)
            .map(|(&a, &wij)| a / wij.max(MEAN_FLOOR))
            .collect();
        let mut max_change: f64 = 0.0;
        let scale = mu.iter().cloned().fold(0.0, f64::max);
        for (k, obs) in design.cover.iter().enumerate() {
            if obs.is_empty() {
                continue;
            }
            let num: f64 = obs.iter().map(|&o| ratio[o as usize]).sum();
            let next = mu[k] * num / obs.len() as f64;
            max_change = max_change.max((next - mu[k]).abs());
            mu[k] = next;
        }
        w = design.means(&mu);
        trace.push(design.log_likelihood(&w));
        if scale == 0.0 || max_change / scale < tol {
            converged = true;
            break;
        }
    }
    Ok(PoissonFit {
        weights: mu,
        iterations,
        converged,
        log_likelihood: trace,
    })
}

/// One ranked candidate, remembering its index in the unranked input.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub source: usize,
    pub candidate: TopicCandidate,
}

impl RankedEntry {
    pub fn interestingness(&self) -> f64 {
        self.candidate.interestingness.unwrap_or(0.0)
    }
}

/// Candidates in descending interestingness, ties by original index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedTopicList {
    pub entries: Vec<RankedEntry>,
}

impl RankedTopicList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Member sets in rank order.
    pub fn member_sets(&self) -> Vec<Vec<usize>> {
        self.entries
            .iter()
            .map(|e| e.candidate.members().to_vec())
            .collect()
    }
}

/// Copies weights onto candidates.
pub fn assign_weights(candidates: &mut [TopicCandidate], weights: &[f64]) -> Result<()> {
    if candidates.len() != weights.len() {
        return Err(Error::invalid("one weight per candidate required"));
    }
    for (c, &w) in candidates.iter_mut().zip(weights) {
        c.weight = Some(w);
    }
    Ok(())
}

/// Sets `i_k = μ_k · |C_k|` on every candidate and returns them ranked.
pub fn rank(candidates: &[TopicCandidate]) -> Result<RankedTopicList> {
    let mut entries = Vec::with_capacity(candidates.len());
    for (k, c) in candidates.iter().enumerate() {
        let w = c
            .weight
            .ok_or_else(|| Error::invalid(format!("candidate {k} has no weight")))?;
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("candidate {k} has invalid weight {w}")));
        }
        let mut cand = c.clone();
        cand.interestingness = Some(w * c.len() as f64);
        entries.push(RankedEntry { source: k, candidate: cand });
    }
    // Stable sort keeps original order on ties.
    entries.sort_by(|a, b| b.interestingness().total_cmp(&a.interestingness()));
    Ok(RankedTopicList { entries })
}
