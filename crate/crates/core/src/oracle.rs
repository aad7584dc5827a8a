//! Exhaustive references for the refinement objective on small topics.
//!
//! These are deliberately naive: subsets are enumerated by bitmask and every
//! objective is evaluated from its definition, independent of the incremental
//! bookkeeping in [`crate::refining::greedy_select`].

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::refining::DissimilarityMatrix;

/// Largest topic the exhaustive search accepts.
pub const MAX_ORACLE_N: usize = 20;
/// Slack allowed before a property check counts a violation.
pub const CHECK_TOL: f64 = 1e-12;

fn members_of(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Goodness straight from its definition (ordered-pair double sum).
pub fn goodness_naive(sel: &[usize], pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> f64 {
    let mut lin = 0.0;
    let mut quad = 0.0;
    for &i in sel {
        lin += pi[i];
        for &j in sel {
            quad += pi[i] * d.get(i, j) * pi[j];
        }
    }
    lambda * lin - quad
}

/// `Σ_ij (I_i π_i) S_ij (I_j π_j)`, the quadratic integer program the goodness approximates.
pub fn quadratic_naive(sel: &[usize], pi: &[f64], s: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for &i in sel {
        for &j in sel {
            v += pi[i] * s[i][j] * pi[j];
        }
    }
    v
}

fn check_size(n: usize, pi: &[f64], d: &DissimilarityMatrix) -> Result<()> {
    if n > MAX_ORACLE_N {
        return Err(Error::invalid(format!(
            "oracle refuses n = {n} (limit {MAX_ORACLE_N})"
        )));
    }
    if pi.len() != d.len() {
        return Err(Error::invalid("interestingness and dissimilarity sizes differ"));
    }
    Ok(())
}

/// Best size-`k` subset by goodness. Ties go to the lexicographically smallest set.
pub fn brute_force_subset(pi: &[f64], d: &DissimilarityMatrix, lambda: f64, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = pi.len();
    check_size(n, pi, d)?;
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let sel = members_of(mask, n);
        let v = goodness_naive(&sel, pi, d, lambda);
        let better = match &best {
            None => true,
            Some((bs, bv)) => v > *bv || (v == *bv && sel < *bs),
        };
        if better {
            best = Some((sel, v));
        }
    }
    Ok(best.expect("at least one subset of every size k <= n"))
}

/// Optimal goodness for every cardinality `0..=n` in one enumeration.
pub fn brute_force_all_sizes(pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> Result<Vec<f64>> {
    let n = pi.len();
    check_size(n, pi, d)?;
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        let v = goodness_naive(&members_of(mask, n), pi, d, lambda);
        if v > best[k] {
            best[k] = v;
        }
    }
    Ok(best)
}

/// Best size-`k` subset of the quadratic program `Σ (I_i π_i) S_ij (I_j π_j)`.
pub fn brute_force_quadratic(pi: &[f64], s: &[Vec<f64>], k: usize) -> Result<(Vec<usize>, f64)> {
    let n = pi.len();
    if n > MAX_ORACLE_N || s.len() != n {
        return Err(Error::invalid("quadratic oracle needs n <= 20 and a matching matrix"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let sel = members_of(mask, n);
        let v = quadratic_naive(&sel, pi, s);
        if best.as_ref().map_or(true, |(bs, bv)| v > *bv || (v == *bv && sel < *bs)) {
            best = Some((sel, v));
        }
    }
    Ok(best.expect("k <= n"))
}

/// Outcome of a sampled property check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub check: &'static str,
    pub trials: usize,
    pub violations: usize,
    /// Smallest observed slack; negative values are violations beyond rounding.
    pub min_slack: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.min_slack >= -CHECK_TOL
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} trials={} violations={} min_slack={:.6e} status={}",
            self.check,
            self.trials,
            self.violations,
            self.min_slack,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

fn gain_naive(x: usize, sel: &[usize], pi: &[f64], d: &DissimilarityMatrix, lambda: f64) -> f64 {
    let mut with = sel.to_vec();
    with.push(x);
    goodness_naive(&with, pi, d, lambda) - goodness_naive(sel, pi, d, lambda)
}

/// Samples `P1 ⊆ P2` and `x ∉ P2` and records `Δ(x|P1) − Δ(x|P2)`.
pub fn check_submodularity<R: Rng>(
    pi: &[f64],
    d: &DissimilarityMatrix,
    lambda: f64,
    trials: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    let n = pi.len();
    if trials == 0 {
        return Err(Error::invalid("at least one trial required"));
    }
    if n < 1 || pi.len() != d.len() {
        return Err(Error::invalid("instance must have matching nonempty pi and D"));
    }
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        order.shuffle(rng);
        let x = order[0];
        let rest = &order[1..];
        let p2_len = rng.gen_range(0..=rest.len());
        let p2 = &rest[..p2_len];
        let p1_len = rng.gen_range(0..=p2_len);
        let p1 = &p2[..p1_len];
        let slack = gain_naive(x, p1, pi, d, lambda) - gain_naive(x, p2, pi, d, lambda);
        if slack < -CHECK_TOL {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
    }
    Ok(OracleReport {
        check: "submodularity",
        trials,
        violations,
        min_slack,
    })
}

/// Samples disjoint `P1`, `P2` and records `g(P2 ∪ P1) − g(P2)`.
///
/// Requires `D` normalized to unit total mass and `π` a probability vector.
pub fn check_monotonicity<R: Rng>(
    pi: &[f64],
    d_normalized: &DissimilarityMatrix,
    lambda: f64,
    trials: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial required"));
    }
    if pi.len() != d_normalized.len() || pi.is_empty() {
        return Err(Error::invalid("instance must have matching nonempty pi and D"));
    }
    if (d_normalized.total() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "dissimilarity must sum to 1, sums to {}",
            d_normalized.total()
        )));
    }
    if pi.iter().any(|&p| p < 0.0) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("interestingness must be a probability vector"));
    }
    let n = pi.len();
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        for i in 0..n {
            match rng.gen_range(0..3) {
                0 => p1.push(i),
                1 => p2.push(i),
                _ => {}
            }
        }
        let mut both = p2.clone();
        both.extend_from_slice(&p1);
        let slack = goodness_naive(&both, pi, d_normalized, lambda) - goodness_naive(&p2, pi, d_normalized, lambda);
        if slack < -CHECK_TOL {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
    }
    Ok(OracleReport {
        check: "monotonicity",
        trials,
        violations,
        min_slack,
    })
}

/// A random refinement instance drawn along the production path.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pi: Vec<f64>,
    /// Reconstructed similarity the dissimilarity was derived from.
    pub similarity: Vec<Vec<f64>>,
    pub d: DissimilarityMatrix,
}

/// Draws `π` from a flat Dirichlet and `D = exp(−S²/bandwidth)`, where `S` sums
/// random weights over a few random overlapping candidates.
pub fn random_instance<R: Rng>(n: usize, bandwidth: f64, rng: &mut R) -> Instance {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let pi: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let mut s = vec![vec![0.0; n]; n];
    let n_cands = rng.gen_range(1..=4);
    for _ in 0..n_cands {
        let mu: f64 = rng.gen_range(0.05..1.0);
        let members: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                s[i][j] += mu;
                s[j][i] += mu;
            }
        }
    }
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { (-(s[i][j] * s[i][j]) / bandwidth).exp() })
                .collect()
        })
        .collect();
    Instance {
        pi,
        similarity: s,
        d: DissimilarityMatrix::from_dense(d).expect("kernel output is symmetric and finite"),
    }
}
