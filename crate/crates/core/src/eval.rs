//! Scoring ranked detections against ground-truth topics.
//!
//! Two protocols: the mean F1 of the ten best-matched detections as a function
//! of the number of detections considered (NDT), and detection accuracy as a
//! function of false positives per successfully detected topic (FPPT).
//!
//! Matching is greedy in detection rank order and each ground-truth topic can be
//! claimed once.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::candidates::load_candidates;
use crate::error::{Error, Result};
use crate::sets;

/// NIR above this value counts as a successful detection.
pub const NIR_SUCCESS: f64 = 0.5;
/// Number of matched detections averaged by the top-10 protocol.
pub const TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub topics: Vec<Vec<usize>>,
    pub n: usize,
}

impl GroundTruth {
    pub fn new(topics: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(topics.len());
        for (t, topic) in topics.into_iter().enumerate() {
            if topic.is_empty() {
                return Err(Error::invalid(format!("ground-truth topic {t} is empty")));
            }
            if let Some(&bad) = topic.iter().find(|&&p| p >= n) {
                return Err(Error::invalid(format!("ground-truth topic {t} has index {bad} >= {n}")));
            }
            out.push(sets::normalize(topic));
        }
        Ok(GroundTruth { topics: out, n })
    }

    /// Reads the candidate line format. Without `n`, it is one past the largest index.
    pub fn read<R: BufRead>(reader: R, n: Option<usize>) -> Result<Self> {
        let cands = load_candidates(reader, n)?;
        let topics: Vec<Vec<usize>> = cands.into_iter().map(|c| c.members().to_vec()).collect();
        let n = n.unwrap_or_else(|| topics.iter().flatten().max().map_or(0, |m| m + 1));
        GroundTruth::new(topics, n)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}

fn nonempty(a: &[usize], what: &str) -> Result<Vec<usize>> {
    if a.is_empty() {
        return Err(Error::invalid(format!("{what} set is empty")));
    }
    Ok(sets::normalize(a.to_vec()))
}

fn f1_sorted(d: &[usize], g: &[usize]) -> f64 {
    let inter = sets::intersection_len(d, g);
    if inter == 0 {
        return 0.0;
    }
    let precision = inter as f64 / d.len() as f64;
    let recall = inter as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// `|D∩G| / |D|`.
pub fn precision(detected: &[usize], truth: &[usize]) -> Result<f64> {
    let d = nonempty(detected, "detected")?;
    let g = nonempty(truth, "ground-truth")?;
    Ok(sets::intersection_len(&d, &g) as f64 / d.len() as f64)
}

/// `|D∩G| / |G|`.
pub fn recall(detected: &[usize], truth: &[usize]) -> Result<f64> {
    precision(truth, detected)
}

/// Harmonic mean of [`precision`] and [`recall`]. Swapping the arguments swaps
/// those two, so the value itself is symmetric.
pub fn f1(detected: &[usize], truth: &[usize]) -> Result<f64> {
    let d = nonempty(detected, "detected")?;
    let g = nonempty(truth, "ground-truth")?;
    Ok(f1_sorted(&d, &g))
}

/// Normalized intersected ratio `|D∩G| / |D∪G|`.
pub fn nir(detected: &[usize], truth: &[usize]) -> Result<f64> {
    let d = nonempty(detected, "detected")?;
    let g = nonempty(truth, "ground-truth")?;
    Ok(sets::jaccard_sorted(&d, &g))
}

/// Strictly above [`NIR_SUCCESS`].
pub fn is_success(nir: f64) -> bool {
    nir > NIR_SUCCESS
}

fn sorted_detections(ranked: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    ranked
        .iter()
        .map(|d| nonempty(d, "detected"))
        .collect()
}

/// Best unclaimed truth topic for a detection under `score`, ties to the lower index.
fn best_unclaimed(d: &[usize], truth: &GroundTruth, claimed: &[bool], score: fn(&[usize], &[usize]) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (t, g) in truth.topics.iter().enumerate() {
        if claimed[t] {
            continue;
        }
        let s = score(d, g);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((t, s));
        }
    }
    best
}

/// F1 of each detection's greedy match, `None` for unmatched detections.
fn matched_f1(ranked: &[Vec<usize>], truth: &GroundTruth) -> Vec<Option<f64>> {
    let mut claimed = vec![false; truth.len()];
    ranked
        .iter()
        .map(|d| match best_unclaimed(d, truth, &claimed, f1_sorted) {
            Some((t, s)) if s > 0.0 => {
                claimed[t] = true;
                Some(s)
            }
            _ => None,
        })
        .collect()
}

/// `(NDT, mean top-10 F1)` for NDT = 1..=max_ndt.
///
/// At each cutoff the F1 values of the matched detections among the first NDT
/// are sorted, the best ten summed, and the sum divided by `min(10, |truth|)`.
pub fn top10_f1_vs_ndt(ranked: &[Vec<usize>], truth: &GroundTruth, max_ndt: usize) -> Result<Vec<(usize, f64)>> {
    let ranked = sorted_detections(ranked)?;
    let matches = matched_f1(&ranked, truth);
    let denom = TOP_N.min(truth.len()).max(1) as f64;
    let mut scores: Vec<f64> = Vec::new();
    let mut curve = Vec::with_capacity(max_ndt);
    for ndt in 1..=max_ndt {
        if let Some(Some(s)) = matches.get(ndt - 1) {
            scores.push(*s);
            scores.sort_by(|a, b| b.total_cmp(a));
            scores.truncate(TOP_N);
        }
        curve.push((ndt, scores.iter().sum::<f64>() / denom));
    }
    Ok(curve)
}

/// Raw `(FPPT, accuracy)` after each detection in rank order.
pub fn accuracy_trace(ranked: &[Vec<usize>], truth: &GroundTruth) -> Result<Vec<(f64, f64)>> {
    let ranked = sorted_detections(ranked)?;
    let mut claimed = vec![false; truth.len()];
    let (mut successes, mut false_pos) = (0usize, 0usize);
    let total = truth.len().max(1) as f64;
    let mut trace = Vec::with_capacity(ranked.len());
    for d in &ranked {
        match best_unclaimed(d, truth, &claimed, sets::jaccard_sorted) {
            Some((t, r)) if is_success(r) => {
                claimed[t] = true;
                successes += 1;
            }
            _ => false_pos += 1,
        }
        trace.push((
            false_pos as f64 / successes.max(1) as f64,
            successes as f64 / total,
        ));
    }
    Ok(trace)
}

/// Accuracy on the integer FPPT grid `0..=ceil(max observed FPPT)`: the best
/// accuracy reached at any point of the walk whose FPPT does not exceed the grid value.
pub fn accuracy_vs_fppt(ranked: &[Vec<usize>], truth: &GroundTruth) -> Result<Vec<(f64, f64)>> {
    let trace = accuracy_trace(ranked, truth)?;
    let max_x = trace.iter().map(|p| p.0).fold(0.0, f64::max).ceil() as usize;
    Ok((0..=max_x)
        .map(|x| {
            let x = x as f64;
            let acc = trace
                .iter()
                .filter(|p| p.0 <= x)
                .map(|p| p.1)
                .fold(0.0, f64::max);
            (x, acc)
        })
        .collect())
}

/// Reads a value off a non-decreasing step curve: the last point with `x <= at`.
pub fn curve_value_at(curve: &[(f64, f64)], at: f64) -> f64 {
    curve
        .iter()
        .take_while(|p| p.0 <= at)
        .last()
        .map_or(0.0, |p| p.1)
}

/// Both protocol curves for one ranked list of detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub top10_f1_curve: Vec<(usize, f64)>,
    pub accuracy_fppt_curve: Vec<(f64, f64)>,
}

impl EvaluationReport {
    pub fn accuracy_at(&self, fppt: f64) -> f64 {
        curve_value_at(&self.accuracy_fppt_curve, fppt)
    }
}

pub fn evaluate(ranked: &[Vec<usize>], truth: &GroundTruth, max_ndt: usize) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        top10_f1_curve: top10_f1_vs_ndt(ranked, truth, max_ndt)?,
        accuracy_fppt_curve: accuracy_vs_fppt(ranked, truth)?,
    })
}

/// Writes a curve as CSV with header `x,y`.
pub fn write_curve_csv<W: Write, X: std::fmt::Display>(points: &[(X, f64)], mut w: W) -> Result<()> {
    writeln!(w, "x,y")?;
    for (x, y) in points {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}
