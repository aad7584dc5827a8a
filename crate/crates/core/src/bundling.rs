//! Windowed bundling of ranked fragments into coarse topics, and duplicate suppression.

use serde::{Deserialize, Serialize};

use crate::candidates::TopicCandidate;
use crate::error::{Error, Result};
use crate::ranking::RankedTopicList;
use crate::sets;

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_TAU: f64 = 0.4;

/// Union of a seed candidate with the candidates bundled into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseTopic {
    pub members: Vec<usize>,
    /// Indices of the bundled candidates in the unranked candidate list; the seed comes first.
    pub sources: Vec<usize>,
    /// Position of the seed in the ranked list.
    pub rank: usize,
}

impl CoarseTopic {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard(a: &TopicCandidate, b: &TopicCandidate) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("jaccard of an empty member set"));
    }
    Ok(sets::jaccard_sorted(a.members(), b.members()))
}

/// Bundling output plus the number of Jaccard evaluations it performed.
#[derive(Debug, Clone)]
pub struct BundleOutcome {
    pub topics: Vec<CoarseTopic>,
    pub comparisons: usize,
}

/// Bundles each unconsumed candidate with the next `window` candidates in rank order.
///
/// A follower joins when its Jaccard similarity with the seed's growing union is
/// at least `tau`. Joined candidates are consumed: they neither seed a topic nor
/// join another one. A single pass, so at most `K · window` comparisons.
pub fn bundle(ranked: &RankedTopicList, window: usize, tau: f64) -> Result<Vec<CoarseTopic>> {
    Ok(bundle_counted(ranked, window, tau)?.topics)
}

pub fn bundle_counted(ranked: &RankedTopicList, window: usize, tau: f64) -> Result<BundleOutcome> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let k_total = ranked.entries.len();
    let mut consumed = vec![false; k_total];
    let mut topics = Vec::new();
    let mut comparisons = 0;
    for k in 0..k_total {
        if consumed[k] {
            continue;
        }
        let seed = &ranked.entries[k];
        let mut members = seed.candidate.members().to_vec();
        let mut sources = vec![seed.source];
        let end = (k + window).min(k_total - 1);
        for j in (k + 1)..=end {
            if consumed[j] {
                continue;
            }
            let other = ranked.entries[j].candidate.members();
            comparisons += 1;
            if sets::jaccard_sorted(&members, other) >= tau {
                members = sets::union(&members, other);
                sources.push(ranked.entries[j].source);
                consumed[j] = true;
            }
        }
        consumed[k] = true;
        topics.push(CoarseTopic {
            members,
            sources,
            rank: k,
        });
    }
    Ok(BundleOutcome { topics, comparisons })
}

/// Greedy non-maximum suppression in rank order.
///
/// A topic is dropped when its Jaccard overlap with any already kept topic is
/// at least `overlap_thresh`.
pub fn nms_dedupe(coarse: Vec<CoarseTopic>, overlap_thresh: f64) -> Vec<CoarseTopic> {
    let mut kept: Vec<CoarseTopic> = Vec::new();
    for topic in coarse {
        let suppressed = kept
            .iter()
            .any(|k| sets::jaccard_sorted(&k.members, &topic.members) >= overlap_thresh);
        if !suppressed {
            kept.push(topic);
        }
    }
    kept
}
