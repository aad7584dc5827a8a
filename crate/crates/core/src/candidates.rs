//! Multi-granularity topic candidates.
//!
//! Candidates come either from [`cascade_candidates`], which takes the connected
//! components of the mixed graph at a ladder of edge-weight thresholds, or from an
//! external generator through the line-oriented candidate file format
//! ([`load_candidates`] / [`save_candidates`]).

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::sets;

/// A hypothesized topic: a set of webpages plus the scores assigned by ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCandidate {
    members: Vec<usize>,
    pub weight: Option<f64>,
    pub interestingness: Option<f64>,
}

impl TopicCandidate {
    /// Creates a candidate from webpage indices. Duplicates are rejected.
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("empty candidate"));
        }
        let len = members.len();
        let members = sets::normalize(members);
        if members.len() != len {
            return Err(Error::invalid("duplicate webpage index in candidate"));
        }
        Ok(TopicCandidate {
            members,
            weight: None,
            interestingness: None,
        })
    }

    /// Sorted member indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, page: usize) -> bool {
        self.members.binary_search(&page).is_ok()
    }

    /// Number of unordered member pairs, i.e. the off-diagonal support of `c cᵀ`.
    pub fn pair_count(&self) -> usize {
        let m = self.members.len();
        m * (m.saturating_sub(1)) / 2
    }
}

/// Connected components of the mixed graph at each threshold, deduplicated.
///
/// Singleton components are dropped. Output is ordered by threshold, then by
/// smallest member index; a member set already emitted at a lower threshold is
/// not repeated.
pub fn cascade_candidates(g: &SimilarityGraph, thresholds: &[f64]) -> Result<Vec<TopicCandidate>> {
    if g.n() == 0 {
        return Err(Error::invalid("empty graph"));
    }
    if thresholds.is_empty() {
        return Err(Error::invalid("no thresholds given"));
    }
    for (i, &t) in thresholds.iter().enumerate() {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("threshold {t} outside (0, 1)")));
        }
        if i > 0 && t <= thresholds[i - 1] {
            return Err(Error::invalid("thresholds must be strictly increasing"));
        }
    }

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    for &tau in thresholds {
        for comp in components_at(g, tau) {
            if seen.insert(comp.clone()) {
                out.push(TopicCandidate {
                    members: comp,
                    weight: None,
                    interestingness: None,
                });
            }
        }
    }
    Ok(out)
}

/// Non-singleton components of the subgraph with edges of weight `>= tau`, sorted by smallest member.
fn components_at(g: &SimilarityGraph, tau: f64) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, w) in g.edges() {
        if w >= tau {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    // Roots are the smallest member of each component, so BTreeMap order is the required order.
    groups.into_values().filter(|c| c.len() > 1).collect()
}

/// Parses the candidate file format: one candidate per line, whitespace
/// separated 0-based indices, `#` starting a comment line.
///
/// When `n` is given every index must be below it.
pub fn load_candidates<R: BufRead>(reader: R, n: Option<usize>) -> Result<Vec<TopicCandidate>> {
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut members = Vec::new();
        for tok in trimmed.split_whitespace() {
            let idx: usize = tok
                .parse()
                .map_err(|_| Error::parse(no, format!("bad index `{tok}`")))?;
            if let Some(n) = n {
                if idx >= n {
                    return Err(Error::parse(no, format!("index {idx} out of range (n = {n})")));
                }
            }
            members.push(idx);
        }
        let cand = TopicCandidate::new(members).map_err(|e| Error::parse(no, e.to_string()))?;
        out.push(cand);
    }
    if out.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    Ok(out)
}

/// Writes candidates in the line format read by [`load_candidates`].
pub fn save_candidates<W: Write>(candidates: &[TopicCandidate], mut w: W) -> Result<()> {
    for c in candidates {
        write_member_line(c.members(), &mut w)?;
    }
    Ok(())
}

pub(crate) fn write_member_line<W: Write>(members: &[usize], w: &mut W) -> Result<()> {
    let line: Vec<String> = members.iter().map(|m| m.to_string()).collect();
    writeln!(w, "{}", line.join(" "))?;
    Ok(())
}
