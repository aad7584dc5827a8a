//! Synthetic scenarios with planted hot topics, shattered candidates and noise.
//!
//! Every planted topic is split into candidate fragments. Noise pages form
//! coherent clusters, each emitted at several granularities, on top of a sparse
//! background of weak similarities.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::{save_candidates, TopicCandidate};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::graph::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub size: usize,
    pub intra_similarity: f64,
}

/// How a planted topic is turned into candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FragmentSplit {
    /// Disjoint, near-equal parts.
    Partition { parts: usize },
    /// Fragment `k` is the topic minus the `k`-th block of `block` pages, plus
    /// `noise_pages` noise pages of its own.
    DropBlocks {
        parts: usize,
        block: usize,
        noise_pages: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseClusters {
    pub count: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub min_similarity: f64,
    pub max_similarity: f64,
    /// Candidates emitted per cluster: the full cluster, then random subsets.
    pub variants: usize,
    pub subset_fraction: f64,
}

impl NoiseClusters {
    pub fn none() -> Self {
        NoiseClusters {
            count: 0,
            min_size: 2,
            max_size: 2,
            min_similarity: 0.5,
            max_similarity: 0.5,
            variants: 1,
            subset_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub n_webpages: usize,
    pub planted_topics: Vec<PlantedSpec>,
    /// Fraction of pages outside every planted topic.
    pub noise_fraction: f64,
    pub fragment_split: FragmentSplit,
    pub noise_clusters: NoiseClusters,
    /// Expected number of weak background edges per page, per modality.
    pub background_degree: f64,
    pub background_similarity: f64,
    /// Half-width of the uniform jitter around every similarity level.
    pub jitter: f64,
}

impl SyntheticScenario {
    /// 1500 pages, three planted topics of 20, 96% noise.
    pub fn hot_topics() -> Self {
        SyntheticScenario {
            n_webpages: 1500,
            planted_topics: [0.9, 0.7, 0.5]
                .into_iter()
                .map(|intra_similarity| PlantedSpec {
                    size: 20,
                    intra_similarity,
                })
                .collect(),
            noise_fraction: 0.96,
            fragment_split: FragmentSplit::DropBlocks {
                parts: 3,
                block: 3,
                noise_pages: 7,
            },
            noise_clusters: NoiseClusters {
                count: 13,
                min_size: 12,
                max_size: 30,
                min_similarity: 0.3,
                max_similarity: 0.8,
                variants: 3,
                subset_fraction: 0.8,
            },
            background_degree: 4.0,
            background_similarity: 0.05,
            jitter: 0.02,
        }
    }

    /// A small scenario with two planted topics, for quick runs.
    pub fn two_topics() -> Self {
        SyntheticScenario {
            n_webpages: 200,
            planted_topics: vec![
                PlantedSpec {
                    size: 20,
                    intra_similarity: 0.8,
                };
                2
            ],
            noise_fraction: 0.8,
            noise_clusters: NoiseClusters {
                count: 3,
                ..SyntheticScenario::hot_topics().noise_clusters
            },
            ..SyntheticScenario::hot_topics()
        }
    }

    fn validate(&self) -> Result<()> {
        let planted: usize = self.planted_topics.iter().map(|t| t.size).sum();
        if planted > self.n_webpages {
            return Err(Error::invalid(format!(
                "planted topics need {planted} pages but n = {}",
                self.n_webpages
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::invalid("noise_fraction must lie in [0, 1]"));
        }
        let expected = (self.n_webpages as f64 * (1.0 - self.noise_fraction)).round() as usize;
        if expected != planted {
            return Err(Error::invalid(format!(
                "noise_fraction {} implies {expected} planted pages, topics have {planted}",
                self.noise_fraction
            )));
        }
        let levels = self
            .planted_topics
            .iter()
            .map(|t| t.intra_similarity)
            .chain([
                self.background_similarity,
                self.noise_clusters.min_similarity,
                self.noise_clusters.max_similarity,
            ]);
        for v in levels {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("similarity level {v} outside (0, 1]")));
            }
        }
        for t in &self.planted_topics {
            match self.fragment_split {
                FragmentSplit::Partition { parts } => {
                    if parts == 0 || t.size < 2 * parts {
                        return Err(Error::invalid("partition parts must have at least two pages"));
                    }
                }
                FragmentSplit::DropBlocks { parts, block, .. } => {
                    if parts == 0 || parts * block >= t.size {
                        return Err(Error::invalid("dropped blocks must leave part of the topic"));
                    }
                }
            }
        }
        let nc = &self.noise_clusters;
        if nc.count > 0
            && (nc.min_size < 2
                || nc.min_size > nc.max_size
                || nc.variants == 0
                || !(nc.subset_fraction > 0.0 && nc.subset_fraction <= 1.0)
                || nc.min_similarity > nc.max_similarity)
        {
            return Err(Error::invalid("malformed noise cluster spec"));
        }
        if !(self.jitter >= 0.0 && self.background_degree >= 0.0) {
            return Err(Error::invalid("jitter and background_degree must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub visual: SimilarityMatrix,
    pub textual: SimilarityMatrix,
    pub candidates: Vec<TopicCandidate>,
    pub truth: GroundTruth,
}

impl SyntheticData {
    /// Writes `visual.txt`, `textual.txt`, `candidates.txt` and `truth.txt`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.visual.write_triplets(BufWriter::new(File::create(dir.join("visual.txt"))?))?;
        self.textual.write_triplets(BufWriter::new(File::create(dir.join("textual.txt"))?))?;
        save_candidates(&self.candidates, BufWriter::new(File::create(dir.join("candidates.txt"))?))?;
        let truth: Vec<TopicCandidate> = self
            .truth
            .topics
            .iter()
            .map(|t| TopicCandidate::new(t.clone()))
            .collect::<Result<_>>()?;
        save_candidates(&truth, BufWriter::new(File::create(dir.join("truth.txt"))?))?;
        Ok(())
    }
}

/// Groups of pages sharing a similarity level.
struct Block {
    pages: Vec<usize>,
    level: f64,
}

fn draw(level: f64, jitter: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = if jitter > 0.0 {
        level + rng.gen_range(-jitter..=jitter)
    } else {
        level
    };
    v.clamp(1e-3, 1.0)
}

fn modality(n: usize, blocks: &[Block], s: &SyntheticScenario, rng: &mut ChaCha8Rng) -> Result<SimilarityMatrix> {
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let background_edges = (n as f64 * s.background_degree / 2.0).round() as usize;
    for _ in 0..background_edges {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            let v = draw(s.background_similarity, s.jitter / 2.0, rng);
            entries.insert((i.min(j), i.max(j)), v);
        }
    }
    for b in blocks {
        for (x, &i) in b.pages.iter().enumerate() {
            for &j in &b.pages[x + 1..] {
                let v = draw(b.level, s.jitter, rng);
                entries.insert((i.min(j), i.max(j)), v);
            }
        }
    }
    SimilarityMatrix::from_triplets(n, entries.into_iter().map(|((i, j), v)| (i, j, v)))
}

fn candidate(mut pages: Vec<usize>) -> Result<TopicCandidate> {
    pages.sort_unstable();
    TopicCandidate::new(pages)
}

/// Generates both similarity matrices, the candidate list and the planted truth.
pub fn generate_synthetic(scenario: &SyntheticScenario, seed: u64) -> Result<SyntheticData> {
    scenario.validate()?;
    let n = scenario.n_webpages;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pages: Vec<usize> = (0..n).collect();
    pages.shuffle(&mut rng);

    let mut next = 0;
    let mut planted = Vec::new();
    for t in &scenario.planted_topics {
        planted.push(pages[next..next + t.size].to_vec());
        next += t.size;
    }
    let mut noise = pages[next..].iter().copied();
    let mut take_noise = |k: usize| -> Result<Vec<usize>> {
        let got: Vec<usize> = noise.by_ref().take(k).collect();
        if got.len() < k {
            return Err(Error::invalid("not enough noise pages for the requested candidates"));
        }
        Ok(got)
    };

    let mut blocks = Vec::new();
    let mut candidates = Vec::new();
    for (topic, spec) in planted.iter().zip(&scenario.planted_topics) {
        blocks.push(Block {
            pages: topic.clone(),
            level: spec.intra_similarity,
        });
        match scenario.fragment_split {
            FragmentSplit::Partition { parts } => {
                for p in 0..parts {
                    let lo = p * topic.len() / parts;
                    let hi = (p + 1) * topic.len() / parts;
                    candidates.push(candidate(topic[lo..hi].to_vec())?);
                }
            }
            FragmentSplit::DropBlocks {
                parts,
                block,
                noise_pages,
            } => {
                for p in 0..parts {
                    let dropped = &topic[p * block..(p + 1) * block];
                    let mut members: Vec<usize> = topic.iter().copied().filter(|x| !dropped.contains(x)).collect();
                    members.extend(take_noise(noise_pages)?);
                    candidates.push(candidate(members)?);
                }
            }
        }
    }

    let nc = &scenario.noise_clusters;
    for _ in 0..nc.count {
        let size = rng.gen_range(nc.min_size..=nc.max_size);
        let level = rng.gen_range(nc.min_similarity..=nc.max_similarity);
        let cluster = take_noise(size)?;
        candidates.push(candidate(cluster.clone())?);
        let sub = ((size as f64 * nc.subset_fraction).round() as usize).clamp(2, size);
        for _ in 1..nc.variants {
            let picked: Vec<usize> = cluster.choose_multiple(&mut rng, sub).copied().collect();
            candidates.push(candidate(picked)?);
        }
        blocks.push(Block { pages: cluster, level });
    }
    candidates.shuffle(&mut rng);

    let visual = modality(n, &blocks, scenario, &mut rng)?;
    let textual = modality(n, &blocks, scenario, &mut rng)?;
    let truth = GroundTruth::new(planted, n)?;
    Ok(SyntheticData {
        visual,
        textual,
        candidates,
        truth,
    })
}
