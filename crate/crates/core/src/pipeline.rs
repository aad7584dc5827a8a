//! End-to-end driver: graph, ranking, bundling, suppression, refinement and evaluation.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundling::{self, CoarseTopic};
use crate::candidates::{self, cascade_candidates, TopicCandidate};
use crate::error::{Error, Result, Stage};
use crate::eval::{self, EvaluationReport, GroundTruth};
use crate::graph::{gaussian_affinity, knn_sparsify, mix_graphs, GraphKind, SimilarityGraph, SimilarityMatrix};
use crate::interestingness;
use crate::ranking::{self, RankedTopicList};
use crate::refining::{self, refine_topic, RefineParams, RefinedTopic};

/// How raw similarities become graph affinities before kNN sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffinityMode {
    /// Use similarities as affinities.
    #[default]
    Similarity,
    /// `exp(-W^2 / sigma2)` on present entries.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub knn_txt: usize,
    pub knn_vis: usize,
    pub affinity: AffinityMode,
    /// Gaussian bandwidth; `None` uses the mean squared present similarity of each matrix.
    pub sigma2_affinity: Option<f64>,
    pub cascade_thresholds: Vec<f64>,
    pub window: usize,
    pub tau: f64,
    pub nms_thresh: f64,
    pub alpha: f64,
    pub sigma_dissim: f64,
    pub lambda: f64,
    pub margin: f64,
    pub pd_max_iter: usize,
    pub pd_tol: f64,
    pub pr_tol: f64,
    pub pr_max_iter: usize,
    /// Largest NDT on the top-10 F1 curve.
    pub max_ndt: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            knn_txt: 100,
            knn_vis: 10,
            affinity: AffinityMode::Similarity,
            sigma2_affinity: None,
            cascade_thresholds: vec![0.1, 0.5, 0.9],
            window: bundling::DEFAULT_WINDOW,
            tau: bundling::DEFAULT_TAU,
            nms_thresh: 0.4,
            alpha: interestingness::DEFAULT_ALPHA,
            sigma_dissim: refining::DEFAULT_BANDWIDTH,
            lambda: refining::DEFAULT_LAMBDA,
            margin: refining::DEFAULT_MARGIN,
            pd_max_iter: ranking::DEFAULT_MAX_ITER,
            pd_tol: ranking::DEFAULT_TOL,
            pr_tol: interestingness::DEFAULT_TOL,
            pr_max_iter: interestingness::DEFAULT_MAX_ITER,
            max_ndt: 100,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            alpha: self.alpha,
            pr_tol: self.pr_tol,
            pr_max_iter: self.pr_max_iter,
            bandwidth: self.sigma_dissim,
            lambda: self.lambda,
            margin: self.margin,
        }
    }
}

pub enum GraphInput {
    Matrices {
        visual: SimilarityMatrix,
        textual: SimilarityMatrix,
    },
    Mixed(SimilarityGraph),
}

pub enum CandidateSource {
    Cascade,
    Given(Vec<TopicCandidate>),
}

pub struct PipelineInputs {
    pub graph: GraphInput,
    pub candidates: CandidateSource,
    pub truth: Option<GroundTruth>,
}

fn affinity(m: &SimilarityMatrix, config: &PipelineConfig) -> Result<SimilarityMatrix> {
    match config.affinity {
        AffinityMode::Similarity => Ok(m.clone()),
        AffinityMode::Gaussian => {
            let sigma2 = match config.sigma2_affinity {
                Some(s) => s,
                None => m
                    .mean_squared_entry()
                    .ok_or_else(|| Error::invalid("similarity matrix has no entries"))?,
            };
            gaussian_affinity(m, sigma2)
        }
    }
}

/// Builds the mixed graph from per-modality similarities.
pub fn build_graph(visual: &SimilarityMatrix, textual: &SimilarityMatrix, config: &PipelineConfig) -> Result<SimilarityGraph> {
    let k_vis = config.knn_vis.min(visual.n().saturating_sub(1));
    let k_txt = config.knn_txt.min(textual.n().saturating_sub(1));
    let g_vis = knn_sparsify(&affinity(visual, config)?, k_vis, GraphKind::Visual)?;
    let g_txt = knn_sparsify(&affinity(textual, config)?, k_txt, GraphKind::Textual)?;
    mix_graphs(&g_vis, &g_txt)
}

/// Wall time spent in each stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub graph: Duration,
    pub candidates: Duration,
    pub ranking: Duration,
    pub bundling: Duration,
    pub refining: Duration,
    pub evaluation: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub graph: SimilarityGraph,
    /// Candidates in input order, with weights and interestingness filled in.
    pub candidates: Vec<TopicCandidate>,
    pub poisson_iterations: usize,
    pub poisson_converged: bool,
    pub ranked: RankedTopicList,
    /// Coarse topics after suppression, in rank order.
    pub coarse: Vec<CoarseTopic>,
    /// One refined topic per coarse topic, same order.
    pub refined: Vec<RefinedTopic>,
    pub report: Option<EvaluationReport>,
    pub timings: StageTimings,
}

impl PipelineOutput {
    pub fn refined_member_sets(&self) -> Vec<Vec<usize>> {
        self.refined.iter().map(|t| t.members.clone()).collect()
    }

    pub fn coarse_member_sets(&self) -> Vec<Vec<usize>> {
        self.coarse.iter().map(|t| t.members.clone()).collect()
    }

    /// Candidates ranked by interestingness: the rank-only baseline.
    pub fn ranked_member_sets(&self) -> Vec<Vec<usize>> {
        self.ranked.member_sets()
    }
}

/// Ranks, bundles, suppresses and refines; evaluates when ground truth is given.
pub fn run_br(config: &PipelineConfig, inputs: PipelineInputs) -> Result<PipelineOutput> {
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let graph = match inputs.graph {
        GraphInput::Matrices { visual, textual } => build_graph(&visual, &textual, config),
        GraphInput::Mixed(g) => Ok(g),
    }
    .map_err(|e| e.in_stage(Stage::Graph))?;
    timings.graph = clock.elapsed();

    let clock = Instant::now();
    let mut candidates = match inputs.candidates {
        CandidateSource::Cascade => cascade_candidates(&graph, &config.cascade_thresholds),
        CandidateSource::Given(c) if c.is_empty() => Err(Error::invalid("no candidates")),
        CandidateSource::Given(c) => Ok(c),
    }
    .map_err(|e| e.in_stage(Stage::Candidates))?;
    timings.candidates = clock.elapsed();

    let clock = Instant::now();
    let fit = ranking::estimate_weights_traced(&graph, &candidates, config.pd_max_iter, config.pd_tol)
        .map_err(|e| e.in_stage(Stage::Ranking))?;
    ranking::assign_weights(&mut candidates, &fit.weights).map_err(|e| e.in_stage(Stage::Ranking))?;
    let ranked = ranking::rank(&candidates).map_err(|e| e.in_stage(Stage::Ranking))?;
    timings.ranking = clock.elapsed();

    let clock = Instant::now();
    let coarse = bundling::bundle(&ranked, config.window, config.tau).map_err(|e| e.in_stage(Stage::Bundling))?;
    let coarse = bundling::nms_dedupe(coarse, config.nms_thresh);
    timings.bundling = clock.elapsed();

    let clock = Instant::now();
    let params = config.refine_params();
    let refined = coarse
        .par_iter()
        .map(|t| refine_topic(t, &candidates, &params))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage(Stage::Refining))?;
    timings.refining = clock.elapsed();

    let clock = Instant::now();
    let report = match &inputs.truth {
        Some(truth) => {
            let detections: Vec<Vec<usize>> = refined.iter().map(|t| t.members.clone()).collect();
            Some(eval::evaluate(&detections, truth, config.max_ndt).map_err(|e| e.in_stage(Stage::Evaluation))?)
        }
        None => None,
    };
    timings.evaluation = clock.elapsed();

    Ok(PipelineOutput {
        graph,
        candidates,
        poisson_iterations: fit.iterations,
        poisson_converged: fit.converged,
        ranked,
        coarse,
        refined,
        report,
        timings,
    })
}

/// Refined topics in rank order, one per line in the candidate file format.
pub fn write_refined_topics<W: Write>(refined: &[RefinedTopic], mut w: W) -> Result<()> {
    writeln!(w, "# refined topics in rank order")?;
    for t in refined {
        candidates::write_member_line(&t.members, &mut w)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Provenance<'a> {
    config: &'a PipelineConfig,
    pages: usize,
    edges: usize,
    candidates: usize,
    poisson_iterations: usize,
    poisson_converged: bool,
    coarse_topics: usize,
    timings: &'a StageTimings,
    topics: &'a [RefinedTopic],
}

/// JSON record of the run: configuration, sizes, timings and every topic's trace.
///
/// Timings are omitted when `with_timings` is false so reruns compare byte for byte.
pub fn write_provenance<W: Write>(config: &PipelineConfig, out: &PipelineOutput, with_timings: bool, w: W) -> Result<()> {
    let zero = StageTimings::default();
    let record = Provenance {
        config,
        pages: out.graph.n(),
        edges: out.graph.edge_count(),
        candidates: out.candidates.len(),
        poisson_iterations: out.poisson_iterations,
        poisson_converged: out.poisson_converged,
        coarse_topics: out.coarse.len(),
        timings: if with_timings { &out.timings } else { &zero },
        topics: &out.refined,
    };
    serde_json::to_writer_pretty(w, &record).map_err(|e| Error::Io(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c = PipelineConfig::from_toml_str("window = 5\naffinity = \"gaussian\"").unwrap();
        assert_eq!(c.window, 5);
        assert_eq!(c.affinity, AffinityMode::Gaussian);
        assert_eq!(c.tau, 0.4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("windw = 5").is_err());
    }

    #[test]
    fn stage_errors_are_tagged() {
        let g = SimilarityGraph::from_edges(3, GraphKind::Mixed, vec![(0, 1, 0.5)]).unwrap();
        let inputs = PipelineInputs {
            graph: GraphInput::Mixed(g),
            candidates: CandidateSource::Given(vec![TopicCandidate::new(vec![0, 7]).unwrap()]),
            truth: None,
        };
        let err = run_br(&PipelineConfig::default(), inputs).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Ranking, .. }), "{err}");
    }
}
