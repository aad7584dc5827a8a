use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topicmine::bundling;
use topicmine::candidates::{cascade_candidates, load_candidates, save_candidates, TopicCandidate};
use topicmine::error::{Error, Result};
use topicmine::eval::{self, GroundTruth};
use topicmine::graph::{GraphKind, SimilarityGraph, SimilarityMatrix};
use topicmine::oracle;
use topicmine::pipeline::{
    build_graph, run_br, write_provenance, write_refined_topics, AffinityMode, CandidateSource, GraphInput,
    PipelineConfig, PipelineInputs, PipelineOutput,
};
use topicmine::ranking::{self, RankedTopicList};
use topicmine::synth::{generate_synthetic, SyntheticScenario};

#[derive(Parser)]
#[command(name = "topicmine", version, about = "Mine hot topics from fragmented topic candidates")]
struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    knn_txt: Option<usize>,
    #[arg(long, global = true)]
    knn_vis: Option<usize>,
    #[arg(long, global = true, value_enum)]
    affinity: Option<Affinity>,
    #[arg(long, global = true)]
    sigma2_affinity: Option<f64>,
    /// Comma separated, strictly increasing.
    #[arg(long, global = true, value_delimiter = ',')]
    cascade_thresholds: Option<Vec<f64>>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    nms_thresh: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    sigma_dissim: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    #[arg(long, global = true)]
    pd_max_iter: Option<usize>,
    #[arg(long, global = true)]
    pd_tol: Option<f64>,
    #[arg(long, global = true)]
    pr_tol: Option<f64>,
    #[arg(long, global = true)]
    pr_max_iter: Option<usize>,
    #[arg(long, global = true)]
    max_ndt: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Affinity {
    Similarity,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    HotTopics,
    TwoTopics,
}

#[derive(Args)]
struct GraphSource {
    /// Prebuilt mixed graph (triplet file).
    #[arg(long, conflicts_with_all = ["visual", "textual"])]
    graph: Option<PathBuf>,
    /// Visual similarity matrix (triplet file).
    #[arg(long, requires = "textual")]
    visual: Option<PathBuf>,
    /// Textual similarity matrix (triplet file).
    #[arg(long, requires = "visual")]
    textual: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the mixed kNN graph from two similarity matrices.
    Graph {
        #[arg(long)]
        visual: PathBuf,
        #[arg(long)]
        textual: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate candidates by thresholded components, or validate a candidate file.
    Candidates {
        #[command(flatten)]
        source: GraphSource,
        /// Validate and normalize this candidate file instead of generating.
        #[arg(long)]
        load: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank candidates by interestingness.
    Rank {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Ranked candidates, one per line.
        #[arg(long)]
        out: PathBuf,
        /// CSV with rank, source index, weight and interestingness.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Rank, bundle and suppress duplicates; writes coarse topics.
    Bundle {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full refinement without evaluation.
    Refine {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        provenance: Option<PathBuf>,
        /// Record stage timings in the provenance file.
        #[arg(long)]
        timings: bool,
    },
    /// Full pipeline with optional evaluation; writes everything to a directory.
    Run {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        timings: bool,
    },
    /// Score ranked detections against ground truth.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic scenario.
    Synth {
        #[arg(long, value_enum, default_value = "hot-topics")]
        scenario: Scenario,
        /// TOML scenario description; replaces `--scenario`.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Randomized submodularity and monotonicity checks of the refinement objective.
    Oracle {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(path) => PipelineConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = o.$field.clone() { c.$field = v; } )* };
    }
    apply!(
        knn_txt, knn_vis, cascade_thresholds, window, tau, nms_thresh, alpha, sigma_dissim, lambda, margin,
        pd_max_iter, pd_tol, pr_tol, pr_max_iter, max_ndt, seed
    );
    if let Some(s) = o.sigma2_affinity {
        c.sigma2_affinity = Some(s);
    }
    if let Some(a) = o.affinity {
        c.affinity = match a {
            Affinity::Similarity => AffinityMode::Similarity,
            Affinity::Gaussian => AffinityMode::Gaussian,
        };
    }
    Ok(c)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_matrix(path: &Path) -> Result<SimilarityMatrix> {
    SimilarityMatrix::read_triplets(open(path)?)
}

fn graph_input(source: &GraphSource) -> Result<GraphInput> {
    match (&source.graph, &source.visual, &source.textual) {
        (Some(g), _, _) => Ok(GraphInput::Mixed(SimilarityGraph::read_triplets(open(g)?, GraphKind::Mixed)?)),
        (None, Some(v), Some(t)) => Ok(GraphInput::Matrices {
            visual: read_matrix(v)?,
            textual: read_matrix(t)?,
        }),
        _ => Err(Error::InvalidInput("give --graph, or both --visual and --textual".into())),
    }
}

fn resolve_graph(source: &GraphSource, config: &PipelineConfig) -> Result<SimilarityGraph> {
    match graph_input(source)? {
        GraphInput::Mixed(g) => Ok(g),
        GraphInput::Matrices { visual, textual } => build_graph(&visual, &textual, config),
    }
}

fn candidate_source(path: &Option<PathBuf>) -> Result<CandidateSource> {
    match path {
        Some(p) => Ok(CandidateSource::Given(load_candidates(open(p)?, None)?)),
        None => Ok(CandidateSource::Cascade),
    }
}

fn run_pipeline(
    config: &PipelineConfig,
    source: &GraphSource,
    candidates: &Option<PathBuf>,
    truth: Option<GroundTruth>,
) -> Result<PipelineOutput> {
    run_br(
        config,
        PipelineInputs {
            graph: graph_input(source)?,
            candidates: candidate_source(candidates)?,
            truth,
        },
    )
}

fn rank_stage(
    config: &PipelineConfig,
    source: &GraphSource,
    candidates: &Option<PathBuf>,
) -> Result<RankedTopicList> {
    let g = resolve_graph(source, config)?;
    let mut cands = match candidate_source(candidates)? {
        CandidateSource::Given(c) => c,
        CandidateSource::Cascade => cascade_candidates(&g, &config.cascade_thresholds)?,
    };
    let mu = ranking::estimate_weights(&g, &cands, config.pd_max_iter, config.pd_tol)?;
    ranking::assign_weights(&mut cands, &mu)?;
    ranking::rank(&cands)
}

fn write_lines(sets: &[Vec<usize>], header: &str, path: &Path) -> Result<()> {
    let cands: Vec<TopicCandidate> = sets.iter().map(|s| TopicCandidate::new(s.clone())).collect::<Result<_>>()?;
    let mut w = create(path)?;
    writeln!(w, "# {header}")?;
    save_candidates(&cands, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_report(report: &eval::EvaluationReport, dir: &Path) -> Result<()> {
    eval::write_curve_csv(&report.top10_f1_curve, create(&dir.join("top10_f1.csv"))?)?;
    eval::write_curve_csv(&report.accuracy_fppt_curve, create(&dir.join("accuracy_fppt.csv"))?)?;
    println!("accuracy at FPPT <= 5: {:.4}", report.accuracy_at(5.0));
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Graph { visual, textual, out } => {
            let g = build_graph(&read_matrix(visual)?, &read_matrix(textual)?, &config)?;
            let mut w = create(out)?;
            g.write_triplets(&mut w)?;
            w.flush()?;
            eprintln!("{} nodes, {} edges", g.n(), g.edge_count());
        }
        Command::Candidates { source, load, out } => {
            let cands = match load {
                Some(p) => load_candidates(open(p)?, None)?,
                None => cascade_candidates(&resolve_graph(source, &config)?, &config.cascade_thresholds)?,
            };
            let mut w = create(out)?;
            save_candidates(&cands, &mut w)?;
            w.flush()?;
            eprintln!("{} candidates", cands.len());
        }
        Command::Rank {
            source,
            candidates,
            out,
            scores,
        } => {
            let ranked = rank_stage(&config, source, candidates)?;
            write_lines(&ranked.member_sets(), "candidates in rank order", out)?;
            if let Some(p) = scores {
                let mut w = create(p)?;
                writeln!(w, "rank,source,weight,interestingness")?;
                for (r, e) in ranked.entries.iter().enumerate() {
                    let weight = e.candidate.weight.unwrap_or(0.0);
                    writeln!(w, "{r},{},{weight},{}", e.source, e.interestingness())?;
                }
                w.flush()?;
            }
        }
        Command::Bundle {
            source,
            candidates,
            out,
        } => {
            let ranked = rank_stage(&config, source, candidates)?;
            let coarse = bundling::bundle(&ranked, config.window, config.tau)?;
            let coarse = bundling::nms_dedupe(coarse, config.nms_thresh);
            let sets: Vec<Vec<usize>> = coarse.into_iter().map(|t| t.members).collect();
            write_lines(&sets, "coarse topics in rank order", out)?;
        }
        Command::Refine {
            source,
            candidates,
            out,
            provenance,
            timings,
        } => {
            let result = run_pipeline(&config, source, candidates, None)?;
            let mut w = create(out)?;
            write_refined_topics(&result.refined, &mut w)?;
            w.flush()?;
            if let Some(p) = provenance {
                write_provenance(&config, &result, *timings, create(p)?)?;
            }
        }
        Command::Run {
            source,
            candidates,
            truth,
            out_dir,
            timings,
        } => {
            let truth = match truth {
                Some(p) => Some(GroundTruth::read(open(p)?, None)?),
                None => None,
            };
            let result = run_pipeline(&config, source, candidates, truth)?;
            std::fs::create_dir_all(out_dir)?;
            let mut w = create(&out_dir.join("refined.txt"))?;
            write_refined_topics(&result.refined, &mut w)?;
            w.flush()?;
            write_provenance(&config, &result, *timings, create(&out_dir.join("provenance.json"))?)?;
            if let Some(report) = &result.report {
                write_report(report, out_dir)?;
            }
            eprintln!("{} refined topics", result.refined.len());
        }
        Command::Eval {
            detections,
            truth,
            out_dir,
        } => {
            let truth = GroundTruth::read(open(truth)?, None)?;
            let dets: Vec<Vec<usize>> = load_candidates(open(detections)?, None)?
                .into_iter()
                .map(|c| c.members().to_vec())
                .collect();
            let report = eval::evaluate(&dets, &truth, config.max_ndt)?;
            std::fs::create_dir_all(out_dir)?;
            write_report(&report, out_dir)?;
        }
        Command::Synth {
            scenario,
            scenario_file,
            out_dir,
        } => {
            let s = match scenario_file {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::InvalidInput(format!("scenario: {e}")))?,
                None => match scenario {
                    Scenario::HotTopics => SyntheticScenario::hot_topics(),
                    Scenario::TwoTopics => SyntheticScenario::two_topics(),
                },
            };
            generate_synthetic(&s, config.seed)?.write_to_dir(out_dir)?;
        }
        Command::Oracle { trials, n } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let inst = oracle::random_instance(*n, config.sigma_dissim, &mut rng);
            let sub = oracle::check_submodularity(&inst.pi, &inst.d, config.lambda, *trials, &mut rng)?;
            let d = inst
                .d
                .normalized()
                .ok_or_else(|| Error::InvalidInput("dissimilarity sums to zero".into()))?;
            let mono = oracle::check_monotonicity(&inst.pi, &d, config.lambda, *trials, &mut rng)?;
            println!("{sub}");
            println!("{mono}");
            if !(sub.passed() && mono.passed()) {
                return Err(Error::InvalidInput("oracle check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_convergence_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
