use topicmine::error::{Error, Stage};
use topicmine::eval;
use topicmine::pipeline::{
    run_br, write_provenance, write_refined_topics, CandidateSource, GraphInput, PipelineConfig, PipelineInputs,
    PipelineOutput,
};
use topicmine::sets;
use topicmine::synth::{generate_synthetic, SyntheticData, SyntheticScenario};

fn run(config: &PipelineConfig, data: SyntheticData) -> PipelineOutput {
    let truth = data.truth.clone();
    run_br(
        config,
        PipelineInputs {
            graph: GraphInput::Matrices {
                visual: data.visual,
                textual: data.textual,
            },
            candidates: CandidateSource::Given(data.candidates),
            truth: Some(truth),
        },
    )
    .unwrap()
}

#[test]
fn two_planted_topics_are_recovered() {
    let data = generate_synthetic(&SyntheticScenario::two_topics(), 5).unwrap();
    let truth = data.truth.clone();
    let out = run(&PipelineConfig::default(), data);
    for topic in &truth.topics {
        let best = out
            .refined
            .iter()
            .map(|r| eval::f1(&r.members, topic).unwrap())
            .fold(0.0, f64::max);
        assert!(best >= 0.9, "best F1 {best}");
    }
    assert!(out.report.is_some());
}

#[test]
fn refined_topics_stay_inside_their_coarse_topic() {
    let data = generate_synthetic(&SyntheticScenario::hot_topics(), 2).unwrap();
    let out = run(&PipelineConfig::default(), data);
    assert_eq!(out.refined.len(), out.coarse.len());
    for r in &out.refined {
        let holders = out
            .coarse
            .iter()
            .filter(|c| sets::is_subset(&r.members, &c.members))
            .count();
        assert!(holders >= 1);
    }
    for (r, c) in out.refined.iter().zip(&out.coarse) {
        assert!(sets::is_subset(&r.members, &c.members));
        assert_eq!(r.rank, c.rank);
    }
    for w in out.refined.windows(2) {
        assert!(w[0].rank < w[1].rank);
    }
}

#[test]
fn zero_window_refines_seed_candidates() {
    let data = generate_synthetic(&SyntheticScenario::two_topics(), 1).unwrap();
    let config = PipelineConfig {
        window: 0,
        nms_thresh: 1.0 + 1e-9,
        ..PipelineConfig::default()
    };
    let out = run(&config, data);
    assert_eq!(out.coarse.len(), out.ranked.len());
    for (c, e) in out.coarse.iter().zip(&out.ranked.entries) {
        assert_eq!(c.sources, vec![e.source]);
        assert_eq!(c.members, e.candidate.members());
    }
}

#[test]
fn reruns_write_identical_bytes() {
    let config = PipelineConfig::default();
    let bytes = || {
        let data = generate_synthetic(&SyntheticScenario::hot_topics(), 17).unwrap();
        let out = run(&config, data);
        let mut buf = Vec::new();
        write_refined_topics(&out.refined, &mut buf).unwrap();
        write_provenance(&config, &out, false, &mut buf).unwrap();
        eval::write_curve_csv(&out.report.as_ref().unwrap().accuracy_fppt_curve, &mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(), bytes());
}

#[test]
fn pagerank_failure_is_tagged_and_classified() {
    let data = generate_synthetic(&SyntheticScenario::two_topics(), 1).unwrap();
    let config = PipelineConfig {
        pr_tol: 1e-300,
        pr_max_iter: 2,
        ..PipelineConfig::default()
    };
    let err = run_br(
        &config,
        PipelineInputs {
            graph: GraphInput::Matrices {
                visual: data.visual,
                textual: data.textual,
            },
            candidates: CandidateSource::Given(data.candidates),
            truth: None,
        },
    )
    .unwrap_err();
    assert!(err.is_convergence_failure());
    assert!(matches!(err, Error::Stage { stage: Stage::Refining, .. }));
}

#[test]
fn cascade_candidates_run_end_to_end() {
    let data = generate_synthetic(&SyntheticScenario::two_topics(), 3).unwrap();
    let out = run_br(
        &PipelineConfig::default(),
        PipelineInputs {
            graph: GraphInput::Matrices {
                visual: data.visual,
                textual: data.textual,
            },
            candidates: CandidateSource::Cascade,
            truth: Some(data.truth),
        },
    )
    .unwrap();
    assert!(!out.candidates.is_empty());
    assert!(out.candidates.iter().all(|c| c.weight.is_some()));
}
