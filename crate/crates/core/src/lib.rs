//! Hot-topic mining by bundling fragmented topic candidates and refining the
//! resulting coarse topics.
//!
//! Stages, in order: [`graph`], [`candidates`], [`ranking`], [`bundling`],
//! [`interestingness`], [`refining`]. [`pipeline::run_br`] chains them, and
//! [`eval`] scores ranked detections against ground truth.
//!
//! ```
//! use topicmine::pipeline::{run_br, CandidateSource, GraphInput, PipelineConfig, PipelineInputs};
//! use topicmine::synth::{generate_synthetic, SyntheticScenario};
//!
//! # fn main() -> topicmine::Result<()> {
//! let data = generate_synthetic(&SyntheticScenario::two_topics(), 0)?;
//! let out = run_br(
//!     &PipelineConfig::default(),
//!     PipelineInputs {
//!         graph: GraphInput::Matrices { visual: data.visual, textual: data.textual },
//!         candidates: CandidateSource::Given(data.candidates),
//!         truth: Some(data.truth),
//!     },
//! )?;
//! for topic in out.refined_member_sets() {
//!     println!("{topic:?}");
//! }
//! # Ok(())
//! # }
//! ```

pub mod bundling;
pub mod candidates;
pub mod error;
pub mod eval;
pub mod graph;
pub mod interestingness;
pub mod oracle;
pub mod pipeline;
pub mod ranking;
pub mod refining;
pub mod sets;
pub mod synth;

pub use error::{Error, Result, Stage};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/bundling.md")]
    mod bundling {}
    #[doc = include_str!("../../../book/src/interestingness.md")]
    mod interestingness {}
    #[doc = include_str!("../../../book/src/refining.md")]
    mod refining {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
