//! Minority-aware LLM data augmentation for hierarchically labeled
//! research-proposal corpora.
//!
//! The pipeline counts proposals per discipline over a [`taxonomy::Taxonomy`],
//! turns the counts into softmax minority scores and an integer generation
//! budget ([`sampler`]), renders four-section prompts ([`promptgen`]), runs
//! them through an LLM backend or an offline mock ([`generator`]), appends the
//! validated proposals to the training set ([`augment`]) and measures the
//! effect on a hierarchical multi-label classifier ([`classifier`],
//! [`metrics`], [`experiment`]).
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/`
//! directory; the `propaug` binary exposes the same stages as subcommands.

pub mod augment;
pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod metrics;
pub mod promptgen;
pub mod sampler;
pub mod synth;
pub mod taxonomy;
pub mod util;

pub use error::{Error, Result};
