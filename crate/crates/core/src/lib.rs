//! Generative model of grammatical and ungrammatical strings over a finite
//! message space, with the scoring and statistics used to evaluate language
//! model judgments on minimal pairs.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, ingestion and
//! the command line live in the `minpair` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod model;
pub mod predictions;
pub mod scoring;
pub mod stats;
pub mod world;

pub use model::{
    enumerate_pairs, error_distance, message_posterior, string_prob_approx, string_prob_exact,
    ErrorModel, MessagePosterior, ModelError, PairCriteria, SimPair, StringProb,
};
pub use scoring::{MetricKind, ScoreError, ScoringAux, TokenScores, UnigramTable};
pub use stats::StatsError;
pub use world::{
    build_cube_world, build_random_world, MessageField, ProbLaw, RandomWorldConfig, StringForm,
    World, WorldError,
};
