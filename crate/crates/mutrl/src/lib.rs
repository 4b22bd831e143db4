//! Mutation testing for reinforcement learning agents.
//!
//! The pipeline trains a population of original agents, injects single
//! hyperparameter faults (mutants) that share the originals' seeds, decides
//! per mutant configuration whether it is killable and non-trivial by
//! replaying the originals' training scenarios, and then scores test-case
//! generators by how many representative mutants their suites kill.

pub mod agents;
pub mod cli;
pub mod envs;
pub mod error;
pub mod mutation;
pub mod nn;
pub mod pipeline;
pub mod plots;
pub mod rng;
pub mod stats;
pub mod testgen;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
