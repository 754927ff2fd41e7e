//! Network inference from co-occurrence observations.
//!
//! Infers directed network structure from unordered vertex lists (shuffled
//! paths) by fitting a first-order Markov chain with exact EM or Monte
//! Carlo EM over the latent permutations, then decoding most-likely orders
//! into a feasible graph. Includes the frequency-method baseline, synthetic
//! data generation, sample-size bound calculators, and evaluation metrics.

#![forbid(unsafe_code)]

pub mod em;
pub mod error;
pub mod exact_estep;
pub mod fm;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod mstep;
pub mod reconstruct;
pub mod rng;
pub mod sampler;
pub mod simgen;

pub use error::{NicoError, Result};
pub use model::{
    EndpointMode, MarkovModel, Observation, Permutation, StateSpace, SufficientStats,
};
