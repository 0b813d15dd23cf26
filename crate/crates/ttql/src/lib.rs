//! Target-transfer Q-learning on finite tabular MDPs.
//!
//! The crate is organized around one loop: build or load a small MDP
//! ([`synth`], [`files`]), solve it to a certified optimal table ([`solver`]),
//! run synchronous Q-learning that may bootstrap from a transferred source
//! behind a residual gate ([`learner`]), measure errors ([`metrics`]), and
//! compare the measured decay against its closed-form rates ([`bounds`]).
//! [`experiment`] wires those pieces into reproducible multi-seed suites and
//! [`chart`] draws their error curves.
//!
//! Everything is deterministic given the seeds: random streams are split by
//! tag ([`rng`]), reduction orders are fixed, and suite outputs reproduce
//! byte for byte.

pub mod bounds;
pub mod chart;
pub mod config;
pub mod error;
pub mod experiment;
pub mod files;
pub mod learner;
pub mod mdp;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
