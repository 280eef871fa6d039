//! Deterministic multi-agent tissue-repair simulator.
//!
//! A stochastic reaction-diffusion field carries the injury signal; engineered
//! cell agents sense it, secrete, move, talk to each other over a Hebbian
//! network, and learn Gaussian policies against a centralized critic while a
//! linear curriculum makes the injury harder to reach.

pub mod agents;
pub mod comms;
pub mod config;
pub mod curriculum;
pub mod engine;
pub mod error;
pub mod field;
pub mod learning;
pub mod oracle;
pub mod output;
pub mod reward;
pub mod rng;
pub mod tridiag;

pub use config::EngineConfig;
pub use engine::{simulate, Engine, EpisodeSummary, StepOutcome, StepRecord};
pub use error::{Error, Result};
pub use output::run_to_dir;
