//! Hybrid neuroevolution of CGP neural-network policies.
//!
//! Candidates are proposed by several generators (plain mutation, behavior
//! imitation of elite episodes, advantage-weighted imitation and a Kriging
//! surrogate over behavior distances) and only replace the champion after
//! winning a multi-episode duel.

pub mod behavior;
pub mod cgp;
pub mod critic;
pub mod ea;
pub mod env;
pub mod error;
pub mod orchestrator;
pub mod policy;
pub mod selection;
pub mod surrogate;
pub mod trajectory;

pub use error::{Error, Result};
pub use orchestrator::{run, Bnet, BnetConfig, RunSummary, Variant};
