//! Simulation framework for feedback-driven adaptation of a graph-based
//! instruction-following navigation agent.

pub mod adapt;
pub mod envgraph;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod jsonl;
pub mod membank;
pub mod metrics;
pub mod policy;
pub mod pretrain;
pub mod rollout;
pub mod seeds;
pub mod synthlang;

pub use error::{Error, Result};
