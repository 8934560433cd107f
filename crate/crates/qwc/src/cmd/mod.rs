//! Subcommand implementations.

pub mod chain;
pub mod election;
pub mod hash;
pub mod simulate;
pub mod tamper;
pub mod walk;
