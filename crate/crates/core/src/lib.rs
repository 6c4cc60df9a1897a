//! Contextual action language models for text games, and the agents and
//! tooling around them.

pub mod game;
pub mod text;
pub mod suite;
pub mod corpus;
pub mod synth;
pub mod model;
pub mod ngram;
pub mod neural;
pub mod drrn;
pub mod eval;

/// Crate name and version, stamped into every report.
pub const VERSION: &str = concat!("calm ", env!("CARGO_PKG_VERSION"));
