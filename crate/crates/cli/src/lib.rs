//! Library side of the `calm` command: model plumbing, report files and the
//! experiment runner.

pub mod experiment;
pub mod lm;
pub mod output;
