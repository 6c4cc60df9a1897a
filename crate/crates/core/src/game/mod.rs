//! Deterministic text-game simulator.

mod engine;
mod solve;
mod spec;
mod validate;

use thiserror::Error;

pub use engine::{StepResult, TrajectoryStep, WorldState, FAILURE_MESSAGES, NOT_HERE, NO_VERB};
pub use solve::{plan_next_reward, plan_next_reward_with, solve, solve_with};
pub use spec::{
    Condition, Effect, Exit, GameSpec, Location, Object, Pattern, Reward, Room, Rule, Template, Verb, VerbKind,
    DIRECTIONS,
};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("walkthrough diverges at step {step}: `{action}` is not admissible")]
    Divergence { step: usize, action: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn load_game_spec(source: &str) -> Result<GameSpec, GameError> {
    GameSpec::from_text(source)
}

pub fn load_game_file(path: &std::path::Path) -> Result<GameSpec, GameError> {
    load_game_spec(&std::fs::read_to_string(path)?)
}
