//! DRRN agent: Q-learning over language-model candidate sets.

pub mod filter;
pub mod qnet;
pub mod replay;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{filter_candidates, labeled_responses, FilterMode, ResponseClassifier};
pub use qnet::{action_probabilities, td_update, QDims, QNetwork};
pub use replay::ReplayBuffers;
pub use train::{play, train, EpisodeRecord, PlayStep, Source, Summary, TrainingReport, FALLBACK_ACTION};

#[derive(Debug, Error)]
pub enum DrrnError {
    #[error("no candidate actions to score")]
    NoCandidates,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("actor failed: {0}")]
    Actor(String),
    #[error(transparent)]
    Tensor(#[from] calm_tensor::TensorError),
}

/// One transition, with the candidate set proposed for the next state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub obs: String,
    pub action: String,
    pub reward: f64,
    pub next_obs: String,
    pub next_candidates: Vec<String>,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Softmax over learned Q-values.
    #[default]
    Learned,
    /// Uniform over the candidates; nothing is learned.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Candidates requested from the language model per step.
    pub k: usize,
    pub actors: usize,
    /// Environment steps summed over all actors.
    pub total_steps: usize,
    pub temperature: f64,
    pub filter: FilterMode,
    pub policy: Policy,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Environment steps before the first update.
    pub warmup_steps: usize,
    /// One update every this many environment steps.
    pub update_every: usize,
    /// Share of each batch drawn from the best-score buffer.
    pub best_ratio: f64,
    pub max_episode_steps: usize,
    /// Refresh a frozen target network every this many updates; off when
    /// unset, so targets use the live network.
    pub target_sync: Option<usize>,
    pub learning_rate: f64,
    pub max_grad_norm: Option<f64>,
    pub net: QDims,
    pub seed: u64,
    /// Single-threaded, round-robin actors; bit-reproducible.
    pub deterministic: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            k: 30,
            actors: 8,
            total_steps: 100_000,
            temperature: 1.0,
            filter: FilterMode::None,
            policy: Policy::Learned,
            buffer_capacity: 100_000,
            batch_size: 64,
            warmup_steps: 1000,
            update_every: 1,
            best_ratio: 0.5,
            max_episode_steps: 100,
            target_sync: None,
            learning_rate: 1e-3,
            max_grad_norm: Some(5.0),
            net: QDims::default(),
            seed: 0,
            deterministic: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), DrrnError> {
        let bad = |m: &str| Err(DrrnError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.actors < 1 || self.batch_size < 1 || self.update_every < 1 || self.max_episode_steps < 1 {
            return bad("actors, batch_size, update_every and max_episode_steps must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.best_ratio) {
            return bad("best_ratio must lie in [0, 1]");
        }
        if self.target_sync == Some(0) {
            return bad("target_sync must be positive");
        }
        if self.net.embed == 0 || self.net.hidden == 0 || self.net.buckets == 0 {
            return bad("network sizes must be positive");
        }
        Ok(())
    }
}
