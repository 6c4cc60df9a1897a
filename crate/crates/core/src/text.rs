//! Tokenisation and the context window shared by every model.

use serde::{Deserialize, Serialize};

/// Observation used to pad the first context of a trajectory.
pub const PAD_OBSERVATION: &str = "You are at the start of your journey";
/// Action used to pad the first context of a trajectory.
pub const PAD_ACTION: &str = "begin journey";

/// Lowercases and splits on whitespace and punctuation; each punctuation
/// character becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_lowercase().collect());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Lowercase with internal whitespace collapsed; the equality used when
/// comparing generated actions against game actions.
pub fn normalize_action(action: &str) -> String {
    action
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The window `(o_{t-1}, a_{t-1}, o_t)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    pub prev_observation: String,
    pub prev_action: String,
    pub observation: String,
}

impl Context {
    pub fn new(
        prev_observation: impl Into<String>,
        prev_action: impl Into<String>,
        observation: impl Into<String>,
    ) -> Self {
        Self {
            prev_observation: prev_observation.into(),
            prev_action: prev_action.into(),
            observation: observation.into(),
        }
    }

    /// First context of a trajectory, padded with the journey-start convention.
    pub fn initial(observation: impl Into<String>) -> Self {
        Self::new(PAD_OBSERVATION, PAD_ACTION, observation)
    }

    /// Slides the window after taking `action` and observing `observation`.
    pub fn advance(&self, action: &str, observation: impl Into<String>) -> Self {
        Self::new(self.observation.clone(), action, observation)
    }

    pub fn token_count(&self) -> usize {
        tokenize(&self.prev_observation).len()
            + tokenize(&self.prev_action).len()
            + tokenize(&self.observation).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_is_split_out() {
        assert_eq!(
            tokenize("Take the LAMP, then go north!"),
            vec!["take", "the", "lamp", ",", "then", "go", "north", "!"]
        );
        assert_eq!(tokenize("don't"), vec!["don", "'", "t"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(normalize_action("  Open   the Door "), "open the door");
    }

    #[test]
    fn window_slides() {
        let c = Context::initial("o1");
        assert_eq!(c.prev_action, PAD_ACTION);
        let d = c.advance("north", "o2");
        assert_eq!(d, Context::new("o1", "north", "o2"));
    }
}
