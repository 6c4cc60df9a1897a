//! Candidate filtering: pass-through, engine oracle, or a learned
//! classifier over the game's one-step response.

use std::collections::{BTreeMap, BTreeSet};

use calm_tensor::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{GameSpec, WorldState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    None,
    Oracle,
    Textual,
}

impl std::str::FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "oracle" => Ok(Self::Oracle),
            "textual" => Ok(Self::Textual),
            other => Err(format!("unknown filter mode `{other}` (none, oracle, textual)")),
        }
    }
}

/// Logistic regression on the set of tokens in a response; the positive
/// class is "the command failed".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseClassifier {
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
}

fn features(response: &str) -> BTreeSet<String> {
    crate::text::tokenize(response).into_iter().collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ResponseClassifier {
    /// Plain SGD on the log loss; `samples` pairs a response with whether
    /// the command failed.
    pub fn fit(samples: &[(String, bool)], epochs: usize, lr: f64, seed: u64) -> Self {
        let mut model = Self::default();
        let feats: Vec<BTreeSet<String>> = samples.iter().map(|(r, _)| features(r)).collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut rng = Rng::derive(seed, 0x6669_6c74);
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            for &i in &order {
                let p = model.score(&feats[i]);
                let y = if samples[i].1 { 1.0 } else { 0.0 };
                let g = p - y;
                model.bias -= lr * g;
                for f in &feats[i] {
                    *model.weights.entry(f.clone()).or_insert(0.0) -= lr * g;
                }
            }
        }
        model
    }

    fn score(&self, feats: &BTreeSet<String>) -> f64 {
        let z = self.bias + feats.iter().filter_map(|f| self.weights.get(f)).sum::<f64>();
        sigmoid(z)
    }

    pub fn failure_probability(&self, response: &str) -> f64 {
        self.score(&features(response))
    }

    pub fn is_failure(&self, response: &str) -> bool {
        self.failure_probability(response) > 0.5
    }

    /// Share of `samples` labelled correctly.
    pub fn accuracy(&self, samples: &[(String, bool)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let right = samples.iter().filter(|(r, y)| self.is_failure(r) == *y).count();
        right as f64 / samples.len() as f64
    }
}

/// `(response, failed)` pairs collected by wandering through `spec`: at each
/// visited state one admissible command and one random verb/object
/// combination are tried on a copy of the state.
pub fn labeled_responses(spec: &GameSpec, n: usize, rng: &mut Rng) -> Vec<(String, bool)> {
    let names = spec.object_names();
    let mut out = Vec::with_capacity(n);
    let (mut state, _) = spec.reset();
    let mut steps = 0;
    while out.len() < n {
        let admissible: Vec<String> = spec.admissible_actions(&state).into_iter().collect();
        if admissible.is_empty() || steps >= 60 {
            state = spec.reset().0;
            steps = 0;
            continue;
        }
        let random = match rng.choose(&spec.verbs) {
            Some(verb) if !names.is_empty() => {
                let a = &names[rng.below(names.len())];
                let b = &names[rng.below(names.len())];
                verb.canonical().render(&[a, b])
            }
            _ => "xyzzy".to_string(),
        };
        let tried = admissible[rng.below(admissible.len())].clone();
        for cmd in [tried.as_str(), random.as_str()] {
            let (_, r) = spec.step(&state, cmd);
            out.push((r.response, !r.state_changed));
        }
        state = spec.step(&state, &tried).0;
        steps += 1;
    }
    out.truncate(n);
    out
}

/// Applies `mode` to `candidates`. Never returns an empty list when given a
/// non-empty one: if nothing survives, the input comes back unchanged.
pub fn filter_candidates(
    candidates: &[String],
    mode: FilterMode,
    spec: &GameSpec,
    state: &WorldState,
    classifier: Option<&ResponseClassifier>,
) -> Vec<String> {
    let kept: Vec<String> = match (mode, classifier) {
        (FilterMode::None, _) | (FilterMode::Textual, None) => return candidates.to_vec(),
        (FilterMode::Oracle, _) => candidates
            .iter()
            .filter(|a| spec.changes_state(state, a))
            .cloned()
            .collect(),
        (FilterMode::Textual, Some(c)) => candidates
            .iter()
            .filter(|a| !c.is_failure(&spec.step(state, a).1.response))
            .cloned()
            .collect(),
    };
    if kept.is_empty() {
        candidates.to_vec()
    } else {
        kept
    }
}
