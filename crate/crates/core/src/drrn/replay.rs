//! Ring buffer of recent transitions plus a buffer holding the transitions
//! of the best-scoring episodes seen so far.

use std::collections::VecDeque;

use calm_tensor::Rng;

use super::Experience;

#[derive(Clone, Debug)]
pub struct ReplayBuffers {
    capacity: usize,
    ratio: f64,
    standard: VecDeque<Experience>,
    best: VecDeque<Experience>,
    best_score: Option<f64>,
}

impl ReplayBuffers {
    /// `ratio` is the share of each batch drawn from the best-score buffer
    /// once it holds anything.
    pub fn new(capacity: usize, ratio: f64) -> Self {
        Self {
            capacity: capacity.max(1),
            ratio: ratio.clamp(0.0, 1.0),
            standard: VecDeque::new(),
            best: VecDeque::new(),
            best_score: None,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.standard.len() == self.capacity {
            self.standard.pop_front();
        }
        self.standard.push_back(exp);
    }

    /// Offers a finished episode to the best-score buffer. A strictly better
    /// positive score replaces the contents, a tie appends (dropping the
    /// oldest past capacity), anything lower is ignored. Returns whether the
    /// episode was kept.
    pub fn end_episode(&mut self, trajectory: &[Experience], score: f64) -> bool {
        if score <= 0.0 || trajectory.is_empty() {
            return false;
        }
        match self.best_score {
            Some(best) if score < best => return false,
            Some(best) if score == best => {}
            _ => {
                self.best.clear();
                self.best_score = Some(score);
            }
        }
        for e in trajectory {
            if self.best.len() == self.capacity {
                self.best.pop_front();
            }
            self.best.push_back(e.clone());
        }
        true
    }

    pub fn len(&self) -> usize {
        self.standard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.standard.is_empty() && self.best.is_empty()
    }

    pub fn best_len(&self) -> usize {
        self.best.len()
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best_score
    }

    /// Draws `n` transitions with replacement: `round(ratio·n)` from the
    /// best-score buffer (when non-empty), the rest from the ring buffer.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<&Experience> {
        if self.is_empty() {
            return Vec::new();
        }
        let from_best = if self.best.is_empty() {
            0
        } else if self.standard.is_empty() {
            n
        } else {
            (self.ratio * n as f64).round() as usize
        };
        let mut out = Vec::with_capacity(n);
        for _ in 0..from_best {
            out.push(&self.best[rng.below(self.best.len())]);
        }
        for _ in from_best..n {
            out.push(&self.standard[rng.below(self.standard.len())]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(tag: &str) -> Experience {
        Experience {
            obs: tag.into(),
            action: "a".into(),
            reward: 0.0,
            next_obs: "o".into(),
            next_candidates: vec!["a".into()],
            done: false,
        }
    }

    #[test]
    fn ring_drops_oldest() {
        let mut b = ReplayBuffers::new(2, 0.5);
        for t in ["x", "y", "z"] {
            b.push(exp(t));
        }
        assert_eq!(b.len(), 2);
        let mut rng = Rng::seed(0);
        assert!(b.sample(50, &mut rng).iter().all(|e| e.obs != "x"));
    }

    #[test]
    fn best_buffer_tracks_the_best_score() {
        let mut b = ReplayBuffers::new(10, 0.5);
        assert!(!b.end_episode(&[exp("zero")], 0.0));
        assert!(b.end_episode(&[exp("a"), exp("b")], 3.0));
        assert!(!b.end_episode(&[exp("worse")], 2.0));
        assert_eq!(b.best_len(), 2);
        assert!(b.end_episode(&[exp("tie")], 3.0));
        assert_eq!(b.best_len(), 3);
        assert!(b.end_episode(&[exp("new")], 5.0));
        assert_eq!((b.best_len(), b.best_score()), (1, Some(5.0)));
    }

    #[test]
    fn batches_mix_both_buffers() {
        let mut b = ReplayBuffers::new(10, 0.25);
        let mut rng = Rng::seed(1);
        assert!(b.sample(4, &mut rng).is_empty());
        b.push(exp("std"));
        assert!(b.sample(8, &mut rng).iter().all(|e| e.obs == "std"));
        b.end_episode(&[exp("best")], 1.0);
        let s = b.sample(8, &mut rng);
        assert_eq!(s.iter().filter(|e| e.obs == "best").count(), 2);
        assert_eq!(s.len(), 8);
    }
}
