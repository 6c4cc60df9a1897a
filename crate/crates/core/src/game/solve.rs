//! Breadth-first planning over admissible actions.

use std::collections::{HashMap, VecDeque};

use super::spec::{GameSpec, Location};
use super::WorldState;

type Key = (usize, Vec<Location>, Vec<bool>, u64, Vec<u32>);

fn key(s: &WorldState) -> Key {
    (
        s.player_room,
        s.object_locations.clone(),
        s.flags.clone(),
        s.score.to_bits(),
        s.rewards_claimed.clone(),
    )
}

/// Shortest action sequence from `state` to any state with a higher score,
/// searching at most `max_depth` moves. Actions are tried in sorted order, so
/// the result is deterministic.
pub fn plan_next_reward(spec: &GameSpec, state: &WorldState, max_depth: usize) -> Option<Vec<String>> {
    plan_next_reward_with(spec, state, max_depth, &|_| true)
}

/// [`plan_next_reward`] restricted to actions accepted by `allow`.
pub fn plan_next_reward_with(
    spec: &GameSpec,
    state: &WorldState,
    max_depth: usize,
    allow: &dyn Fn(&str) -> bool,
) -> Option<Vec<String>> {
    let mut parent: HashMap<Key, Option<(Key, String)>> = HashMap::new();
    let mut queue = VecDeque::new();
    parent.insert(key(state), None);
    queue.push_back((state.clone(), 0usize));
    while let Some((s, depth)) = queue.pop_front() {
        if depth == max_depth {
            continue;
        }
        for action in spec.admissible_actions(&s) {
            if !allow(&action) {
                continue;
            }
            let (next, _) = spec.step(&s, &action);
            let k = key(&next);
            if parent.contains_key(&k) {
                continue;
            }
            parent.insert(k.clone(), Some((key(&s), action)));
            if next.score > state.score + 1e-9 {
                let mut path = Vec::new();
                let mut cur = k;
                while let Some(Some((prev, a))) = parent.get(&cur) {
                    path.push(a.clone());
                    cur = prev.clone();
                }
                path.reverse();
                return Some(path);
            }
            if !spec.is_done(&next) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    None
}

/// Greedily chains [`plan_next_reward`] until the maximum score is reached.
pub fn solve(spec: &GameSpec, max_depth: usize) -> Option<Vec<String>> {
    solve_with(spec, max_depth, &|_| true)
}

pub fn solve_with(spec: &GameSpec, max_depth: usize, allow: &dyn Fn(&str) -> bool) -> Option<Vec<String>> {
    let (mut state, _) = spec.reset();
    let mut plan = Vec::new();
    while !spec.is_done(&state) {
        let segment = plan_next_reward_with(spec, &state, max_depth, allow)?;
        for a in segment {
            state = spec.step(&state, &a).0;
            plan.push(a);
        }
    }
    ((state.score - spec.max_score).abs() < 1e-9).then_some(plan)
}
